"""Scalar diagnostics: energies, Morawetz quantities, smallness monitors,
mass-aspect, Strichartz accumulators, and the scattering residual.

Conventions.  Norms over R^4 carry the full angular factor
2 pi^2 = |S^3|, e.g. ||g||_{L^q}^q = 2 pi^2 int |g|^q R^3 dR.  The
conserved slice energy of the coupled system is

    E = 2 pi int e^{-Z} [ (u_T^2 + u_R^2)/2 + e^{2Z} f(u)^2/(2 r^2) ] r dR

(the stress contraction T(N, N) with the unit normal N = e^{-Z} d_T and
the slice measure e^Z r dR dtheta).  Its drift along an evolution is the
conservation meter; on flat-metric states with the flat target it
reduces to the quadratic flat functional used by the reduction test.

The two "flat" energies follow the small-data statements: the norm sum
E(v) = ||v||_{H1dot} + ||v_T||_{L2}, and the Problem II variant with the
quartic term.  The printed form of the Problem II energy has an
ambiguous L^4 power; the quartic form is the only one with consistent
scaling, so it is the default, with the literal linear form behind a
flag.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields

import numpy as np
from scipy.integrate import simpson

from .grid import (
    SPHERE_S3,
    FieldState,
    RadialGrid,
    constraint_residuals,
    d_r,
    quad_radial,
    radial_weights,
)
from .model import TargetGeometry


@dataclass
class DiagnosticRecord:
    """One diagnostics row; attribute order is the CSV column order."""

    time: float
    energy_curved: float
    energy_flat: float
    energy_probII: float
    morawetz_M: float
    morawetz_accum: float
    strichartz_L2L8_accum: float
    strichartz_weighted_accum: float
    sup_e2Z_minus_1: float
    sup_RoverR_minus_1: float
    sup_Rv: float
    constraint_h_max: float
    constraint_m_max: float
    mass_aspect_max: float


RECORD_FIELDS = [f.name for f in dataclass_fields(DiagnosticRecord)]


# --- norms -------------------------------------------------------------------

def lq_norm(f: np.ndarray, q: float, grid: RadialGrid) -> float:
    """||f||_{L^q(R^4)} by R^3-weighted quadrature."""
    val = quad_radial(np.abs(f) ** q * grid.nodes ** 3, grid.dr)
    return float((SPHERE_S3 * val) ** (1.0 / q))


def h1dot_norm(v: np.ndarray, grid: RadialGrid, order: int = 4) -> float:
    v_r = d_r(v, +1, grid.dr, order)
    val = quad_radial(v_r ** 2 * grid.nodes ** 3, grid.dr)
    return float(np.sqrt(SPHERE_S3 * val))


def energy_flat(v: np.ndarray, v_t: np.ndarray, grid: RadialGrid, order: int = 4) -> float:
    """Norm-sum energy ||v||_{H1dot(R^4)} + ||v_T||_{L^2(R^4)}."""
    return h1dot_norm(v, grid, order) + lq_norm(v_t, 2, grid)


def energy_probII(
    v: np.ndarray,
    v_t: np.ndarray,
    grid: RadialGrid,
    order: int = 4,
    quartic: bool = True,
) -> float:
    """Flat energy plus the L^4 term of the Problem II statement.

    quartic=True adds ||v||_{L^4}^4 / 2 (scaling-consistent default);
    quartic=False adds ||v||_{L^4} / 2 literally.
    """
    l4 = lq_norm(v, 4, grid)
    extra = 0.5 * l4 ** 4 if quartic else 0.5 * l4
    return energy_flat(v, v_t, grid, order) + extra


def energy_bar(v: np.ndarray, v_t: np.ndarray, grid: RadialGrid, order: int = 4) -> float:
    """Residual energy ||v_T||^2 + ||grad v||^2 + ||v||_{L^4}^4 / 2.

    Squared-norm form used for the forward scattering residual.
    """
    return (
        lq_norm(v_t, 2, grid) ** 2
        + h1dot_norm(v, grid, order) ** 2
        + 0.5 * lq_norm(v, 4, grid) ** 4
    )


def _curved_energy_integrand(
    v, v_t, r, z, grid: RadialGrid, target: TargetGeometry, order: int
) -> np.ndarray:
    nodes = grid.nodes
    u = nodes * v
    u_t = nodes * v_t
    u_r = v + nodes * d_r(v, +1, grid.dr, order)
    r_r = d_r(r, -1, grid.dr, order)
    q = np.empty_like(r)
    q[1:] = r[1:] / nodes[1:]
    q[0] = r_r[0]
    f2_over_r2 = (target.f_over_id(u) * v / q) ** 2
    e2z = np.exp(2.0 * z)
    return np.exp(-z) * (0.5 * (u_t ** 2 + u_r ** 2) + 0.5 * e2z * f2_over_r2) * r


def energy_curved(state: FieldState, target: TargetGeometry, order: int = 4) -> float:
    """Slice energy of the coupled system (conserved along exact flows)."""
    g = state.grid
    integrand = _curved_energy_integrand(
        state.v, state.v_t, state.r, state.z, g, target, order
    )
    return float(2.0 * np.pi * quad_radial(integrand, g.dr))


def energy_flat_quadratic(
    v: np.ndarray, v_t: np.ndarray, grid: RadialGrid, target: TargetGeometry, order: int = 4
) -> float:
    """energy_curved evaluated on the flat metric (r = R, Z = 0).

    Shares the integrand code path with energy_curved, so the reduction
    on flat-metric states is exact bit for bit.
    """
    integrand = _curved_energy_integrand(
        v, v_t, grid.nodes.copy(), np.zeros(grid.n_points), grid, target, order
    )
    return float(2.0 * np.pi * quad_radial(integrand, grid.dr))


# --- Morawetz ---------------------------------------------------------------

def morawetz_M(state: FieldState, order: int = 4) -> float:
    """M(T) = int v_R v_T R^3 dR + (3/2) int v_T v R^2 dR."""
    g = state.grid
    v_r = d_r(state.v, +1, g.dr, order)
    nodes = g.nodes
    return float(
        quad_radial(v_r * state.v_t * nodes ** 3, g.dr)
        + 1.5 * quad_radial(state.v_t * state.v * nodes ** 2, g.dr)
    )


def morawetz_identity_residual(identity: dict) -> dict:
    """Residual of the space-time Morawetz identity on a recorded run.

    Differentiating M(T) and substituting the evolution equation gives,
    after the radial integrations by parts,

        dM/dT = -(3/4) int v^2 dR - int F v_R R^3 dR - (3/2) int F v R^2 dR,

    so over [0, T]:

        int int v^2 dR dT + (4/3) (M(T) - M(0))
            + (4/3) int int F v_R R^3 + 2 int int F v R^2  =  0.

    The residual of that combination converges to zero at the stencil
    order (time integrals by Simpson over the per-step samples).
    Returns the residual together with the individually integrated
    pieces.
    """
    t = np.asarray(identity["t"])
    v2 = simpson(np.asarray(identity["v2"]), x=t)
    f_vr = simpson(np.asarray(identity["f_vr"]), x=t)
    f_v = simpson(np.asarray(identity["f_v"]), x=t)
    delta_m = identity["M"][-1] - identity["M"][0]
    residual = v2 + (4.0 / 3.0) * delta_m + (4.0 / 3.0) * f_vr + 2.0 * f_v
    return {
        "residual": abs(float(residual)),
        "spacetime_v2": float(v2),
        "delta_M": float(delta_m),
        "F_vr_term": float(f_vr),
        "F_v_term": float(f_v),
    }


# --- pointwise monitors ------------------------------------------------------

def smallness_monitors(state: FieldState, order: int = 4) -> dict:
    """Grid maxima of |e^{2Z}-1|, |R/r - 1|, |R v|.

    R/r on the axis is the parity limit 1/(dr/dR)(0).
    """
    g = state.grid
    r_r0 = d_r(state.r, -1, g.dr, order)[0]
    ratio = np.empty(g.n_points)
    ratio[1:] = g.nodes[1:] / state.r[1:]
    ratio[0] = 1.0 / r_r0
    return {
        "sup_e2Z_minus_1": float(np.max(np.abs(np.exp(2.0 * state.z) - 1.0))),
        "sup_RoverR_minus_1": float(np.max(np.abs(ratio - 1.0))),
        "sup_Rv": float(np.max(np.abs(g.nodes * state.v))),
    }


def mass_aspect(state: FieldState, order: int = 4) -> np.ndarray:
    """m = 1 + 4 e^{-2Z} dr/dxi dr/deta = 1 + e^{-2Z} (r_T^2 - r_R^2).

    Vanishes identically on flat vacuum (1 + 4*(1/2)*(-1/2)).
    """
    r_r = d_r(state.r, -1, state.grid.dr, order)
    return 1.0 + np.exp(-2.0 * state.z) * (state.r_t ** 2 - r_r ** 2)


def mass_aspect_derivative_margin(
    state: FieldState, target: TargetGeometry, order: int = 4
) -> dict:
    """|d_R m| against its pointwise bounds.

    'literal' is the quoted bound f(u)^2/(4r) + r (du)^2 with
    (du)^2 = u_T^2 + u_R^2.  'derived' is the bound that actually
    follows from differentiating m along the Einstein equations,

        d_R m = -4 e^{-2Z} r [ (du/dxi)^2 dr/deta - (du/deta)^2 dr/dxi ]
                + r_R f(u)^2 / r,

    namely |r_R| f^2/r + 2 e^{-2Z} r max(|dr/dxi|, |dr/deta|) (du)^2.
    The literal constant 1/4 on the f^2/r term is not attainable where
    u peaks with du ~ 0 (there |d_R m| ~ |r_R| f^2/r with r_R ~ 1), so
    both are reported.
    """
    g = state.grid
    nodes = g.nodes
    m = mass_aspect(state, order)
    dm = d_r(m, +1, g.dr, order)
    r_r = d_r(state.r, -1, g.dr, order)
    u = nodes * state.v
    u_t = nodes * state.v_t
    u_r = state.v + nodes * d_r(state.v, +1, g.dr, order)
    du2 = u_t ** 2 + u_r ** 2
    q = np.empty_like(state.r)
    q[1:] = state.r[1:] / nodes[1:]
    q[0] = r_r[0]
    f2_over_r = (target.f_over_id(u) * state.v / q) ** 2 * state.r
    dxi_r = 0.5 * (state.r_t + r_r)
    deta_r = 0.5 * (state.r_t - r_r)
    e2zinv = np.exp(-2.0 * state.z)
    bound_literal = 0.25 * f2_over_r + state.r * du2
    bound_derived = (
        np.abs(r_r) * f2_over_r
        + 2.0 * e2zinv * state.r * np.maximum(np.abs(dxi_r), np.abs(deta_r)) * du2
    )
    return {
        "abs_d_r_m": np.abs(dm),
        "bound_literal": bound_literal,
        "bound_derived": bound_derived,
    }


# --- record assembly ---------------------------------------------------------

def make_record(
    state: FieldState,
    target: TargetGeometry,
    accums: dict,
    order: int = 4,
) -> DiagnosticRecord:
    g = state.grid
    mons = smallness_monitors(state, order)
    resid = constraint_residuals(state, target, order)
    return DiagnosticRecord(
        time=state.t,
        energy_curved=energy_curved(state, target, order),
        energy_flat=energy_flat(state.v, state.v_t, g, order),
        energy_probII=energy_probII(state.v, state.v_t, g, order),
        morawetz_M=morawetz_M(state, order),
        morawetz_accum=accums.get("morawetz_accum", 0.0),
        strichartz_L2L8_accum=accums.get("strichartz_L2L8_accum", 0.0),
        strichartz_weighted_accum=accums.get("strichartz_weighted_accum", 0.0),
        sup_e2Z_minus_1=mons["sup_e2Z_minus_1"],
        sup_RoverR_minus_1=mons["sup_RoverR_minus_1"],
        sup_Rv=mons["sup_Rv"],
        constraint_h_max=float(np.max(np.abs(resid["hamiltonian"]))),
        constraint_m_max=float(np.max(np.abs(resid["momentum"]))),
        mass_aspect_max=float(np.max(np.abs(mass_aspect(state, order)))),
    )


def records_to_csv(records) -> str:
    """diagnostics.csv text: header plus one row per record.

    Floats are rendered with repr (shortest round-trip), which makes
    identical runs byte-identical.
    """
    lines = [",".join(RECORD_FIELDS)]
    for rec in records:
        lines.append(",".join(repr(getattr(rec, name)) for name in RECORD_FIELDS))
    return "\n".join(lines) + "\n"


# --- space-time accumulators over traces --------------------------------------

def dyadic_radii(grid: RadialGrid) -> list[float]:
    """Dyadic ball radii 2^j dR <= R_max used for every sup_rho."""
    out = []
    rho = 4.0 * grid.dr
    while rho <= grid.r_max + 1e-12:
        out.append(rho)
        rho *= 2.0
    return out


def strichartz_accumulators(trace, order: int = 4) -> dict:
    """Space-time norms over a SpaceTimeTrace-like object.

    Returns L2L8 = ||v||_{L^2_T L^8}, wL2L16 = || |x|^{1/4} v ||_{L^2_T L^16},
    wL2Linf = || |x|^{1/2} v ||_{L^2_T L^inf}, and local_energy_sup =
    sup over dyadic rho of rho^{-1/2} ||(v_T, grad v)||_{L^2_{T,x}(|x|<=rho)}.
    Time integrals by trapezoid over the trace cadence.
    """
    grid = trace.grid
    times = np.asarray(trace.times)
    nodes = grid.nodes
    w_r = radial_weights(grid.n_points, grid.dr)
    radii = dyadic_radii(grid)

    l8_sq = np.empty(times.shape[0])
    l16_sq = np.empty(times.shape[0])
    linf_sq = np.empty(times.shape[0])
    local = np.zeros((times.shape[0], len(radii)))
    for k in range(times.shape[0]):
        v = trace.v[k]
        v_t = trace.v_t[k]
        l8_sq[k] = lq_norm(v, 8, grid) ** 2
        l16_sq[k] = lq_norm(nodes ** 0.25 * np.abs(v), 16, grid) ** 2
        linf_sq[k] = float(np.max(np.sqrt(nodes) * np.abs(v))) ** 2
        v_r = d_r(v, +1, grid.dr, order)
        dens = (v_t ** 2 + v_r ** 2) * nodes ** 3
        for j, rho in enumerate(radii):
            mask = nodes <= rho
            local[k, j] = SPHERE_S3 * float(np.dot(w_r[mask], dens[mask]))

    def t_int(samples):
        return float(np.trapezoid(samples, times))

    local_sup = 0.0
    for j, rho in enumerate(radii):
        local_sup = max(local_sup, np.sqrt(t_int(local[:, j]) / rho))
    return {
        "L2L8": float(np.sqrt(t_int(l8_sq))),
        "wL2L16": float(np.sqrt(t_int(l16_sq))),
        "wL2Linf": float(np.sqrt(t_int(linf_sq))),
        "local_energy_sup": float(local_sup),
    }


def morawetz_accumulator(trace) -> float:
    """2 pi^2 int int v^2 dR dT over a trace (equals the R^4 integral
    of v^2/|x|^3 for radial v)."""
    grid = trace.grid
    times = np.asarray(trace.times)
    samples = np.array(
        [2.0 * np.pi ** 2 * quad_radial(v ** 2, grid.dr) for v in trace.v]
    )
    return float(np.trapezoid(samples, times))


# --- scattering --------------------------------------------------------------

def scattering_residual(snapshots, t0_list, plan, order: int = 4) -> list[dict]:
    """Cauchy increments and forward residuals of the scattering pullback.

    snapshots: list of (time, FieldState), ascending, last entry is the
    reference time T_ref.  For each T0 the pullback delta is the flat
    energy norm of (pullback at T0) - (pullback at T_ref); the forward
    residual is sup over snapshot times T >= T0 of the residual energy
    of v(T) - S(T - T0)(v(T0), v_T(T0)).
    """
    from .linprop import propagate_spectral, scattering_pullback

    times = [t for t, _ in snapshots]
    states = {t: s for t, s in snapshots}
    t_ref = times[-1]
    grid = snapshots[0][1].grid
    ref0, ref1 = scattering_pullback(states[t_ref], plan)

    rows = []
    for t0 in t0_list:
        if t0 not in states:
            raise KeyError(f"no snapshot at T0 = {t0}")
        p0, p1 = scattering_pullback(states[t0], plan)
        delta = energy_flat(p0 - ref0, p1 - ref1, grid, order)
        sup_bar = 0.0
        s0 = states[t0]
        for t in times:
            if t < t0:
                continue
            w, w_t = propagate_spectral(s0.v, s0.v_t, t - t0, plan)
            s_t = states[t]
            sup_bar = max(sup_bar, energy_bar(s_t.v - w, s_t.v_t - w_t, grid, order))
        rows.append({"t0": t0, "delta": float(delta), "sup_energy_bar": float(sup_bar)})
    return rows
