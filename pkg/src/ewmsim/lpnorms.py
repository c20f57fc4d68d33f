"""Littlewood-Paley projectors and the solution/nonlinearity space norms.

The dyadic multiplier comes from one smooth radial profile phi with
phi = 1 on |x| <= 1, supported in |x| <= 2, via chi(x) = phi(x/2) -
phi(x).  Summing chi(x / 2^j) telescopes, so the partition of unity
sum_j chi(2^{-j} x) = 1 is exact (to rounding) on any band the j-range
covers; no analytic estimate is involved.  The concrete ramp is

    phi(x) = exp(1 - 1/(1 - (|x| - 1)^2))   on 1 < |x| < 2,

one fixed choice among the C-infinity ramps the definition allows.

The solution norm squares and sums eight dyadic components
(Strichartz, weighted Strichartz, energy, three local-energy pieces,
an inverse-weight piece, and a smoothed time-derivative piece); the
nonlinearity norm is an infimum over splits F = F1 + F2 of an
L^1_T L^2_x piece plus an annulus-weighted L^2 piece.  Only certified
upper bounds for that infimum are computed: each documented strategy
evaluates one explicit split.

All sup_rho are taken over dyadic radii only, matching the dyadic
spatial partition the estimates themselves use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import dyadic_radii, lq_norm
from .grid import SPHERE_S3, FieldState, RadialGrid, d_r, radial_weights
from .linprop import HankelPlan


@dataclass(frozen=True)
class DyadicBump:
    """Radial profile phi and multiplier chi = phi(./2) - phi(.)."""

    def phi(self, x) -> np.ndarray:
        ax = np.abs(np.asarray(x, dtype=float))
        out = np.zeros_like(ax)
        out[ax <= 1.0] = 1.0
        ramp = (ax > 1.0) & (ax < 2.0)
        t = ax[ramp] - 1.0
        out[ramp] = np.exp(1.0 - 1.0 / (1.0 - t * t))
        return out

    def chi(self, x) -> np.ndarray:
        return self.phi(np.asarray(x, dtype=float) / 2.0) - self.phi(x)


def default_bump() -> DyadicBump:
    return DyadicBump()


@dataclass
class SpaceTimeTrace:
    """Uniformly sampled (v, v_T) history on a fixed grid.

    v and v_t have shape (n_times, n_points); trapezoid weights in T.
    """

    times: np.ndarray
    v: np.ndarray
    v_t: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        dt = np.diff(self.times)
        if dt.size and not np.allclose(dt, dt[0], rtol=1e-8, atol=1e-12):
            raise ValueError("trace times must be uniformly spaced")

    @classmethod
    def from_snapshots(cls, snapshots) -> "SpaceTimeTrace":
        times = np.array([t for t, _ in snapshots])
        grid = snapshots[0][1].grid
        v = np.stack([s.v for _, s in snapshots])
        v_t = np.stack([s.v_t for _, s in snapshots])
        return cls(times, v, v_t, grid)


def dyadic_band(grid: RadialGrid) -> list[float]:
    """Dyadic scales N = 2^j inside [4 pi / R_max, pi / (4 dR)].

    Two bands of margin at each end of the resolved frequency window;
    content outside is reported as a tail, never silently dropped.
    """
    lo = 4.0 * np.pi / grid.r_max
    hi = np.pi / (4.0 * grid.dr)
    j_lo = int(np.ceil(np.log2(lo) - 1e-12))
    j_hi = int(np.floor(np.log2(hi) + 1e-12))
    return [2.0 ** j for j in range(j_lo, j_hi + 1)]


def project(f: np.ndarray, n_scale: float, bump: DyadicBump, plan: HankelPlan) -> np.ndarray:
    """P_N f: multiply the transform by chi(rho/N) and invert.

    Real-preserving by construction (everything stays real), and
    sum_N P_N f reconstructs f on the resolved band.
    """
    f_big = plan.forward_f(f)
    return plan.inverse_f(bump.chi(plan.rho / n_scale) * f_big)


def partition_residual(bump: DyadicBump, xs: np.ndarray, scales) -> float:
    """max |sum_N chi(x/N) - 1| over xs for the given dyadic scales."""
    total = np.zeros_like(np.asarray(xs, dtype=float))
    for n_scale in scales:
        total += bump.chi(np.asarray(xs, dtype=float) / n_scale)
    return float(np.max(np.abs(total - 1.0)))


def _time_trap(times: np.ndarray, samples: np.ndarray) -> float:
    return float(np.trapezoid(samples, times))


def _ball_l2sq(field_sq_r3, w_r, nodes, rho):
    mask = nodes <= rho
    return SPHERE_S3 * float(np.dot(w_r[mask], field_sq_r3[mask]))


X_COMPONENTS = (
    "l2t_l8x",
    "w14_l2t_l16x",
    "n2_linft_l2x",
    "loc_energy_vt",
    "loc_energy_grad",
    "n2_loc_energy_v",
    "wm32_l2tx",
    "nm2_vt_l2t_l8x",
)


def x_norm(
    trace: SpaceTimeTrace,
    bump: DyadicBump,
    plan: HankelPlan,
    order: int = 4,
):
    """Solution-space norm of a trace, with the per-component breakdown.

    Returns (total, breakdown) where breakdown maps each component name
    to its summed-over-N squared contribution, plus 'tail_l2': the worst
    relative L^2 mass outside the resolved dyadic band.  The norm is
    1-homogeneous: every component is quadratic in v and the total is
    the square root of their sum.
    """
    grid = trace.grid
    times = np.asarray(trace.times)
    nt = times.shape[0]
    scales = dyadic_band(grid)
    radii = dyadic_radii(grid)
    nodes = grid.nodes
    w_r = radial_weights(grid.n_points, grid.dr)
    chi_table = [bump.chi(plan.rho / n_scale) for n_scale in scales]

    comp = {name: 0.0 for name in X_COMPONENTS}
    tail_rel = 0.0

    # per-scale accumulators across time
    nb = len(scales)
    l8_sq = np.zeros((nb, nt))
    w16_sq = np.zeros((nb, nt))
    l2_sq = np.zeros((nb, nt))
    vt8_sq = np.zeros((nb, nt))
    inv32_sq = np.zeros((nb, nt))
    ball_vt = np.zeros((nb, len(radii), nt))
    ball_grad = np.zeros((nb, len(radii), nt))
    ball_v = np.zeros((nb, len(radii), nt))

    for k in range(nt):
        f_big = plan.forward_f(trace.v[k])
        ft_big = plan.forward_f(trace.v_t[k])
        recon = np.zeros(grid.n_points)
        for b, chi in enumerate(chi_table):
            pv = plan.inverse_f(chi * f_big)
            pvt = plan.inverse_f(chi * ft_big)
            recon += pv
            l8_sq[b, k] = lq_norm(pv, 8, grid) ** 2
            w16_sq[b, k] = lq_norm(nodes ** 0.25 * np.abs(pv), 16, grid) ** 2
            l2_sq[b, k] = lq_norm(pv, 2, grid) ** 2
            vt8_sq[b, k] = lq_norm(pvt, 8, grid) ** 2
            # |x|^{-3/2} weight: (pv)^2 R^{-3} R^3 dR = (pv)^2 dR
            inv32_sq[b, k] = SPHERE_S3 * float(np.dot(w_r, pv ** 2))
            pv_r = d_r(pv, +1, grid.dr, order)
            sq_vt = pvt ** 2 * nodes ** 3
            sq_gr = pv_r ** 2 * nodes ** 3
            sq_v = pv ** 2 * nodes ** 3
            for j, rho_ball in enumerate(radii):
                ball_vt[b, j, k] = _ball_l2sq(sq_vt, w_r, nodes, rho_ball)
                ball_grad[b, j, k] = _ball_l2sq(sq_gr, w_r, nodes, rho_ball)
                ball_v[b, j, k] = _ball_l2sq(sq_v, w_r, nodes, rho_ball)
        res = trace.v[k] - recon
        denom = lq_norm(trace.v[k], 2, grid)
        if denom > 0:
            tail_rel = max(tail_rel, lq_norm(res, 2, grid) / denom)

    for b, n_scale in enumerate(scales):
        comp["l2t_l8x"] += _time_trap(times, l8_sq[b])
        comp["w14_l2t_l16x"] += _time_trap(times, w16_sq[b])
        comp["n2_linft_l2x"] += n_scale ** 2 * float(np.max(l2_sq[b]))
        comp["wm32_l2tx"] += _time_trap(times, inv32_sq[b])
        comp["nm2_vt_l2t_l8x"] += n_scale ** -2 * _time_trap(times, vt8_sq[b])
        sup_vt = max(
            _time_trap(times, ball_vt[b, j]) / rho_ball
            for j, rho_ball in enumerate(radii)
        )
        sup_gr = max(
            _time_trap(times, ball_grad[b, j]) / rho_ball
            for j, rho_ball in enumerate(radii)
        )
        sup_v = max(
            _time_trap(times, ball_v[b, j]) / rho_ball
            for j, rho_ball in enumerate(radii)
        )
        comp["loc_energy_vt"] += sup_vt
        comp["loc_energy_grad"] += sup_gr
        comp["n2_loc_energy_v"] += n_scale ** 2 * sup_v

    total = float(np.sqrt(sum(comp.values())))
    breakdown = dict(comp)
    breakdown["tail_l2"] = tail_rel
    return total, breakdown


def _annulus_masks(grid: RadialGrid):
    """Dyadic annuli 2^j <= R <= 2^{j+1} covering (0, R_max]; the
    innermost annulus is extended down to the axis."""
    nodes = grid.nodes
    j_lo = int(np.floor(np.log2(max(grid.dr, 1e-300))))
    j_hi = int(np.ceil(np.log2(grid.r_max)))
    out = []
    for j in range(j_lo, j_hi + 1):
        lo = 2.0 ** j if j > j_lo else 0.0
        hi = 2.0 ** (j + 1)
        mask = (nodes >= lo) & (nodes <= hi)
        if np.any(mask):
            out.append((j, mask))
    return out


def _annuli_component(
    trace_f: np.ndarray,
    times: np.ndarray,
    grid: RadialGrid,
    bump: DyadicBump,
    plan: HankelPlan,
) -> float:
    """sqrt( sum_N ( sum_j 2^{j/2} ||P_N F||_{L^2_{T,x}(annulus j)} )^2 )."""
    scales = dyadic_band(grid)
    annuli = _annulus_masks(grid)
    nodes = grid.nodes
    w_r = radial_weights(grid.n_points, grid.dr)
    nt = times.shape[0]
    # per scale, per annulus, per time: squared L2_x mass
    mass = np.zeros((len(scales), len(annuli), nt))
    for k in range(nt):
        f_big = plan.forward_f(trace_f[k])
        for b, n_scale in enumerate(scales):
            pf = plan.inverse_f(bump.chi(plan.rho / n_scale) * f_big)
            dens = pf ** 2 * nodes ** 3
            for a, (_, mask) in enumerate(annuli):
                mass[b, a, k] = SPHERE_S3 * float(np.dot(w_r[mask], dens[mask]))
    total = 0.0
    for b in range(len(scales)):
        inner = 0.0
        for a, (j, _) in enumerate(annuli):
            inner += 2.0 ** (j / 2.0) * np.sqrt(_time_trap(times, mass[b, a]))
        total += inner ** 2
    return float(np.sqrt(total))


Y_STRATEGIES = ("all-L1", "all-annuli", "paper-split")


def y_norm_upper(
    f_trace: SpaceTimeTrace,
    bump: DyadicBump,
    plan: HankelPlan,
    strategy: str = "all-L1",
    f2_trace: np.ndarray | None = None,
) -> float:
    """Certified upper bound for the nonlinearity-space norm of F.

    Strategies (each evaluates one explicit split F = F1 + F2):
      "all-L1":     F2 = 0, value = ||F||_{L^1_T L^2_x}.
      "all-annuli": F1 = 0, value = the annulus-weighted component.
      "paper-split": F2 = the recorded mass-aspect part of the
          nonlinearity (pass it as f2_trace, shaped like f_trace.v);
          the cubic and bracket terms go to F1.
    Any strategy value dominates the true infimum, so the minimum over
    strategies is itself a certified upper bound.
    """
    grid = f_trace.grid
    times = np.asarray(f_trace.times)
    if strategy not in Y_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "all-L1":
        l2 = np.array([lq_norm(f, 2, grid) for f in f_trace.v])
        return _time_trap(times, l2)
    if strategy == "all-annuli":
        return _annuli_component(f_trace.v, times, grid, bump, plan)
    if f2_trace is None:
        raise ValueError("paper-split needs the mass-aspect part as f2_trace")
    f1 = f_trace.v - f2_trace
    l2 = np.array([lq_norm(f, 2, grid) for f in f1])
    return _time_trap(times, l2) + _annuli_component(
        f2_trace, times, grid, bump, plan
    )
