"""Method-of-lines evolution of the coupled field/metric system.

The evolved unknowns are (v, v_T, r, r_T, Z, Z_T) where u = R v is the
wave-map amplitude.  In (T, R) variables the system is

    v_TT = v_RR + (3/R) v_R - F(v; r, Z)          (4+1 radial wave)
    r_TT = r_RR + e^{2Z} f(u)^2 / r               (from r^{-1} d2r/dxi deta
                                                   = e^{2Z} f^2/(4 r^2))
    Z_TT = Z_RR - (u_T^2 - u_R^2)/2 - e^{2Z} f(u)^2 / (2 r^2)

with the second and third lines obtained from the null-form Einstein
equations via d2/dxi deta = (d_TT - d_RR)/4.  F depends on the problem
mode; see nonlinearity().

Axis regularization table (each entry argued by parity; q := r/R):
    q                   -> dr/dR(0) at the axis (odd/odd)
    f(u)^2/r^2          -> (f(u)/u)^2 (v/q)^2, regular everywhere
    f(u)^2/r            -> previous times r, vanishes on the axis
    log(r/R)_T = r_T/r  -> d_R r_T(0) / d_R r(0) (odd/odd)
    log(r/R)_R          -> (R r_R - r)/(r R), odd with value 0 on axis
    bracket/r^2 terms   -> even in R; axis node filled by the parabolic
                           extrapolation (4 c_1 - c_2)/3 through the two
                           nearest off-axis samples
    box4p1 on axis      -> 4 v_RR(0): v even gives v_R(0) = 0, so
                           (3/R) v_R -> 3 v_RR(0) by l'Hopital

Free evolution: the metric wave equations are integrated and the
constraints are only monitored, so the constraint residual doubles as a
quantitative correctness meter.  A single run is strictly sequential;
ensembles parallelize across runs.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from .errors import NanDetected, NonPositiveRadius
from .grid import (
    FieldState,
    RadialGrid,
    build_initial_data,
    d_r,
    d_rr,
    even_axis_extrapolate,
    flat_vacuum,
    quad_radial,
)
from .model import ProblemMode, RunConfig, TargetGeometry, validate_config


@dataclass
class Rhs:
    """Time derivatives of the six evolved arrays."""

    dv: np.ndarray
    dv_t: np.ndarray
    dr: np.ndarray
    dr_t: np.ndarray
    dz: np.ndarray
    dz_t: np.ndarray


def box4p1(v: np.ndarray, grid: RadialGrid, order: int = 4) -> np.ndarray:
    """Spatial part of the 4+1 radial wave operator: v_RR + (3/R) v_R.

    v must be an even-parity nodal array.  The axis value is the even
    limit 4 v_RR(0).
    """
    dr = grid.dr
    v_rr = d_rr(v, +1, dr, order)
    v_r = d_r(v, +1, dr, order)
    out = np.empty_like(v)
    out[1:] = v_rr[1:] + 3.0 * v_r[1:] / grid.nodes[1:]
    out[0] = 4.0 * v_rr[0]
    return out


class _Geometry:
    """Per-stage derived fields shared by nonlinearity and metric_rhs."""

    def __init__(self, state: FieldState, target: TargetGeometry, order: int):
        g = state.grid
        dr = g.dr
        nodes = g.nodes
        r = state.r
        if np.any(r[1:] <= 0.0):
            i = int(np.argmax(r[1:] <= 0.0)) + 1
            raise NonPositiveRadius(
                f"r = {r[i]:.3e} at R = {nodes[i]:.6g}",
                time=state.t,
                radius=nodes[i],
            )
        self.r_r = d_r(r, -1, dr, order)
        self.q = np.empty_like(r)
        self.q[1:] = r[1:] / nodes[1:]
        self.q[0] = self.r_r[0]
        self.e2z = np.exp(2.0 * state.z)
        self.u = nodes * state.v
        self.u_t = nodes * state.v_t
        self.v_r = d_r(state.v, +1, dr, order)
        self.u_r = state.v + nodes * self.v_r
        fo = target.f_over_id(self.u)
        self.f2_over_r2 = (fo * state.v / self.q) ** 2
        self.zeta_u = target.zeta(self.u)
        # log(r/R) derivatives; both regular even/odd combinations
        self.log_q_t = np.empty_like(r)
        self.log_q_t[1:] = state.r_t[1:] / r[1:]
        rt_r0 = d_r(state.r_t, -1, dr, order)[0]
        self.log_q_t[0] = rt_r0 / self.q[0]
        self.log_q_r = np.empty_like(r)
        self.log_q_r[1:] = (nodes[1:] * self.r_r[1:] - r[1:]) / (r[1:] * nodes[1:])
        self.log_q_r[0] = 0.0


def _even_field_over_r2(num: np.ndarray, r: np.ndarray) -> np.ndarray:
    """num/r^2 for an even numerator vanishing like R^2 on the axis.

    Off-axis division plus the parabolic even extrapolation at the node
    on the axis.
    """
    out = np.empty_like(num)
    out[1:] = num[1:] / r[1:] ** 2
    out[0] = even_axis_extrapolate(out[1], out[2])
    return out


def nonlinearity(
    state: FieldState,
    mode: ProblemMode,
    target: TargetGeometry,
    order: int = 4,
    geom: _Geometry | None = None,
) -> np.ndarray:
    """Mode-dependent right side F of the reduced wave equation box v = F.

    FULL:
        [(e^{2Z}-1) + (q dr/deta + 1/2) - (q dr/dxi - 1/2)] v/r^2
          + 2 dv/dxi dlog(r/R)/deta + 2 dv/deta dlog(r/R)/dxi
          + e^{2Z} zeta(u) v^3 / q^2
        where the bracket collapses to e^{2Z} - q r_R and the derivative
        coupling to v_T L_T - v_R L_R with L = log(r/R).
    PROBLEM_I: same without the derivative coupling.
    PROBLEM_I_SPECIAL: (e^{2Z}-1) v/R^2 + e^{2Z} v^3 zeta(u).
    PROBLEM_II: transport terms at half weight,
        (L_T v_T - L_R v_R)/2 + (1 - q r_R) v/r^2 + zeta(u) v^3 / q^2.
    FREE: zero.
    """
    if mode is ProblemMode.FREE:
        return np.zeros_like(state.v)
    gm = geom or _Geometry(state, target, order)
    v, v_t = state.v, state.v_t

    if mode is ProblemMode.PROBLEM_I_SPECIAL:
        coeff = _even_field_over_r2(gm.e2z - 1.0, state.grid.nodes)
        return coeff * v + gm.e2z * gm.zeta_u * v ** 3

    cubic = gm.e2z * gm.zeta_u * v ** 3 / gm.q ** 2
    if mode is ProblemMode.PROBLEM_II:
        cubic = gm.zeta_u * v ** 3 / gm.q ** 2
        coeff = _even_field_over_r2(1.0 - gm.q * gm.r_r, state.r)
        transport = 0.5 * (gm.log_q_t * v_t - gm.log_q_r * gm.v_r)
        return transport + coeff * v + cubic

    coeff = _even_field_over_r2(gm.e2z - gm.q * gm.r_r, state.r)
    out = coeff * v + cubic
    if mode is ProblemMode.FULL:
        out = out + gm.log_q_t * v_t - gm.log_q_r * gm.v_r
    return out


def nonlinearity_split(
    state: FieldState,
    mode: ProblemMode,
    target: TargetGeometry,
    order: int = 4,
):
    """(F, F_mass): total nonlinearity and its mass-aspect part.

    F_mass = e^{2Z} m v / r^2 with m = 1 + 4 e^{-2Z} dr/dxi dr/deta is
    the piece dual to the local-energy components of the X norm; the
    remainder F - F_mass is the paper-split L^1_T L^2_x candidate.
    """
    f_total = nonlinearity(state, mode, target, order)
    m = diag.mass_aspect(state, order)
    e2z = np.exp(2.0 * state.z)
    f_mass = _even_field_over_r2(e2z * m, state.r) * state.v
    return f_total, f_mass


def metric_rhs(
    state: FieldState,
    target: TargetGeometry,
    mode: ProblemMode,
    order: int = 4,
    geom: _Geometry | None = None,
):
    """Second time derivatives of the metric functions r and Z.

    Pinned components return zero arrays: PROBLEM_II pins Z, and
    PROBLEM_I_SPECIAL pins r.  Flat vacuum is an exact fixed point
    (f(0) = 0 kills both sources identically).
    """
    gm = geom or _Geometry(state, target, order)
    g = state.grid
    zeros = np.zeros(g.n_points)
    if mode is ProblemMode.FREE:
        return {"dr_t": zeros, "dz_t": zeros.copy()}

    if mode is ProblemMode.PROBLEM_I_SPECIAL:
        dr_t = zeros
    else:
        r_rr = d_rr(state.r, -1, g.dr, order)
        dr_t = r_rr + gm.e2z * gm.f2_over_r2 * state.r

    if mode is ProblemMode.PROBLEM_II:
        dz_t = np.zeros(g.n_points)
    else:
        z_rr = d_rr(state.z, +1, g.dr, order)
        dz_t = z_rr - 0.5 * (gm.u_t ** 2 - gm.u_r ** 2) - 0.5 * gm.e2z * gm.f2_over_r2
    return {"dr_t": dr_t, "dz_t": dz_t}


def compute_rhs(
    state: FieldState,
    mode: ProblemMode,
    target: TargetGeometry,
    order: int = 4,
) -> Rhs:
    geom = _Geometry(state, target, order)
    f_nl = nonlinearity(state, mode, target, order, geom=geom)
    met = metric_rhs(state, target, mode, order, geom=geom)
    rhs = Rhs(
        dv=state.v_t.copy(),
        dv_t=box4p1(state.v, state.grid, order) - f_nl,
        dr=state.r_t.copy(),
        dr_t=met["dr_t"],
        dz=state.z_t.copy(),
        dz_t=met["dz_t"],
    )
    # causal padding makes the outer margin exactly static; freezing it
    # also keeps the extrapolated stencil ghosts from feeding back
    gw = order // 2
    for arr in (rhs.dv, rhs.dv_t, rhs.dr, rhs.dr_t, rhs.dz, rhs.dz_t):
        arr[-gw:] = 0.0
    return rhs


def _apply_mode_pins(state: FieldState, mode: ProblemMode) -> None:
    if mode.pins_r:
        state.r = state.grid.nodes.copy()
        state.r_t = np.zeros(state.grid.n_points)
    if mode.pins_z:
        state.z = np.zeros(state.grid.n_points)
        state.z_t = np.zeros(state.grid.n_points)


def step(state: FieldState, dt: float, cfg: RunConfig, target: TargetGeometry) -> FieldState:
    """One classical RK4 step; re-pins mode-forced fields every stage."""
    mode, order = cfg.mode, cfg.order

    def plus(s: FieldState, k: Rhs, h: float) -> FieldState:
        out = FieldState(
            s.t + h,
            state.v + h * k.dv,
            state.v_t + h * k.dv_t,
            state.r + h * k.dr,
            state.r_t + h * k.dr_t,
            state.z + h * k.dz,
            state.z_t + h * k.dz_t,
            s.grid,
        )
        _apply_mode_pins(out, mode)
        return out

    k1 = compute_rhs(state, mode, target, order)
    s2 = plus(state, k1, 0.5 * dt)
    k2 = compute_rhs(s2, mode, target, order)
    s3 = plus(state, k2, 0.5 * dt)
    k3 = compute_rhs(s3, mode, target, order)
    s4 = plus(state, k3, dt)
    k4 = compute_rhs(s4, mode, target, order)

    sixth = dt / 6.0
    new = FieldState(
        state.t + dt,
        state.v + sixth * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv),
        state.v_t + sixth * (k1.dv_t + 2 * k2.dv_t + 2 * k3.dv_t + k4.dv_t),
        state.r + sixth * (k1.dr + 2 * k2.dr + 2 * k3.dr + k4.dr),
        state.r_t + sixth * (k1.dr_t + 2 * k2.dr_t + 2 * k3.dr_t + k4.dr_t),
        state.z + sixth * (k1.dz + 2 * k2.dz + 2 * k3.dz + k4.dz),
        state.z_t + sixth * (k1.dz_t + 2 * k2.dz_t + 2 * k3.dz_t + k4.dz_t),
        state.grid,
    )
    _apply_mode_pins(new, mode)
    return new


def _check_finite(state: FieldState, step_index: int) -> None:
    for name, arr in state.fields():
        if not np.all(np.isfinite(arr)):
            raise NanDetected(
                f"non-finite {name} at step {step_index}, T = {state.t:.6g}",
                time=state.t,
                step=step_index,
                field=name,
            )


@dataclass
class RunSummary:
    status: str
    records: list
    final_state: FieldState | None
    snapshots: list = field(default_factory=list)  # (time, FieldState)
    identity: dict | None = None
    failure_time: float | None = None
    failure_step: int | None = None
    wall_time: float = 0.0


class _Accumulators:
    """Trapezoid-in-T running integrals sampled at the diagnostic cadence."""

    def __init__(self):
        self.morawetz = 0.0  # 2 pi^2 int int v^2 dR dT
        self.l2l8_sq = 0.0  # int ||v||_{L^8}^2 dT
        self.wl2linf_sq = 0.0  # int ||R^{1/2} v||_inf^2 dT
        self._prev_t = None
        self._prev = None

    def update(self, t, state: FieldState):
        dr = state.grid.dr
        here = (
            quad_radial(state.v ** 2, dr) * 2.0 * np.pi ** 2,
            diag.lq_norm(state.v, 8, state.grid) ** 2,
            float(np.max(np.sqrt(state.grid.nodes) * np.abs(state.v))) ** 2,
        )
        if self._prev_t is not None:
            h = t - self._prev_t
            self.morawetz += 0.5 * h * (self._prev[0] + here[0])
            self.l2l8_sq += 0.5 * h * (self._prev[1] + here[1])
            self.wl2linf_sq += 0.5 * h * (self._prev[2] + here[2])
        self._prev_t, self._prev = t, here

    def as_dict(self):
        return {
            "morawetz_accum": self.morawetz,
            "strichartz_L2L8_accum": float(np.sqrt(self.l2l8_sq)),
            "strichartz_weighted_accum": float(np.sqrt(self.wl2linf_sq)),
        }


def run(
    cfg: RunConfig,
    *,
    initial_state: FieldState | None = None,
    snap_times=(),
    keep_snapshots: bool = False,
    snapshot_sink=None,
    record_sink=None,
    record_identity: bool = False,
    check_radius_every: int = 1,
) -> RunSummary:
    """Evolve from constrained initial data to T_final.

    Diagnostics are recorded every cfg.diag_every steps (plus the first
    and last slice).  snap_times are landed on exactly by shortening
    steps.  Numerical failures propagate as NanDetected or
    NonPositiveRadius carrying the failure time.
    """
    violations = validate_config(cfg)
    if violations:
        raise ValueError("invalid config: " + "; ".join(violations))
    t0 = _time.perf_counter()
    target = cfg.target()
    grid = RadialGrid.from_config(cfg)
    state = initial_state if initial_state is not None else build_initial_data(
        cfg.profile, target, grid, cfg.mode
    )
    state = state.copy()

    dt = cfg.dt
    accums = _Accumulators()
    records = []
    snapshots = []
    identity = {"t": [], "v2": [], "f_vr": [], "f_v": [], "M": []} if record_identity else None

    def emit_record(s):
        accums.update(s.t, s)
        rec = diag.make_record(s, target, accums.as_dict(), order=cfg.order)
        records.append(rec)
        if record_sink is not None:
            record_sink(rec)

    def emit_snapshot(s):
        snap = s.copy()
        if keep_snapshots:
            snapshots.append((s.t, snap))
        if snapshot_sink is not None:
            snapshot_sink(snap)

    def emit_identity(s):
        f_nl = nonlinearity(s, cfg.mode, target, cfg.order)
        v_r = d_r(s.v, +1, grid.dr, cfg.order)
        nodes = grid.nodes
        identity["t"].append(s.t)
        identity["v2"].append(quad_radial(s.v ** 2, grid.dr))
        identity["f_vr"].append(quad_radial(f_nl * v_r * nodes ** 3, grid.dr))
        identity["f_v"].append(quad_radial(f_nl * s.v * nodes ** 2, grid.dr))
        identity["M"].append(diag.morawetz_M(s, order=cfg.order))

    stops = sorted({float(t) for t in snap_times if 0.0 <= t <= cfg.t_final})
    emit_record(state)
    emit_snapshot(state)
    if record_identity:
        emit_identity(state)

    step_index = 0
    eps_t = 1e-12 * max(1.0, cfg.t_final)
    try:
        while state.t < cfg.t_final - eps_t:
            next_stop = cfg.t_final
            for s_t in stops:
                if s_t > state.t + eps_t:
                    next_stop = min(next_stop, s_t)
                    break
            h = min(dt, next_stop - state.t)
            state = step(state, h, cfg, target)
            step_index += 1
            _check_finite(state, step_index)
            if check_radius_every and step_index % check_radius_every == 0:
                r_off = state.r[1:]
                if np.any(r_off <= 0.0):
                    i = int(np.argmax(r_off <= 0.0)) + 1
                    raise NonPositiveRadius(
                        f"r = {state.r[i]:.3e} at R = {grid.nodes[i]:.6g}, "
                        f"T = {state.t:.6g}",
                        time=state.t,
                        radius=grid.nodes[i],
                    )
            if record_identity:
                emit_identity(state)
            at_stop = any(abs(state.t - s_t) <= eps_t for s_t in stops)
            at_end = state.t >= cfg.t_final - eps_t
            if step_index % cfg.diag_every == 0 or at_end or at_stop:
                emit_record(state)
            if at_stop or at_end or (
                cfg.snap_every > 0 and step_index % cfg.snap_every == 0
            ):
                emit_snapshot(state)
    except (NanDetected, NonPositiveRadius) as exc:
        exc.time = getattr(exc, "time", None) or state.t
        raise

    return RunSummary(
        status="ok",
        records=records,
        final_state=state,
        snapshots=snapshots,
        identity=identity,
        wall_time=_time.perf_counter() - t0,
    )
