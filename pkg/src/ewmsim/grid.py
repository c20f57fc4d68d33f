"""Radial grid, field state, parity machinery, and constrained initial data.

Grid layout: uniform nodes R_i = i*dR with a node exactly on the axis.
Regularity at the axis is encoded through parity instead of penalties:
v, v_T, Z, Z_T are even about R = 0, while r, r_T (and u = R v) are odd.
Derivative stencils see mirrored ghost nodes, which makes the axis
conditions r(0) = 0, r_T(0) = 0, dZ/dR(0) = 0 exact by symmetry.

Initial data solves the two constraint contractions of the Einstein
equations restricted to the T = 0 slice.  In (T, R) variables they read

    hamiltonian:  (Z_T r_T + Z_R r_R - r_RR)/r
                      = (u_T^2 + u_R^2)/2 + e^{2Z} f(u)^2 / (2 r^2)
    momentum:     (Z_T r_R + Z_R r_T - d_R r_T)/r = u_T u_R

obtained from the null-frame Einstein/stress components via
d_xi = (d_T + d_R)/2, d_eta = (d_T - d_R)/2.  With the slice gauge
Z|_{T=0} = 0 and the choice r_T|_{T=0} = 0, the momentum constraint
reduces to Z_T = r u_T u_R / r_R (identically zero for time-symmetric
data) and the hamiltonian becomes a second-order ODE for r:

    r'' = -r (u_1^2 + u_0'^2)/2 - f(u_0)^2 / (2 r),   r(0) = 0, r'(0) = 1.

Modes that pin a metric function swap which constraint is integrated;
see build_initial_data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence, NonPositiveRadius
from .model import ProblemMode, ProfileConfig, RunConfig, TargetGeometry

SPHERE_S3 = 2.0 * np.pi ** 2  # area of the unit 3-sphere, for R^4 norms


@dataclass(frozen=True)
class RadialGrid:
    n_points: int
    dr: float
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "nodes", np.arange(self.n_points, dtype=float) * self.dr
        )

    @property
    def r_max(self) -> float:
        return (self.n_points - 1) * self.dr

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "RadialGrid":
        return cls(cfg.n_points, cfg.dr)


@dataclass
class FieldState:
    """One time slice of (v, v_T, r, r_T, Z, Z_T) on a RadialGrid."""

    t: float
    v: np.ndarray
    v_t: np.ndarray
    r: np.ndarray
    r_t: np.ndarray
    z: np.ndarray
    z_t: np.ndarray
    grid: RadialGrid

    def copy(self) -> "FieldState":
        return FieldState(
            self.t,
            self.v.copy(),
            self.v_t.copy(),
            self.r.copy(),
            self.r_t.copy(),
            self.z.copy(),
            self.z_t.copy(),
            self.grid,
        )

    def u(self) -> np.ndarray:
        return self.grid.nodes * self.v

    def u_t(self) -> np.ndarray:
        return self.grid.nodes * self.v_t

    def fields(self):
        return (
            ("v", self.v),
            ("v_t", self.v_t),
            ("r", self.r),
            ("r_t", self.r_t),
            ("z", self.z),
            ("z_t", self.z_t),
        )


PARITY = {"v": +1, "v_t": +1, "z": +1, "z_t": +1, "r": -1, "r_t": -1, "u": -1}


def flat_vacuum(grid: RadialGrid, t: float = 0.0) -> FieldState:
    zeros = np.zeros(grid.n_points)
    return FieldState(
        t, zeros.copy(), zeros.copy(), grid.nodes.copy(), zeros.copy(),
        zeros.copy(), zeros.copy(), grid,
    )


# --- parity padding and finite differences ---------------------------------

def pad_parity(a: np.ndarray, parity: int, gw: int) -> np.ndarray:
    """Extend with gw mirrored nodes at the axis and gw linear-extrapolated
    nodes at the outer edge.

    The axis mirror is exact by symmetry.  The outer extrapolation is
    exact for the causally padded exterior (v = 0, Z = 0, r linear);
    evolution never consumes it because the outer zone is frozen.
    Mirroring is idempotent: padding an already-symmetric array changes
    nothing.
    """
    n = a.shape[0]
    out = np.empty(n + 2 * gw, dtype=a.dtype)
    out[gw:gw + n] = a
    if parity > 0:
        out[:gw] = a[gw:0:-1]
    else:
        out[:gw] = -a[gw:0:-1]
    slope = a[-1] - a[-2]
    for k in range(1, gw + 1):
        out[gw + n - 1 + k] = a[-1] + k * slope
    return out


def d_r(a: np.ndarray, parity: int, dr: float, order: int) -> np.ndarray:
    """Centered first derivative with parity ghosts."""
    gw = order // 2
    p = pad_parity(a, parity, gw)
    if order == 2:
        return (p[2:] - p[:-2]) / (2.0 * dr)
    return (-p[4:] + 8.0 * p[3:-1] - 8.0 * p[1:-3] + p[:-4]) / (12.0 * dr)


def d_rr(a: np.ndarray, parity: int, dr: float, order: int) -> np.ndarray:
    """Centered second derivative with parity ghosts."""
    gw = order // 2
    p = pad_parity(a, parity, gw)
    if order == 2:
        return (p[2:] - 2.0 * p[1:-1] + p[:-2]) / (dr * dr)
    return (
        -p[4:] + 16.0 * p[3:-1] - 30.0 * p[2:-2] + 16.0 * p[1:-3] - p[:-4]
    ) / (12.0 * dr * dr)


def even_axis_extrapolate(c1: float, c2: float) -> float:
    """Value at R = 0 of an even function from its two nearest samples.

    Fits c0 + c2*R^2 through (dR, 2dR); O(dR^4) for smooth even input.
    """
    return (4.0 * c1 - c2) / 3.0


# --- quadrature -------------------------------------------------------------

# Gregory end corrections of order 6 (replace the first five trapezoid
# weights).  Verified exact for polynomials of degree <= 5 in the tests.
_GREGORY6 = np.array(
    [95.0 / 288.0, 317.0 / 240.0, 23.0 / 30.0, 793.0 / 720.0, 157.0 / 160.0]
)


def radial_weights(n: int, dr: float, corrected: bool = True) -> np.ndarray:
    """Quadrature weights for int_0^{R_max} g(R) dR on the node grid.

    Trapezoid with a Gregory order-6 correction at the axis end.  Energy
    integrands are odd about R = 0, for which plain trapezoid stalls at
    O(dR^2); the correction restores high order.  The outer end keeps the
    plain trapezoid half-weight: causal padding guarantees integrands
    vanish there.
    """
    w = np.full(n, dr)
    w[0] = 0.5 * dr
    w[-1] = 0.5 * dr
    if corrected and n > 10:
        w[:5] = _GREGORY6 * dr
    return w


def quad_radial(g: np.ndarray, dr: float) -> float:
    return float(np.dot(radial_weights(g.shape[0], dr), g))


# --- initial data profiles ---------------------------------------------------

def _profile_value_and_deriv(profile: ProfileConfig, r: np.ndarray):
    """One-sided profile p(R) and p'(R) before symmetrization."""
    x = (r - profile.center) / profile.width
    eps = profile.amplitude
    if profile.family == "gaussian_bump":
        p = eps * np.exp(-x * x)
        dp = p * (-2.0 * x) / profile.width
        return p, dp
    if profile.family == "compact_bump":
        inside = np.abs(x) < 1.0
        xs = np.where(inside, x, 0.0)
        core = np.exp(1.0 - 1.0 / (1.0 - xs * xs))
        p = np.where(inside, eps * core, 0.0)
        dp = np.where(
            inside,
            p * (-2.0 * xs) / ((1.0 - xs * xs) ** 2 * profile.width),
            0.0,
        )
        return p, dp
    raise ValueError(f"unknown profile family {profile.family!r}")


def evaluate_profile(profile: ProfileConfig, r: np.ndarray):
    """Even initial data (v0, v1) at radii r.

    v0(R) = p(R) + p(-R) keeps parity exact even for profiles whose tail
    crosses the axis.  The ingoing velocity v1 = p'(R) + p'(-R) is the
    even time derivative of the pulse p(R + T) + p(T - R) at T = 0.
    """
    r = np.asarray(r, dtype=float)
    p_plus, dp_plus = _profile_value_and_deriv(profile, r)
    p_minus, dp_minus = _profile_value_and_deriv(profile, -r)
    v0 = p_plus + p_minus
    if profile.velocity == "ingoing":
        v1 = dp_plus + dp_minus
    else:
        v1 = np.zeros_like(v0)
    return v0, v1


# --- constraint solving ------------------------------------------------------

def _u_data_callables(profile: ProfileConfig, target: TargetGeometry):
    """u0, u0', u1 as callables of R (analytic, for RK substeps)."""

    def u0(r):
        v0, _ = evaluate_profile(profile, np.asarray(r, dtype=float))
        return np.asarray(r, dtype=float) * v0

    def u0p(r):
        r = np.asarray(r, dtype=float)
        p_plus, dp_plus = _profile_value_and_deriv(profile, r)
        p_minus, dp_minus = _profile_value_and_deriv(profile, -r)
        # u0' = v0 + R v0'
        return (p_plus + p_minus) + r * (dp_plus + dp_minus)

    def u1(r):
        r = np.asarray(r, dtype=float)
        v0, v1 = evaluate_profile(profile, r)
        return r * v1

    return u0, u0p, u1


def _matter_density(r_coord, u0, u0p, u1):
    """(u_T^2 + u_R^2)/2 on the slice."""
    return 0.5 * (u1(r_coord) ** 2 + u0p(r_coord) ** 2)


def _integrate_r_constraint(nodes, dr, target, u0, u0p, u1, order, substeps=1):
    """March r'' = -r*rho - f(u0)^2/(2r) out from the axis.

    Classical RK at the stepper's order (midpoint for 2, RK4 for 4),
    optionally with refined substeps for the step-doubling error check.
    Returns (r, r') sampled on the nodes.
    """

    def rhs(R, y):
        r, w = y
        rho = _matter_density(R, u0, u0p, u1)
        if R == 0.0 or r == 0.0:
            # f(u)^2/(2r) ~ R v^2 /2 -> 0 on-axis
            sing = 0.0
        else:
            fu = float(target.f(u0(R)))
            sing = fu * fu / (2.0 * r)
        return np.array([w, -r * float(rho) - sing])

    n = nodes.shape[0]
    out_r = np.empty(n)
    out_w = np.empty(n)
    y = np.array([0.0, 1.0])
    out_r[0], out_w[0] = y
    h = dr / substeps
    for i in range(1, n):
        R = nodes[i - 1]
        for k in range(substeps):
            Rk = R + k * h
            if order == 2:
                k1 = rhs(Rk, y)
                k2 = rhs(Rk + 0.5 * h, y + 0.5 * h * k1)
                y = y + h * k2
            else:
                k1 = rhs(Rk, y)
                k2 = rhs(Rk + 0.5 * h, y + 0.5 * h * k1)
                k3 = rhs(Rk + 0.5 * h, y + 0.5 * h * k2)
                k4 = rhs(Rk + h, y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if y[0] <= 0.0:
            raise NonPositiveRadius(
                f"area radius hit r = {y[0]:.3e} at R = {nodes[i]:.6g} while "
                "solving the hamiltonian constraint (data too strong)",
                time=0.0,
                radius=nodes[i],
            )
        out_r[i], out_w[i] = y
    return out_r, out_w


def _integrate_z_constraint(nodes, dr, target, u0, u0p, u1, order, substeps=1):
    """March Z' = R*rho + e^{2Z} f(u0)^2/(2R) with r pinned to R."""

    def rhs(R, z):
        if R == 0.0:
            return 0.0
        rho = float(_matter_density(R, u0, u0p, u1))
        fu = float(target.f(u0(R)))
        return R * rho + np.exp(2.0 * z) * fu * fu / (2.0 * R)

    n = nodes.shape[0]
    out = np.empty(n)
    z = 0.0
    out[0] = z
    h = dr / substeps
    for i in range(1, n):
        R = nodes[i - 1]
        for k in range(substeps):
            Rk = R + k * h
            if order == 2:
                k1 = rhs(Rk, z)
                k2 = rhs(Rk + 0.5 * h, z + 0.5 * h * k1)
                z = z + h * k2
            else:
                k1 = rhs(Rk, z)
                k2 = rhs(Rk + 0.5 * h, z + 0.5 * h * k1)
                k3 = rhs(Rk + 0.5 * h, z + 0.5 * h * k2)
                k4 = rhs(Rk + h, z + h * k3)
                z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i] = z
    return out


def build_initial_data(
    profile: ProfileConfig,
    target: TargetGeometry,
    grid: RadialGrid,
    mode: ProblemMode,
) -> FieldState:
    """Constraint-satisfying T = 0 state for the requested mode.

    FULL / PROBLEM_I : slice gauge Z = 0; hamiltonian constraint
        integrated as a first-order system for (r, r'); r_T = 0 and
        Z_T = r u_1 u_0'/r_R close the momentum constraint.
    PROBLEM_II : same r integration (Z pinned to 0); momentum gives
        r_T = -int_0^R r u_1 u_0' dR'.
    PROBLEM_I_SPECIAL : r pinned to R; hamiltonian integrated for Z;
        momentum gives Z_T = R u_1 u_0'.
    FREE : exact flat vacuum regardless of the profile.

    eps = 0 bypasses the solver entirely and returns exact flat vacuum,
    avoiding the removable 0/0 of the r-ODE at the axis.
    """
    if mode is ProblemMode.FREE:
        state = flat_vacuum(grid)
        v0, v1 = evaluate_profile(profile, grid.nodes)
        state.v, state.v_t = v0, v1
        return state
    if profile.amplitude == 0.0:
        return flat_vacuum(grid)

    nodes = grid.nodes
    v0, v1 = evaluate_profile(profile, nodes)
    u0c, u0pc, u1c = _u_data_callables(profile, target)
    # constraint march always at RK4; cheap, and keeps the data error
    # below either evolution stencil's floor
    order = 4
    state = flat_vacuum(grid)
    state.v, state.v_t = v0, v1

    if mode is ProblemMode.PROBLEM_I_SPECIAL:
        z = _integrate_z_constraint(nodes, grid.dr, target, u0c, u0pc, u1c, order)
        z2 = _integrate_z_constraint(
            nodes, grid.dr, target, u0c, u0pc, u1c, order, substeps=2
        )
        _check_ode_agreement(z, z2, grid.dr, order)
        state.z = z2
        state.z_t = nodes * u1c(nodes) * u0pc(nodes)
        return state

    # FULL, PROBLEM_I, PROBLEM_II share the r integration
    r, w = _integrate_r_constraint(nodes, grid.dr, target, u0c, u0pc, u1c, order)
    r2, w2 = _integrate_r_constraint(
        nodes, grid.dr, target, u0c, u0pc, u1c, order, substeps=2
    )
    _check_ode_agreement(r, r2, grid.dr, order)
    state.r = r2
    if mode is ProblemMode.PROBLEM_II:
        # momentum with Z == 0: d_R r_T = -r u_T u_R
        integrand = r2 * u1c(nodes) * u0pc(nodes)
        r_t = -np.concatenate(([0.0], np.cumsum(
            0.5 * (integrand[1:] + integrand[:-1]) * grid.dr)))
        state.r_t = r_t
    else:
        # Z_T r_R = r u_T u_R with r_T = 0, Z_R = 0
        state.z_t = r2 * u1c(nodes) * u0pc(nodes) / w2
    return state


def _check_ode_agreement(coarse, fine, dr, order):
    err = float(np.max(np.abs(coarse - fine)))
    tol = max(1e-9, 100.0 * dr ** (order + 1))
    if err > tol:
        raise NonConvergence(
            f"constraint ODE step-doubling error {err:.3e} exceeds {tol:.3e}",
            estimate=err,
            tolerance=tol,
        )


# --- residual evaluation -----------------------------------------------------

def constraint_residuals(state: FieldState, target: TargetGeometry, order: int = 4):
    """Pointwise residuals of the two constraint contractions.

    Evaluated by finite differences over interior nodes (the axis node
    and the outer stencil margin are excluded).  Keys 'hamiltonian' and
    'momentum'; flat vacuum gives zeros to rounding.
    """
    g = state.grid
    dr = g.dr
    gw = order // 2
    r = state.r
    u = state.u()
    u_t = state.u_t()
    u_r = state.v + g.nodes * d_r(state.v, +1, dr, order)
    r_r = d_r(r, -1, dr, order)
    r_rr = d_rr(r, -1, dr, order)
    z_r = d_r(state.z, +1, dr, order)
    rt_r = d_r(state.r_t, -1, dr, order)
    e2z = np.exp(2.0 * state.z)
    # f(u)^2 / r^2 written with the regular factors (f(u)/u)^2 (v/q)^2
    q = np.empty_like(r)
    q[1:] = r[1:] / g.nodes[1:]
    q[0] = r_r[0]
    f2_over_r2 = (target.f_over_id(u) * state.v / q) ** 2

    with np.errstate(divide="ignore", invalid="ignore"):
        ham = (
            (state.z_t * state.r_t + z_r * r_r - r_rr) / r
            - 0.5 * (u_t ** 2 + u_r ** 2)
            - 0.5 * e2z * f2_over_r2
        )
        mom = (state.z_t * r_r + z_r * state.r_t - rt_r) / r - u_t * u_r

    interior = slice(1, g.n_points - gw)
    pad = np.zeros(g.n_points)
    ham_full, mom_full = pad.copy(), pad.copy()
    ham_full[interior] = ham[interior]
    mom_full[interior] = mom[interior]
    return {"hamiltonian": ham_full, "momentum": mom_full}


def null_derivatives(state: FieldState, field_name: str, order: int = 4):
    """d_xi = (d_T + d_R)/2 and d_eta = (d_T - d_R)/2 of r, v, or Z.

    Uses the stored time derivative and a centered radial derivative.
    Flat vacuum gives d_xi r = +1/2, d_eta r = -1/2 exactly, the
    normalization every Problem I/II coefficient is measured against.
    """
    arrays = {
        "r": (state.r, state.r_t, -1),
        "v": (state.v, state.v_t, +1),
        "z": (state.z, state.z_t, +1),
    }
    if field_name not in arrays:
        raise ValueError(f"field must be one of r, v, z; got {field_name!r}")
    a, a_t, parity = arrays[field_name]
    a_r = d_r(a, parity, state.grid.dr, order)
    return {"d_xi": 0.5 * (a_t + a_r), "d_eta": 0.5 * (a_t - a_r)}


# --- snapshot binary format --------------------------------------------------

SNAPSHOT_MAGIC = b"EWM1"
SNAPSHOT_VERSION = 1


def write_snapshot(path, state: FieldState) -> None:
    """Write the EWM1 container: magic, version u32, n_points u64,
    dR f64, time f64, then six little-endian f64 arrays in the order
    v, v_T, r, r_T, Z, Z_T.  Round-trips are bit-exact.
    """
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", SNAPSHOT_VERSION))
        fh.write(struct.pack("<Q", state.grid.n_points))
        fh.write(struct.pack("<d", state.grid.dr))
        fh.write(struct.pack("<d", state.t))
        for _, arr in state.fields():
            fh.write(np.asarray(arr, dtype="<f8").tobytes())


def read_snapshot(path) -> FieldState:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        (n_points,) = struct.unpack("<Q", fh.read(8))
        (dr,) = struct.unpack("<d", fh.read(8))
        (t,) = struct.unpack("<d", fh.read(8))
        grid = RadialGrid(n_points, dr)
        arrays = []
        for _ in range(6):
            buf = fh.read(8 * n_points)
            arrays.append(np.frombuffer(buf, dtype="<f8").copy())
    return FieldState(t, *arrays, grid=grid)
