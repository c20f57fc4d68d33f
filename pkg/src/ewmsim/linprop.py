"""Exact free propagation for the radial 4+1 wave equation, two ways.

Spectral route.  Radial functions on R^4 are expanded in the Dirichlet
Bessel modes of the ball of radius R_max: with F = R f and j_k the k-th
positive zero of J_1,

    F(R) = sum_k c_k J_1(j_k R / R_max),
    c_k  = 2 / (R_max J_2(j_k))^2 * int_0^{R_max} f(R) J_1(rho_k R) R^2 dR,

rho_k = j_k / R_max.  The modes diagonalize the radial Laplacian with
eigenvalue -rho_k^2, so cos(T sqrt(-Delta)) and sin(T sqrt(-Delta))/
sqrt(-Delta) act as scalar multipliers and conserve the discrete energy
to rounding.  The frequency grid follows the Dirichlet zeros exactly
(asymptotically pi (k + 1/4)/R_max); the stored coefficients are the
R^4 radial Fourier transform fhat(rho) = (2 pi)^2 H_1[R f](rho)/rho,
normalized so that exp(-R^2/2) maps to (2 pi)^2 exp(-rho^2/2).

Quadrature: the forward integral int f J_1(rho R) R^2 dR is taken by
Gauss-Legendre against the exact kernel, with f supplied through a
quintic spline of its even extension.  Uniform-grid end-corrected rules
degrade near the Nyquist frequency (the Euler-Maclaurin series for the
oscillatory integrand diverges once rho dR ~ 1) and the inverse kernel
amplifies exactly those modes near the axis; Gauss nodes resolve the
oscillation for every retained mode, leaving only the spline's
O(dR^6) interpolation error, uniformly in rho.  The reconstruction
additionally applies a smooth low-pass taper (unity through the whole
dyadic analysis band, zero by the Nyquist edge) so residual
near-Nyquist coefficient noise cannot be amplified by the axis kernel;
content removed by the taper is far outside the resolved band.

Integral route.  The closed-form propagators are ball averages with the
even-dimension weight (1 - |y|^2)^{-1/2}.  Writing I_h(T, X) for the
unit-ball average of h(|x + T y|) reduced to polar form,

    I_h = int_0^{pi/2} da sin^3 a int_0^pi dth sin^2 th H(s^2),
    s^2 = X^2 + T^2 sin^2 a + 2 X T sin a cos th,

where H(y) = h(sqrt(y)) (radial smoothness makes H smooth), the two
propagators are

    sin route (data (0, g)):   v = (3 T J_g + T^2 d_T J_g) / (4 pi^2)
    cos route (data (f, 0)):   v = (3 J_f + 5 T d_T J_f + T^2 d_TT J_f)
                                   / (4 pi^2)

with J = 4 pi I.  The 5T/3T pair is consistent: the cosine formula is
the T-derivative of the sine one.  All T-derivatives fall on smooth
integrands:

    d_T  -> 2 (T sin^2 a + X sin a cos th) H'(s^2)
    d_TT -> 4 (T sin^2 a + X sin a cos th)^2 H''(s^2) + 2 sin^2 a H'(s^2),

so the apparent light-cone singularity cancels identically and tensor
Gauss-Legendre converges fast.  The (1 - y1^2)^{-1/2} endpoint weight is
absorbed by the y1 = sin a substitution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import InterpolatedUnivariateSpline, make_interp_spline
from scipy.special import j1, jn_zeros, jv, roots_legendre

from .errors import QuadratureFailure
from .grid import SPHERE_S3, FieldState, RadialGrid

FOUR_PI2 = 4.0 * np.pi ** 2


@dataclass
class SpectralField:
    """Radial Fourier coefficients fhat(rho_k) of a real radial function."""

    rho: np.ndarray
    f_hat: np.ndarray


def _taper_profile(x: np.ndarray) -> np.ndarray:
    """C-infinity low-pass: 1 for x <= 1, 0 for x >= 2, smooth ramp between."""
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(ax)
    out[ax <= 1.0] = 1.0
    ramp = (ax > 1.0) & (ax < 2.0)
    t = ax[ramp] - 1.0
    out[ramp] = np.exp(1.0 - 1.0 / (1.0 - t * t))
    return out


class HankelPlan:
    """Dense quadrature realization of the order-1 Hankel transform pair.

    Desk scale by design (n <= 4096): dense kernels, O(n^2) per
    transform.  Immutable once built and safely shareable.
    """

    def __init__(self, grid: RadialGrid, n_modes: int | None = None):
        self.grid = grid
        n = grid.n_points
        r_max = grid.r_max
        if n_modes is None:
            n_modes = n - 1
        self.n_modes = n_modes
        zeros = jn_zeros(1, n_modes)
        self.rho = zeros / r_max
        nodes = grid.nodes

        # Gauss-Legendre nodes resolve J1(rho R) for every retained mode
        gx, gw = roots_legendre(2 * n)
        self._gl_pts = 0.5 * r_max * (gx + 1.0)
        self._ext_nodes = np.concatenate((-nodes[:0:-1], nodes))
        # forward kernel against spline values at the Gauss nodes
        self._fwd = j1(np.outer(self.rho, self._gl_pts)) * (
            0.5 * r_max * gw * self._gl_pts ** 2
        )[None, :]
        # inverse: f_i = sum_k 2/(R_max J2(j_k))^2 * Fhat_k * J1(rho_k R_i)/R_i
        self.mode_weight = 2.0 / (r_max * jv(2, zeros)) ** 2
        kernel = np.empty((n, n_modes))
        kernel[1:, :] = j1(np.outer(nodes[1:], self.rho)) / nodes[1:, None]
        kernel[0, :] = 0.5 * self.rho
        # low-pass taper: unity through the dyadic band [0, pi/(2 dR)],
        # smooth rolloff to zero at the Nyquist edge
        self.taper = _taper_profile(self.rho * (2.0 * grid.dr) / np.pi)
        self._inv = kernel * (self.mode_weight * self.taper)[None, :]

    # F-coefficients: Fhat = H1[R f](rho)
    def forward_f(self, f: np.ndarray) -> np.ndarray:
        ext = np.concatenate((f[:0:-1], f))
        spline = make_interp_spline(self._ext_nodes, ext, k=5)
        return self._fwd @ spline(self._gl_pts)

    def inverse_f(self, f_hat_big: np.ndarray) -> np.ndarray:
        return self._inv @ f_hat_big

    def forward(self, f: np.ndarray) -> SpectralField:
        """Radial R^4 Fourier transform sampled on the mode frequencies."""
        return SpectralField(self.rho, FOUR_PI2 * self.forward_f(f) / self.rho)

    def inverse(self, sf: SpectralField) -> np.ndarray:
        return self.inverse_f(sf.f_hat * sf.rho / FOUR_PI2)

    def rho_weights(self) -> np.ndarray:
        """Frequency-side quadrature weights making the discrete Parseval
        identity sum w_k |fhat|^2 rho^3 = (2 pi)^4 int f^2 R^3 dR exact up
        to the transform's own quadrature error."""
        return self.mode_weight / self.rho

    def h1dot_l2_energy(self, fv: np.ndarray, fv_t: np.ndarray):
        """(||v||_{H1dot}^2, ||v_T||_{L2}^2) from F-coefficients."""
        h1 = SPHERE_S3 * float(np.sum(self.mode_weight * (self.rho * fv) ** 2))
        l2 = SPHERE_S3 * float(np.sum(self.mode_weight * fv_t ** 2))
        return h1, l2


_PLAN_CACHE: dict = {}


def get_plan(grid: RadialGrid, n_modes: int | None = None) -> HankelPlan:
    key = (grid.n_points, round(grid.dr, 14), n_modes)
    if key not in _PLAN_CACHE:
        _PLAN_CACHE[key] = HankelPlan(grid, n_modes)
    return _PLAN_CACHE[key]


def propagate_spectral(
    v0: np.ndarray, v1: np.ndarray, t: float, plan: HankelPlan
):
    """(v, v_T) at time t of the free 4+1 wave with data (v0, v1).

    Works for negative t (the propagators form a group); composing
    propagate(t1) with propagate(t2) equals propagate(t1 + t2) up to
    rounding because the multipliers compose exactly.
    """
    f0 = plan.forward_f(v0)
    f1 = plan.forward_f(v1)
    rho = plan.rho
    c = np.cos(rho * t)
    s = np.sin(rho * t)
    fv = c * f0 + (s / rho) * f1
    fvt = -rho * s * f0 + c * f1
    return plan.inverse_f(fv), plan.inverse_f(fvt)


def scattering_pullback(state: FieldState, plan: HankelPlan):
    """Free-flow pullback of a slice to T = 0: candidate scattering data.

    Exactly inverts propagate_spectral applied to free data, so a free
    trace pulls back to its initial data to rounding.
    """
    return propagate_spectral(state.v, state.v_t, -state.t, plan)


def duhamel_spectral(
    v0: np.ndarray,
    v1: np.ndarray,
    forcing,
    times: np.ndarray,
    plan: HankelPlan,
    substeps: int = 1,
):
    """Solve box v = -v_TT + Delta v = F spectrally with Duhamel quadrature.

    forcing(t) returns the F array on the grid.  times must be uniform
    and start at 0; the inhomogeneous convolution over each interval is
    Simpson in s against the exact sine/cosine kernels, so the linear
    part is integrated exactly.  Note box v = F means v_TT = Delta v - F.
    Returns (V, V_T) arrays of shape (len(times), n).
    """
    times = np.asarray(times, dtype=float)
    rho = plan.rho
    fv = plan.forward_f(v0)
    fvt = plan.forward_f(v1)
    out_v = np.empty((times.shape[0], plan.grid.n_points))
    out_vt = np.empty_like(out_v)
    out_v[0], out_vt[0] = v0, v1
    for k in range(times.shape[0] - 1):
        t_a, t_b = times[k], times[k + 1]
        h = (t_b - t_a) / substeps
        for m in range(substeps):
            s0 = t_a + m * h
            f_a = plan.forward_f(forcing(s0))
            f_m = plan.forward_f(forcing(s0 + 0.5 * h))
            f_b = plan.forward_f(forcing(s0 + h))
            c, s = np.cos(rho * h), np.sin(rho * h)
            ch, sh = np.cos(rho * 0.5 * h), np.sin(rho * 0.5 * h)
            # homogeneous part
            new_v = c * fv + (s / rho) * fvt
            new_vt = -rho * s * fv + c * fvt
            # Duhamel: -int_0^h sin(rho (h - s))/rho Fhat(s) ds by Simpson
            new_v -= (h / 6.0) * (s / rho * f_a + 4.0 * sh / rho * f_m)
            new_vt -= (h / 6.0) * (c * f_a + 4.0 * ch * f_m + f_b)
            fv, fvt = new_v, new_vt
        out_v[k + 1] = plan.inverse_f(fv)
        out_vt[k + 1] = plan.inverse_f(fvt)
    return out_v, out_vt


# --- closed-form integral propagator ------------------------------------------

class _RadialProfile:
    """H(y) = h(sqrt(y)) spline of a gridded radial function.

    Built from the even extension so the axis behavior is right, then
    resampled on a uniform grid in y = R^2 where radial smoothness makes
    H itself smooth; H' and H'' come from the spline, quotient-free.
    Evaluates to exactly zero beyond the data's support.
    """

    def __init__(self, values: np.ndarray, grid: RadialGrid, n_resample: int = 8192):
        nodes = grid.nodes
        ext_r = np.concatenate((-nodes[:0:-1], nodes))
        ext_v = np.concatenate((values[:0:-1], values))
        sp_r = InterpolatedUnivariateSpline(ext_r, ext_v, k=5, ext="zeros")
        y = np.linspace(0.0, grid.r_max ** 2, n_resample)
        self._h = InterpolatedUnivariateSpline(y, sp_r(np.sqrt(y)), k=5, ext="zeros")
        self._h1 = self._h.derivative(1)
        self._h2 = self._h.derivative(2)
        self.is_zero = not np.any(values)

    def h(self, y):
        return self._h(y)

    def h1(self, y):
        return self._h1(y)

    def h2(self, y):
        return self._h2(y)


def _gauss_grid(n_alpha: int, n_theta: int):
    xa, wa = np.polynomial.legendre.leggauss(n_alpha)
    xt, wt = np.polynomial.legendre.leggauss(n_theta)
    alpha = 0.25 * np.pi * (xa + 1.0)
    theta = 0.5 * np.pi * (xt + 1.0)
    w = np.outer(0.25 * np.pi * wa, 0.5 * np.pi * wt)
    return alpha[:, None], theta[None, :], w


def _ball_averages(profile: _RadialProfile, t: float, x: float, quad, need):
    """J, d_T J, d_TT J for one evaluation radius.

    J(T, X) = 4 pi int da int dth sin^3 a sin^2 th H(s^2) with
    s^2 = X^2 + T^2 sin^2 a + 2 X T sin a cos th.
    """
    alpha, theta, w = quad
    sa = np.sin(alpha)
    st2 = np.sin(theta) ** 2
    base = w * sa ** 3 * st2
    s2 = x * x + (t * sa) ** 2 + 2.0 * x * t * sa * np.cos(theta)
    dt_s2 = 2.0 * (t * sa ** 2 + x * sa * np.cos(theta))
    out = []
    if "j" in need:
        out.append(4.0 * np.pi * float(np.sum(base * profile.h(s2))))
    if "jt" in need or "jtt" in need:
        h1 = profile.h1(s2)
    if "jt" in need:
        out.append(4.0 * np.pi * float(np.sum(base * h1 * dt_s2)))
    if "jtt" in need:
        h2 = profile.h2(s2)
        out.append(
            4.0 * np.pi
            * float(np.sum(base * (h2 * dt_s2 ** 2 + 2.0 * h1 * sa ** 2)))
        )
    return out


def propagate_integral(
    v0: np.ndarray,
    v1: np.ndarray,
    t: float,
    r_eval: np.ndarray,
    grid: RadialGrid,
    *,
    tol: float = 1e-7,
    n_base: int = 96,
) -> np.ndarray:
    """Free wave at time t > 0 via the closed-form ball-average formulas.

    Independent of the spectral route: different representation,
    different quadrature, so the two cross-validate each other.  The
    rule is two-level adaptive: results at the base tensor order and at
    1.5x the order must agree to tol (absolute, per point) or
    QuadratureFailure is raised.
    """
    if t <= 0.0:
        raise ValueError("propagate_integral requires t > 0")
    r_eval = np.asarray(r_eval, dtype=float)
    prof0 = _RadialProfile(np.asarray(v0, dtype=float), grid)
    prof1 = _RadialProfile(np.asarray(v1, dtype=float), grid)
    quad_lo = _gauss_grid(n_base, 2 * n_base)
    quad_hi = _gauss_grid((3 * n_base) // 2, 3 * n_base)

    def eval_all(quad):
        out = np.zeros(r_eval.shape[0])
        for i, x in enumerate(r_eval):
            acc = 0.0
            if not prof0.is_zero:
                jf, jf_t, jf_tt = _ball_averages(prof0, t, x, quad, ("j", "jt", "jtt"))
                acc += 3.0 * jf + 5.0 * t * jf_t + t * t * jf_tt
            if not prof1.is_zero:
                jg, jg_t = _ball_averages(prof1, t, x, quad, ("j", "jt"))
                acc += 3.0 * t * jg + t * t * jg_t
            out[i] = acc / FOUR_PI2
        return out

    lo = eval_all(quad_lo)
    hi = eval_all(quad_hi)
    err = float(np.max(np.abs(hi - lo)))
    if err > tol:
        raise QuadratureFailure(
            f"ball-average quadrature disagreement {err:.3e} exceeds {tol:.1e}",
            estimate=err,
            tolerance=tol,
        )
    return hi
