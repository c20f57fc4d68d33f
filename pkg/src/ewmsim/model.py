"""Continuum model data: target geometry, problem modes, run configuration.

The target surface of revolution enters the equations only through its
generating function f, the derivative f_u, and the smooth remainder zeta
defined by

    f(u) * f_u(u) = u + u^3 * zeta(u).

zeta drives the critical cubic term of the reduced 4+1 wave equation, so
it must be evaluated without cancellation near u = 0: the quotient
(f*f_u - u)/u^3 loses ~9 digits at |u| = 1e-3, hence the stored Taylor
polynomial below the crossover.

Everything in this module is immutable after construction and safe to
share across threads/processes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

# Crossover between series and quotient evaluation of zeta.
ZETA_SERIES_CUTOFF = 1e-3

# Taylor coefficients of zeta for the hyperbolic plane target
# (f = sinh): sinh(u)cosh(u) = u + sum_k 4^{k+1} u^{2k+3} / (2k+3)!,
# so zeta(u) = sum_k 4^{k+1}/(2k+3)! * u^{2k}.  Stored through u^10.
_HYPERBOLIC_ZETA_COEFFS = tuple(
    4.0 ** (k + 1) / math.factorial(2 * k + 3) for k in range(6)
)


@dataclass(frozen=True)
class TargetGeometry:
    """Generating function of the target surface of revolution.

    Attributes
    ----------
    f, f_u : callables mapping geodesic coordinate arrays to arrays.
    zeta : smooth remainder in f*f_u = u + u^3*zeta(u).
    f_over_id : f(u)/u evaluated without the 0/0 at the axis; used by
        every axis-regularized ratio (f(u)^2/r^2 etc.).
    name : identifier used in configs ("hyperbolic", "flat", "poly").
    coeffs : polynomial zeta coefficients, only for the "poly" family.
    """

    f: Callable[[np.ndarray], np.ndarray]
    f_u: Callable[[np.ndarray], np.ndarray]
    zeta: Callable[[np.ndarray], np.ndarray]
    f_over_id: Callable[[np.ndarray], np.ndarray]
    name: str
    coeffs: tuple = ()


def _hyperbolic_zeta(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    small = np.abs(u) <= ZETA_SERIES_CUTOFF
    u2 = u * u
    series = np.zeros_like(u)
    for c in reversed(_HYPERBOLIC_ZETA_COEFFS):
        series = series * u2 + c
    with np.errstate(divide="ignore", invalid="ignore"):
        quotient = (np.sinh(u) * np.cosh(u) - u) / np.where(small, 1.0, u) ** 3
    return np.where(small, series, quotient)


def _hyperbolic_f_over_id(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    small = np.abs(u) <= 1e-4
    u2 = u * u
    series = 1.0 + u2 / 6.0 + u2 * u2 / 120.0
    with np.errstate(divide="ignore", invalid="ignore"):
        quotient = np.sinh(u) / np.where(small, 1.0, u)
    return np.where(small, series, quotient)


def make_hyperbolic_target() -> TargetGeometry:
    """Target H^2: f(s) = sinh(s), so zeta(0) = 2/3."""
    return TargetGeometry(
        f=np.sinh,
        f_u=np.cosh,
        zeta=_hyperbolic_zeta,
        f_over_id=_hyperbolic_f_over_id,
        name="hyperbolic",
    )


def make_flat_target() -> TargetGeometry:
    """Degenerate flat target f(s) = s; zeta vanishes identically.

    Turns the wave-map nonlinearity into the pure linear mass term
    f*f_u/r^2 = u/r^2, which is what makes it useful as a test target.
    """
    one = lambda u: np.ones_like(np.asarray(u, dtype=float))
    zero = lambda u: np.zeros_like(np.asarray(u, dtype=float))
    return TargetGeometry(
        f=lambda u: np.asarray(u, dtype=float).copy(),
        f_u=one,
        zeta=zero,
        f_over_id=one,
        name="flat",
    )


def make_polynomial_target(coeffs) -> TargetGeometry:
    """Target with polynomial zeta(u) = sum_k coeffs[k] * u^(2k).

    The generating function follows in closed form: with
    P(u) = 1 + sum_k coeffs[k] u^(2k+2)/(k+2) one has f = u*sqrt(P),
    f_u = sqrt(P) + u P'/(2 sqrt(P)), and f*f_u = u + u^3 zeta exactly.
    P must stay positive on the range of u seen in a run; construction
    does not check that (validate on use).
    """
    coeffs = tuple(float(c) for c in coeffs)

    def p_val(u):
        u2 = np.asarray(u, dtype=float) ** 2
        out = np.ones_like(u2)
        for k, c in enumerate(coeffs):
            out = out + c * u2 ** (k + 1) / (k + 2)
        return out

    def p_deriv(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for k, c in enumerate(coeffs):
            out = out + c * (2 * k + 2) * u ** (2 * k + 1) / (k + 2)
        return out

    def f(u):
        u = np.asarray(u, dtype=float)
        return u * np.sqrt(p_val(u))

    def f_u(u):
        u = np.asarray(u, dtype=float)
        sq = np.sqrt(p_val(u))
        return sq + u * p_deriv(u) / (2.0 * sq)

    def zeta(u):
        u2 = np.asarray(u, dtype=float) ** 2
        out = np.zeros_like(u2)
        for c in reversed(coeffs):
            out = out * u2 + c
        return out

    return TargetGeometry(
        f=f,
        f_u=f_u,
        zeta=zeta,
        f_over_id=lambda u: np.sqrt(p_val(u)),
        name="poly",
        coeffs=coeffs,
    )


def make_target(name: str, coeffs=()) -> TargetGeometry:
    if name == "hyperbolic":
        return make_hyperbolic_target()
    if name == "flat":
        return make_flat_target()
    if name == "poly":
        return make_polynomial_target(coeffs)
    raise ValueError(f"unknown target {name!r}")


class ProblemMode(enum.Enum):
    """Which subsystem is evolved.

    FULL              - wave map + both metric functions, full nonlinearity.
    PROBLEM_I         - metric evolves, first-derivative coupling dropped.
    PROBLEM_I_SPECIAL - r pinned to R; Z evolves.
    PROBLEM_II        - Z pinned to 0; r evolves, transport terms kept.
    FREE              - flat metric, zero nonlinearity (pure 4+1 wave).
    """

    FULL = "full"
    PROBLEM_I = "problem1"
    PROBLEM_I_SPECIAL = "problem1special"
    PROBLEM_II = "problem2"
    FREE = "free"

    @classmethod
    def from_string(cls, s: str) -> "ProblemMode":
        key = s.strip().lower().replace("_", "").replace("-", "")
        table = {
            "full": cls.FULL,
            "problem1": cls.PROBLEM_I,
            "problemi": cls.PROBLEM_I,
            "problem1special": cls.PROBLEM_I_SPECIAL,
            "problemispecial": cls.PROBLEM_I_SPECIAL,
            "problem2": cls.PROBLEM_II,
            "problemii": cls.PROBLEM_II,
            "free": cls.FREE,
        }
        if key not in table:
            raise ValueError(f"unknown mode {s!r}")
        return table[key]

    @property
    def pins_r(self) -> bool:
        """r == R held exactly at all times."""
        return self in (ProblemMode.PROBLEM_I_SPECIAL, ProblemMode.FREE)

    @property
    def pins_z(self) -> bool:
        """Z == 0 held exactly at all times."""
        return self in (ProblemMode.PROBLEM_II, ProblemMode.FREE)


@dataclass(frozen=True)
class ProfileConfig:
    """Initial-data family for v = u/R.

    family "gaussian_bump": eps * exp(-((R-center)/width)^2),
    symmetrized to even parity about the axis.
    family "compact_bump": eps * exp(1 - 1/(1 - x^2)) with
    x = (R-center)/width, supported exactly on |x| < 1.
    velocity "time_symmetric" gives v_T = 0; "ingoing" gives the
    even velocity v_T = p'(R) + p'(-R) of the pulse moving toward
    the axis.
    """

    family: str = "gaussian_bump"
    center: float = 4.0
    width: float = 1.0
    amplitude: float = 1e-2
    velocity: str = "time_symmetric"


@dataclass(frozen=True)
class RunConfig:
    mode: ProblemMode = ProblemMode.FULL
    target_name: str = "hyperbolic"
    target_coeffs: tuple = ()
    r_max: float = 16.0
    n_points: int = 1024
    cfl: float = 0.25
    order: int = 4
    t_final: float = 4.0
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    diag_every: int = 8
    snap_every: int = 0
    seed: int = 0

    @property
    def amplitude(self) -> float:
        return self.profile.amplitude

    def target(self) -> TargetGeometry:
        return make_target(self.target_name, self.target_coeffs)

    @property
    def dr(self) -> float:
        return self.r_max / self.n_points

    @property
    def dt(self) -> float:
        return self.cfl * self.dr


def profile_support_radius(profile: ProfileConfig) -> float:
    """Outer radius beyond which the data is zero (to rounding).

    Compact bumps have exact support; the gaussian tail is below 1e-28
    of the peak past eight widths, which we treat as zero.
    """
    if profile.family == "compact_bump":
        return profile.center + profile.width
    return profile.center + 8.0 * profile.width


def validate_config(cfg: RunConfig) -> list[str]:
    """Collect invariant violations; empty list means the config is runnable.

    Validation never raises: the CLI turns a non-empty list into exit
    code 1, and tests assert on the messages.
    """
    violations = []
    if cfg.n_points < 16:
        violations.append(f"grid.n_points = {cfg.n_points}: n_points >= 16 required")
    if not (0.0 < cfg.cfl <= 1.0):
        violations.append(f"stepper.cfl = {cfg.cfl}: cfl out of range (0, 1]")
    if cfg.order not in (2, 4):
        violations.append(f"stepper.order = {cfg.order}: order must be 2 or 4")
    if cfg.r_max <= 0:
        violations.append(f"grid.r_max = {cfg.r_max}: must be positive")
    if cfg.t_final < 0:
        violations.append(f"run.t_final = {cfg.t_final}: must be nonnegative")
    if cfg.diag_every < 1:
        violations.append(f"run.diag_every = {cfg.diag_every}: must be >= 1")
    if cfg.profile.amplitude < 0:
        violations.append(
            f"profile.amplitude = {cfg.profile.amplitude}: amplitude >= 0 required"
        )
    if cfg.profile.family not in ("gaussian_bump", "compact_bump"):
        violations.append(f"profile.family = {cfg.profile.family!r}: unknown family")
    if cfg.profile.velocity not in ("time_symmetric", "ingoing"):
        violations.append(
            f"profile.velocity = {cfg.profile.velocity!r}: unknown velocity flag"
        )
    if cfg.profile.width <= 0:
        violations.append(f"profile.width = {cfg.profile.width}: must be positive")
    if cfg.profile.amplitude > 0:
        support = profile_support_radius(cfg.profile)
        if cfg.profile.center - profile_inner_margin(cfg.profile) < 0:
            violations.append(
                "profile support touches the axis: center - width must be >= 0"
            )
        if cfg.r_max < support + cfg.t_final:
            violations.append(
                "causal padding violated: grid.r_max = "
                f"{cfg.r_max} < support {support:g} + t_final {cfg.t_final:g}"
            )
    if cfg.target_name not in ("hyperbolic", "flat", "poly"):
        violations.append(f"target = {cfg.target_name!r}: unknown target")
    return violations


def profile_inner_margin(profile: ProfileConfig) -> float:
    if profile.family == "compact_bump":
        return profile.width
    return 0.0


# --- flat key-value config files -------------------------------------------
#
# Format: one "dotted.key = value" per line, '#' comments, UTF-8.  Every
# key has a CLI override flag of the same dotted name.

_CONFIG_SCHEMA: dict[str, Callable] = {
    "mode": str,
    "target": str,
    "target.coeffs": str,  # comma-separated floats
    "grid.r_max": float,
    "grid.n_points": int,
    "stepper.cfl": float,
    "stepper.order": int,
    "run.t_final": float,
    "run.diag_every": int,
    "run.snap_every": int,
    "profile.family": str,
    "profile.center": float,
    "profile.width": float,
    "profile.amplitude": float,
    "profile.velocity": str,
    "seed": int,
}


def config_schema_keys() -> list[str]:
    return list(_CONFIG_SCHEMA)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse the flat 'key = value' format into a raw string mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_SCHEMA:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        out[key] = value
    return out


def config_from_mapping(raw: dict[str, str]) -> RunConfig:
    """Build a RunConfig from raw string values; unknown keys rejected."""
    vals: dict[str, object] = {}
    for key, value in raw.items():
        if key not in _CONFIG_SCHEMA:
            raise ValueError(f"unknown config key {key!r}")
        vals[key] = _CONFIG_SCHEMA[key](value)

    profile = ProfileConfig(
        family=vals.get("profile.family", "gaussian_bump"),
        center=vals.get("profile.center", 4.0),
        width=vals.get("profile.width", 1.0),
        amplitude=vals.get("profile.amplitude", 1e-2),
        velocity=vals.get("profile.velocity", "time_symmetric"),
    )
    coeffs: tuple = ()
    if "target.coeffs" in vals:
        text = str(vals["target.coeffs"]).strip()
        if text:
            coeffs = tuple(float(tok) for tok in text.split(","))
    return RunConfig(
        mode=ProblemMode.from_string(vals.get("mode", "full")),
        target_name=vals.get("target", "hyperbolic"),
        target_coeffs=coeffs,
        r_max=vals.get("grid.r_max", 16.0),
        n_points=vals.get("grid.n_points", 1024),
        cfl=vals.get("stepper.cfl", 0.25),
        order=vals.get("stepper.order", 4),
        t_final=vals.get("run.t_final", 4.0),
        profile=profile,
        diag_every=vals.get("run.diag_every", 8),
        snap_every=vals.get("run.snap_every", 0),
        seed=vals.get("seed", 0),
    )


def load_config(path, overrides: dict[str, str] | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = parse_config_text(fh.read())
    if overrides:
        for key, value in overrides.items():
            if key not in _CONFIG_SCHEMA:
                raise ValueError(f"unknown override key {key!r}")
            raw[key] = value
    return config_from_mapping(raw)


def config_to_text(cfg: RunConfig) -> str:
    """Serialize in the same flat format parse_config_text reads."""
    lines = [
        f"mode = {cfg.mode.value}",
        f"target = {cfg.target_name}",
    ]
    if cfg.target_coeffs:
        lines.append("target.coeffs = " + ",".join(repr(c) for c in cfg.target_coeffs))
    lines += [
        f"grid.r_max = {cfg.r_max!r}",
        f"grid.n_points = {cfg.n_points}",
        f"stepper.cfl = {cfg.cfl!r}",
        f"stepper.order = {cfg.order}",
        f"run.t_final = {cfg.t_final!r}",
        f"run.diag_every = {cfg.diag_every}",
        f"run.snap_every = {cfg.snap_every}",
        f"profile.family = {cfg.profile.family}",
        f"profile.center = {cfg.profile.center!r}",
        f"profile.width = {cfg.profile.width!r}",
        f"profile.amplitude = {cfg.profile.amplitude!r}",
        f"profile.velocity = {cfg.profile.velocity}",
        f"seed = {cfg.seed}",
    ]
    return "\n".join(lines) + "\n"


def with_overrides(cfg: RunConfig, **kwargs) -> RunConfig:
    """dataclasses.replace that tolerates profile.* shortcuts."""
    profile_updates = {
        k[len("profile_"):]: kwargs.pop(k)
        for k in list(kwargs)
        if k.startswith("profile_")
    }
    if profile_updates:
        kwargs["profile"] = replace(cfg.profile, **profile_updates)
    return replace(cfg, **kwargs)
