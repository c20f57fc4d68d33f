"""Failure types shared across the simulator.

Every numerical failure carries enough context (time, step, radius) to
locate the first bad sample; the policy everywhere is fail fast, never
clamp silently.
"""


class SimulationError(Exception):
    """Base class for all numerical failures."""


class NonPositiveRadius(SimulationError):
    """Area radius r dropped to <= 0 away from the axis.

    For initial data this signals that the profile is too strong for the
    constraint ODE; during evolution it signals collapse of the radial
    gauge. Either way the run cannot continue.
    """

    def __init__(self, message, *, time=None, radius=None):
        super().__init__(message)
        self.time = time
        self.radius = radius


class NonConvergence(SimulationError):
    """The constraint ODE integration failed its step-doubling tolerance."""

    def __init__(self, message, *, estimate=None, tolerance=None):
        super().__init__(message)
        self.estimate = estimate
        self.tolerance = tolerance


class NanDetected(SimulationError):
    """A non-finite value appeared in an evolved field."""

    def __init__(self, message, *, time=None, step=None, field=None):
        super().__init__(message)
        self.time = time
        self.step = step
        self.field = field


class QuadratureFailure(SimulationError):
    """An adaptive quadrature could not meet its tolerance."""

    def __init__(self, message, *, estimate=None, tolerance=None):
        super().__init__(message)
        self.estimate = estimate
        self.tolerance = tolerance
