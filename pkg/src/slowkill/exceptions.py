class SlowKillError(Exception):
    """Base class for errors raised by slowkill."""


class DimensionError(SlowKillError, ValueError):
    """Array shapes are inconsistent with each other or with the problem."""


class ResponseDomainError(SlowKillError, ValueError):
    """Response values are outside the domain the loss accepts."""


class TieAtQuantileError(SlowKillError, ValueError):
    """The q-th and (q+1)-th magnitudes coincide and are nonzero."""


class InadmissibleModelError(SlowKillError, ValueError):
    """A model violates the admissibility constraint of the scale-free criterion."""


class NonpositiveRssError(SlowKillError, ValueError):
    """Residual sum of squares is zero (interpolating fit)."""


class NonFiniteError(SlowKillError, FloatingPointError):
    """A gradient or objective evaluation produced inf or nan."""
