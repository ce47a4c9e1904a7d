"""Exception hierarchy.

Everything a caller might want to catch as "the numerics gave up" derives
from :class:`NumericError`; the CLI maps it to exit code 3.
"""


class NumericError(Exception):
    """Base class for recoverable numerical failures."""


class DegenerateInput(NumericError):
    """Point set is (numerically) not in general position."""


class OriginOutside(NumericError):
    """The origin is not an interior point of the polytope."""


class OutOfRange(NumericError, ValueError):
    """A parameter lies outside the domain of the requested quantity."""


class IllConditioned(NumericError):
    """A least-squares system is too badly conditioned to trust."""


class TooSmallCone(NumericError):
    """Rejection sampling of subspaces has vanishing acceptance rate."""


class NonPositive(NumericError, ValueError):
    """A log-log fit was handed a non-positive ordinate."""
