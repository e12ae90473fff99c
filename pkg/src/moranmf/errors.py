"""Exception types raised across the package."""


class MoranError(Exception):
    """Base class for all package errors."""


class ScheduleError(MoranError):
    """A level schedule cannot cover the requested level."""


class InfeasibleParameters(MoranError, ValueError):
    """Model parameters violate a hard constraint."""


class PointNotCovered(MoranError, ValueError):
    """A real point lies in a gap of the construction.

    ``level`` is the first level at which no cylinder contains the point;
    the point was still covered at ``level - 1``.
    """

    def __init__(self, x, level):
        self.x = x
        self.level = level
        super().__init__(
            f"point not in level-{level} union (x={x!r}, deepest covering level {level - 1})"
        )


class AddressTooShort(MoranError, ValueError):
    """A digit address is too shallow to decide a geometric question."""


class OutOfRange(MoranError, ValueError):
    """A local-dimension value lies outside the admissible interval."""


class NoTangency(MoranError, ValueError):
    """No admissible tangent line exists for the requested anchor point."""
