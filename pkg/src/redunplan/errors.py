"""Exception hierarchy shared by the planner modules."""


class RedunplanError(Exception):
    """Base class for all planner errors."""


class ModelError(RedunplanError):
    """Robot, scene or task description is invalid or unsupported."""


class RepresentationSingularity(RedunplanError):
    """Euler extraction at a degenerate second angle."""


class SingularConfiguration(RedunplanError):
    """A stiffness measure is undefined at the configuration."""


class UnreachableTask(RedunplanError):
    """Some waypoint has no admissible node on the grid."""


class NoFeasiblePath(RedunplanError):
    """The forward pass reached no admissible terminal node."""


class InstanceTooLarge(RedunplanError):
    """Brute-force enumeration refused by its size guard."""


class FixedSlideInfeasible(RedunplanError):
    """The fixed-slide baseline has no admissible branch at some waypoint."""

    def __init__(self, message, waypoint=None):
        super().__init__(message)
        self.waypoint = waypoint
