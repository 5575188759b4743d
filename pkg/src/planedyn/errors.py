"""Exception hierarchy shared by all planedyn modules."""


class PlaneDynError(Exception):
    """Base class for every error raised by planedyn."""


class NonFinite(PlaneDynError, ValueError):
    pass


class DegenerateOverlap(PlaneDynError):
    """Two segments are collinear (or parallel within 1e-12 rad) and overlap."""


class SelfIntersection(PlaneDynError, ValueError):
    pass


class Inconclusive(PlaneDynError):
    """A parity decision could not be made inside the sampled window."""


class Overflow(PlaneDynError, OverflowError):
    pass


class BudgetExceeded(PlaneDynError):
    pass


class NonPositiveW(PlaneDynError):
    def __init__(self, value, message=None):
        self.value = value
        super().__init__(message or f"second difference W={value!r} is not positive")


class ProbeFailed(PlaneDynError):
    pass


class EmptyComponent(PlaneDynError):
    pass


class LeafLost(PlaneDynError):
    pass


class InvariantLeaf(PlaneDynError):
    pass


class BoundariesCross(PlaneDynError):
    pass


class NotConverging(PlaneDynError):
    pass


class ChartDegenerate(PlaneDynError):
    pass


class ConfigError(PlaneDynError, ValueError):
    pass
