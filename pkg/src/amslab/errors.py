"""Exception hierarchy shared by all modules."""


class AmslabError(Exception):
    """Base class for all errors raised by this package."""


class GridMismatchError(AmslabError):
    """Two objects live on different grids or have incompatible shapes."""


class MarginError(AmslabError):
    """A source touches the two protected slices at either end of the grid."""


class GeometryError(AmslabError):
    """Region layout violates a causal admissibility requirement."""


class SynthesisError(AmslabError):
    """A scheme ingredient could not be constructed (e.g. probe solution too small)."""


class PlanningError(AmslabError):
    """No trial count can meet the requested tolerance at this coupling."""


class StatisticalError(AmslabError):
    """A statistical acceptance check failed."""
