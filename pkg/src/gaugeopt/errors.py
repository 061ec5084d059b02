"""Exception hierarchy shared across the package."""


class GaugeoptError(Exception):
    """Base class for domain errors raised by this package."""


class RankDeficientError(GaugeoptError):
    """A matrix expected to have full (row/column) rank does not."""


class NotInteriorError(GaugeoptError):
    """A point that must lie strictly inside a polytope touches or leaves it."""


class EmptyInteriorError(GaugeoptError):
    """The feasible set has no strictly interior point."""


class InfeasibleError(GaugeoptError):
    """The constraint set is empty."""


class UnboundedError(GaugeoptError):
    """The optimization problem is unbounded below."""


class PredictionMissError(GaugeoptError):
    """A learned phase-one model failed to certify a strict interior point."""


class EnumerationCapError(GaugeoptError):
    """Basis enumeration would exceed its subset cap; use another finder."""


class NumericalError(GaugeoptError):
    """An iterative solver exceeded its pivot/iteration budget or lost precision."""


class CheckpointError(GaugeoptError):
    """A model checkpoint is corrupt or has an unsupported version."""


class TrainingDivergedError(GaugeoptError):
    """Training produced a non-finite loss."""
