"""Exception hierarchy shared by every stcx component."""


class StcxError(Exception):
    """Base class for all stcx failures."""


class ShapeError(StcxError, ValueError):
    """Tensor extents do not satisfy an operation's contract."""


class EmptyContextError(ShapeError):
    """Attention was asked to attend over zero context tokens."""


class ConfigurationError(StcxError, ValueError):
    """A run plan, dimension set or variant flag is invalid."""


class InvalidBoxError(StcxError, ValueError):
    """An actor box is malformed or collapses to zero area on the feature grid."""


class GradientCheckError(StcxError):
    """Finite-difference evaluation produced a non-finite value."""


class TrainingDivergenceError(StcxError):
    """Loss or gradients became non-finite during optimisation."""


class EvaluationError(StcxError):
    """Detection evaluation cannot produce a meaningful result."""


class CheckpointError(StcxError):
    """A checkpoint file is malformed or incompatible with the run plan."""


class DatasetError(StcxError):
    """An on-disk dataset is missing or malformed."""
