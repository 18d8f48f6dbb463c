"""Exception types shared across the package."""


class PnnclrError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(PnnclrError):
    """Operands have incompatible dimensions."""


# shape errors on batched/matrix inputs are the same failure mode
ShapeMismatch = DimensionMismatch


class ZeroVector(PnnclrError):
    """A vector with (numerically) zero norm reached a normalization point."""


class NotNormalized(PnnclrError):
    """An embedding failed the unit-norm check at an API boundary."""


class EmptySupportSet(PnnclrError):
    """Nearest-neighbor lookup on an empty queue."""


class MissingLabels(PnnclrError):
    """A label-dependent diagnostic was requested on unlabeled entries."""


class NonFinite(PnnclrError):
    """NaN/Inf appeared in an activation, loss, or gradient."""


class EmptySplit(PnnclrError):
    """A train/test split produced an empty side."""


class ClassTooSmall(PnnclrError):
    """A class has too few items to survive a stratified split."""


class InvalidSpec(PnnclrError):
    """A population spec violates its invariants."""


class FormatViolation(PnnclrError):
    """A binary file failed magic/length validation."""


class ConfigError(PnnclrError):
    """Base class for run-configuration errors."""


class UnknownKey(ConfigError):
    """Config contains a key that is not a known hyperparameter."""


class ConfigTypeError(ConfigError):
    """Config value has the wrong type for its key."""


class ConfigRangeError(ConfigError):
    """Config value is outside the legal range for its key."""
