"""Exception hierarchy shared across the package."""


class MemrisimError(Exception):
    """Base class for all package-specific errors."""


class DegenerateInput(MemrisimError):
    """Input has too few points or no variance to support the operation."""


class NotPsd(MemrisimError):
    """Covariance matrix has an eigenvalue below the PSD tolerance."""


class OutOfRange(MemrisimError):
    """Value falls outside the evaluable or calibrated range."""


class NonPositiveCurrent(MemrisimError):
    """Curve contains non-positive currents at positive voltage."""


class InsufficientStates(MemrisimError):
    """Not enough resistance states per region to fit trends."""


class ConflictingSpecs(MemrisimError):
    """Nonideality composition contains incompatible entries."""


class ZeroWeightRange(MemrisimError):
    """Weight magnitude bound is zero; conductance scaling undefined."""


class WeightOutOfRange(MemrisimError):
    """Weight exceeds the magnitude the mapping was scaled for."""


class NegativeWeight(MemrisimError):
    """Double-weight mapping received a negative entry."""


class DimensionMismatch(MemrisimError):
    """Array shapes are inconsistent."""


class ShapeMismatch(MemrisimError):
    """Optimizer state and gradients have different shapes."""


class ZeroPower(MemrisimError):
    """Average power must be positive to compute efficiency."""


class MissingCache(MemrisimError):
    """Backward pass requested without a stored forward cache."""


class ConfigError(MemrisimError):
    """Experiment configuration is invalid or references unknown ids."""


class IncompatibleMapping(MemrisimError):
    """Checkpoint weight mode is incompatible with the requested mapping."""


class MissingCheckpoint(MemrisimError):
    """A required trained checkpoint was not found."""


class BadMagic(MemrisimError):
    """IDX file does not start with the expected magic number."""


class TruncatedFile(MemrisimError):
    """File ends before the declared payload."""


class CountMismatch(MemrisimError):
    """Image and label files declare different example counts."""


class ParseError(MemrisimError):
    """Malformed text input; carries file and line context."""


class SchemaVersionMismatch(MemrisimError):
    """Persisted file was written by an unknown schema version."""
