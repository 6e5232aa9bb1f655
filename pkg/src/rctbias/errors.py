"""Exception types shared across the package."""


class RctBiasError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(RctBiasError, ValueError):
    """A configuration object violates one of its declared bounds."""


class DomainError(RctBiasError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SamplingError(RctBiasError, ValueError):
    """An annotation or subsampling request cannot be satisfied."""


class EstimationError(RctBiasError, ValueError):
    """An estimator received data it cannot produce an estimate from."""


class InfeasibleError(RctBiasError, ValueError):
    """A requested construction is infeasible for the given data."""


class TrainingError(RctBiasError, RuntimeError):
    """Model training failed (divergence or unusable training data)."""


class IdxFormatError(RctBiasError, ValueError):
    """An IDX file is malformed (bad magic, truncation, count mismatch)."""
