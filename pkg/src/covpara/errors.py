"""Exception types shared across the toolkit."""


class CovparaError(Exception):
    """Base class for all toolkit errors."""


class CorpusError(CovparaError):
    """Manifest or rating problems (parse errors, bounds, duplicates)."""


class AudioError(CovparaError):
    """Unsupported or corrupt audio input."""


class DspError(CovparaError):
    """Feature-extraction precondition failures."""


class PoolingError(CovparaError):
    """Covariance pooling precondition failures."""


class PcaError(CovparaError):
    """PCA fitting / projection errors."""


class ModelError(CovparaError):
    """Regressor fitting or prediction errors."""


class FusionError(CovparaError):
    """Fusion spec or member resolution errors."""


class EvalError(CovparaError):
    """Evaluation protocol errors."""


class LeakageError(EvalError):
    """A test utterance was visible at fit time."""


class UndefinedCorrelationError(EvalError):
    """Rank correlation is undefined (constant input)."""


class ConfigError(CovparaError):
    """Experiment configuration is invalid or inconsistent."""


class FormatError(CovparaError):
    """Serialized artifact is malformed or has the wrong version."""
