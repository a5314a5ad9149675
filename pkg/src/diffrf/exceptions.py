class DiffRFError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(DiffRFError, ValueError):
    """Invalid hyper-parameters or incompatible sizes."""


class InputError(DiffRFError, ValueError):
    """Malformed input data (shape, non-finite values, labels)."""


class UndefinedMetricError(DiffRFError, ValueError):
    """A metric is undefined for the given labels (e.g. a single class)."""


class ModelFileError(DiffRFError):
    """Base class for model persistence failures."""


class CorruptModelError(ModelFileError):
    """The model file is truncated, unparsable or violates tree invariants."""


class ModelVersionError(ModelFileError):
    """The model file was written by an unsupported format version."""
