"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage/shape/vocabulary problems exit 1,
numeric failures exit 2, estimator/AED hash mismatches exit 3.
"""


class IlmfError(Exception):
    """Base class for all package errors."""


class UsageError(IlmfError):
    """API misuse: bad arguments, freed graphs, missing inputs."""


class ShapeError(IlmfError):
    """Tensor shapes inconsistent with the operation."""


class NumericError(IlmfError):
    """NaN/Inf encountered where finite values are required."""


class VocabularyError(IlmfError):
    """Token index outside the model vocabulary."""


class EmptySourceError(IlmfError):
    """An operation requiring at least one source frame got none."""


class BindingError(IlmfError):
    """Estimator bound to a different AED checkpoint than supplied."""
