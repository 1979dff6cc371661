"""Engine error hierarchy.

Every error carries a machine-readable ``kind`` and the process exit code the
command line uses for it. User and input problems exit with 2; anything not
derived from :class:`CkaRefineError` is treated as internal and exits with 1.
"""

from typing import Any, Dict

INTERNAL_EXIT_CODE = 1


class CkaRefineError(Exception):
    """Base class for all engine errors."""

    kind: str = "error"
    exit_code: int = 2

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> Dict[str, Any]:
        """Return a JSON-serializable description of the error."""
        return {"kind": self.kind, "message": self.message, **self.context}


class FormatError(CkaRefineError):
    """Malformed array file."""

    kind = "format"


class UnsupportedError(CkaRefineError):
    """Array file uses a dtype, order or version outside the supported set."""

    kind = "unsupported"


class DataError(CkaRefineError):
    """Non-finite or otherwise unusable values."""

    kind = "data"


class ShapeError(CkaRefineError):
    """Array rank or dimensions do not fit the operation."""

    kind = "shape"


class StoreIOError(CkaRefineError):
    """File could not be read or written."""

    kind = "io"


class ManifestError(CkaRefineError):
    """Manifest document is invalid."""

    kind = "manifest"


class ConsistencyError(CkaRefineError):
    """Layers of one activation set disagree with each other."""

    kind = "consistency"


class DegenerateBandwidthError(CkaRefineError):
    """Median pairwise distance is zero, so no RBF bandwidth exists."""

    kind = "degenerate_bandwidth"


class InsufficientSamplesError(CkaRefineError):
    """Too few examples for the requested estimator."""

    kind = "insufficient_samples"


class DegenerateRepresentationError(CkaRefineError):
    """A representation has zero self-dependence (e.g. constant features)."""

    kind = "degenerate_representation"


class AlignmentError(CkaRefineError):
    """Two activation sets were not evaluated on the same examples."""

    kind = "alignment"


class AggregationError(CkaRefineError):
    """Similarity matrices cannot be averaged together."""

    kind = "aggregation"


class ArgumentError(CkaRefineError):
    """An argument is outside its documented range."""

    kind = "argument"


class ArchValidationError(CkaRefineError):
    """Architecture descriptor violates its family rules."""

    kind = "validation"


class UsageError(CkaRefineError):
    """Command line used incorrectly."""

    kind = "usage"
