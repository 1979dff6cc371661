"""Base models for domain entities."""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict


class DomainModel(BaseModel):
    """Immutable domain entity.

    Entities may hold numpy arrays; arrays are frozen (made read-only) on
    validation so a constructed entity can be shared across workers.
    """

    model_config = ConfigDict(
        frozen=True,
        arbitrary_types_allowed=True,
        use_enum_values=False
    )


def frozen_matrix(value: Any, name: str = "values") -> np.ndarray:
    """Coerce to a read-only float64 matrix.

    Raises:
        ValueError: If the value is not two-dimensional or holds non-finite
            entries (pydantic turns this into a validation error).
    """
    array = np.array(value, dtype=np.float64, copy=True)
    if array.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got {array.ndim} axes")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite values")
    array.flags.writeable = False
    return array
