"""Kernel models."""

from enum import Enum
from typing import Optional

import numpy as np
from pydantic import field_validator, model_validator

from app.models.base import DomainModel, frozen_matrix


class KernelKind(str, Enum):
    """Kernels available for Gram matrices."""
    LINEAR = "linear"
    RBF = "rbf"


class GramMatrix(DomainModel):
    """Symmetric n×n matrix of pairwise kernel evaluations."""

    values: np.ndarray
    kernel: KernelKind
    sigma: Optional[float] = None
    centered: bool = False

    @field_validator("values", mode="before")
    @classmethod
    def _freeze_values(cls, value):
        return frozen_matrix(value)

    @model_validator(mode="after")
    def _check_invariants(self) -> "GramMatrix":
        values = self.values
        n, m = values.shape
        if n != m:
            raise ValueError(f"Gram matrix must be square, got {n}x{m}")
        scale = float(np.max(np.abs(values))) if values.size else 0.0
        if not np.allclose(values, values.T, rtol=0.0, atol=1e-10 * max(scale, 1e-300)):
            raise ValueError("Gram matrix is not symmetric")
        if self.kernel == KernelKind.RBF:
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("RBF Gram matrix requires a positive sigma")
        elif self.sigma is not None:
            raise ValueError("sigma only applies to RBF Gram matrices")
        return self

    @property
    def n(self) -> int:
        return self.values.shape[0]
