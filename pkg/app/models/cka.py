"""CKA configuration model."""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.kernel import KernelKind


class Estimator(str, Enum):
    """HSIC estimators."""
    BIASED = "biased"
    UNBIASED = "unbiased"


class CkaConfig(BaseModel):
    """How a CKA score is computed.

    Defaults to the linear kernel with the unbiased estimator, which is less
    sensitive to feature-count disparities between wide convolutional layers.
    """

    model_config = ConfigDict(frozen=True)

    kernel: KernelKind = KernelKind.LINEAR
    estimator: Estimator = Estimator.UNBIASED
    sigma_frac: float = Field(default=1.0, gt=0)
    minibatch_size: Optional[int] = Field(default=None, ge=4)

    @model_validator(mode="after")
    def _minibatch_requires_unbiased(self) -> "CkaConfig":
        if self.minibatch_size is not None and self.estimator != Estimator.UNBIASED:
            raise ValueError("minibatch CKA requires the unbiased estimator")
        return self

    def describe(self) -> str:
        """Single-line description used in report headers."""
        parts = [f"kernel={self.kernel.value}", f"estimator={self.estimator.value}"]
        if self.kernel == KernelKind.RBF:
            parts.append(f"sigma_frac={self.sigma_frac:.9g}")
        parts.append(f"minibatch={self.minibatch_size if self.minibatch_size else 'none'}")
        return " ".join(parts)
