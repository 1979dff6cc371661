"""Frame-clip and transformation-set models."""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.activation import TransformTag
from app.models.base import DomainModel


class Clip(DomainModel):
    """Frame sequence shaped T×C×H×W with values in [0, 1]."""

    frames: np.ndarray
    frame_rate: float = Field(default=30.0, gt=0)

    @field_validator("frames", mode="before")
    @classmethod
    def _freeze_frames(cls, value):
        array = np.array(value, dtype=np.float64, copy=True)
        if array.ndim != 4:
            raise ValueError(f"clip frames must be T×C×H×W, got {array.ndim} axes")
        if array.shape[0] < 2:
            raise ValueError("clip needs at least two frames")
        if not np.all(np.isfinite(array)):
            raise ValueError("clip contains non-finite values")
        if array.min() < 0.0 or array.max() > 1.0:
            raise ValueError("clip values must lie in [0, 1]")
        array.flags.writeable = False
        return array

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def with_frames(self, frames: np.ndarray) -> "Clip":
        return Clip(frames=frames, frame_rate=self.frame_rate)


class TransformSpec(BaseModel):
    """Parameters of one transformation set.

    Defaults are arbitrary; no reference values exist for them.
    """

    model_config = ConfigDict(frozen=True)

    tag: TransformTag = TransformTag.NONE
    seed: int = 0
    flip_prob: float = Field(default=0.5, ge=0, le=1)
    illum_amplitude: float = Field(default=0.1, ge=0)
    blur_sigma: float = Field(default=1.0, ge=0)
    speed_base: float = Field(default=1.25, gt=0)
    speed_mod_amplitude: float = Field(default=0.25, ge=0)
    speed_mod_freq: float = Field(default=0.5, ge=0)

    @model_validator(mode="after")
    def _speed_stays_positive(self) -> "TransformSpec":
        if self.speed_base - self.speed_mod_amplitude <= 0:
            raise ValueError("speed_base must exceed speed_mod_amplitude")
        return self

    @property
    def has_spatial(self) -> bool:
        return self.tag in (TransformTag.SPATIAL, TransformTag.ALL)

    @property
    def has_temporal(self) -> bool:
        return self.tag in (TransformTag.TEMPORAL, TransformTag.ALL)
