"""Planted-structure parameters for synthetic activation sets."""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.activation import MIN_EXAMPLES, Family


class SensitivityTag(str, Enum):
    """Which input structure a synthetic layer reads."""
    SPATIAL = "spatial"
    TEMPORAL = "temporal"
    NONE = "none"


class PlantedSpec(BaseModel):
    """Recipe for a synthetic activation set with known structure.

    ``block_boundaries`` uses the partition convention: last layer position of
    every block except the final one.
    """

    model_config = ConfigDict(frozen=True)

    n_examples: int = Field(default=128, ge=MIN_EXAMPLES)
    feature_dim: int = Field(default=16, ge=1)
    layer_count: int = Field(default=8, ge=1)
    block_boundaries: List[int] = Field(default_factory=list)
    noise_sigma: float = Field(default=0.0, ge=0)
    seed: int = 0
    sensitivity_tags: Optional[List[SensitivityTag]] = None
    model_id: str = "planted"
    family: Family = Family.PHYSNET3DCNN

    @model_validator(mode="after")
    def _check_partition(self) -> "PlantedSpec":
        edges = [0, *self.block_boundaries, self.layer_count]
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("block boundaries must partition 1..layer_count")
        if self.sensitivity_tags is not None and len(self.sensitivity_tags) != self.layer_count:
            raise ValueError("sensitivity_tags needs one entry per layer")
        return self

    @property
    def blocks(self) -> List[range]:
        """0-based layer positions per block."""
        edges = [0, *self.block_boundaries, self.layer_count]
        return [range(a, b) for a, b in zip(edges, edges[1:])]
