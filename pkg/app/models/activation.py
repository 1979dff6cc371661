"""Activation data models."""

from enum import Enum
from math import prod
from typing import List, Optional, Tuple

import numpy as np
from pydantic import Field, field_validator, model_validator

from app.models.base import DomainModel, frozen_matrix

# Unbiased HSIC needs at least four examples
MIN_EXAMPLES = 4


class Family(str, Enum):
    """Architecture families whose activations are analyzed."""
    PHYSNET3DCNN = "physnet3dcnn"
    TSCAN = "tscan"


class TransformTag(str, Enum):
    """Transformation set applied to the inputs that produced activations."""
    NONE = "none"
    SPATIAL = "spatial"
    TEMPORAL = "temporal"
    ALL = "all"


class FlattenMode(str, Enum):
    """How multi-axis activations become example-by-feature matrices."""
    FLATTEN_ALL = "flatten_all"
    SPATIAL_MEAN = "spatial_mean"


class LayerActivations(DomainModel):
    """Activations of one layer: rows are examples, columns are features."""

    layer_index: int = Field(ge=1)
    layer_name: str
    data: np.ndarray
    source_shape: Tuple[int, ...]
    mode: FlattenMode = FlattenMode.FLATTEN_ALL

    @field_validator("data", mode="before")
    @classmethod
    def _freeze_data(cls, value):
        return frozen_matrix(value, "data")

    @model_validator(mode="after")
    def _check_feature_count(self) -> "LayerActivations":
        n, p = self.data.shape
        if p < 1:
            raise ValueError("layer must have at least one feature")
        if len(self.source_shape) < 2:
            raise ValueError("source_shape must include the example axis and features")
        if self.source_shape[0] != n:
            raise ValueError(
                f"source_shape example axis {self.source_shape[0]} != data rows {n}"
            )
        if self.mode == FlattenMode.FLATTEN_ALL:
            expected = prod(self.source_shape[1:])
        else:
            expected = self.source_shape[1]
        if p != expected:
            raise ValueError(f"feature count {p} does not match source_shape ({expected})")
        return self

    @property
    def n_examples(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]


class ActivationSet(DomainModel):
    """One trained model's per-layer activations plus identifying metadata."""

    model_id: str = Field(min_length=1)
    family: Family
    depth: int = Field(ge=1)
    fold: int = Field(default=0, ge=0)
    transform_tag: TransformTag = TransformTag.NONE
    layers: List[LayerActivations]
    examples_hash: Optional[str] = None
    dataset: Optional[str] = None

    @model_validator(mode="after")
    def _check_layers(self) -> "ActivationSet":
        if not self.layers:
            raise ValueError("activation set has no layers")
        indices = [layer.layer_index for layer in self.layers]
        if indices[0] != 1:
            raise ValueError("layer indices must start at 1")
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("layer indices must be strictly increasing")
        counts = {layer.n_examples for layer in self.layers}
        if len(counts) != 1:
            raise ValueError(f"layers disagree on example count: {sorted(counts)}")
        if self.n_examples < MIN_EXAMPLES:
            raise ValueError(
                f"activation set needs at least {MIN_EXAMPLES} examples, got {self.n_examples}"
            )
        return self

    @property
    def n_examples(self) -> int:
        return self.layers[0].n_examples

    @property
    def layer_indices(self) -> List[int]:
        return [layer.layer_index for layer in self.layers]

    @property
    def layer_names(self) -> List[str]:
        return [layer.layer_name for layer in self.layers]
