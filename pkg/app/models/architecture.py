"""Architecture descriptor models for the PhysNet-3DCNN and TS-CAN families."""

from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field

from app.models.activation import Family


class LayerOp(str, Enum):
    """Layer operation kinds."""
    CONV3D = "conv3d"
    CONV2D = "conv2d"
    TSM_CONV2D = "tsm_conv2d"
    ATTENTION_MIX = "attention_mix"


class Branch(str, Enum):
    """TS-CAN branch tag; None for single-path families."""
    DIFF = "diff"
    RAW = "raw"
    MIX = "mix"


class PoolKind(str, Enum):
    """Pooling kinds."""
    MAX = "max"
    AVG = "avg"


class Follower(BaseModel):
    """Normalization, activation or dropout step following a layer."""

    model_config = ConfigDict(frozen=True)

    kind: str  # batch_norm | relu | tanh | sigmoid | dropout
    p: Optional[float] = None


class LayerSpec(BaseModel):
    """One convolution and the steps that follow it."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(ge=1)
    name: str
    op: LayerOp
    kernel: Tuple[int, ...]
    in_channels: int = Field(gt=0)
    out_channels: int = Field(gt=0)
    padding: Tuple[int, ...]
    meta_layer: Optional[int] = None
    branch: Optional[Branch] = None
    followers: List[Follower] = Field(default_factory=list)

    @property
    def has_batch_norm(self) -> bool:
        return any(f.kind == "batch_norm" for f in self.followers)


class PoolingSpec(BaseModel):
    """Spatial pooling after a layer (3DCNN) or meta-layer (TS-CAN)."""

    model_config = ConfigDict(frozen=True)

    index: int
    stride: int
    kind: PoolKind


class ArchInput(BaseModel):
    """Input geometry."""

    model_config = ConfigDict(frozen=True)

    spatial: int = 64
    frames: int
    channels: int = 3


class ArchDescriptor(BaseModel):
    """Declarative flexible-depth architecture definition."""

    model_config = ConfigDict(frozen=True)

    family: Family
    depth: int
    input: ArchInput
    layers: List[LayerSpec]
    pooling: List[PoolingSpec]

    @computed_field  # type: ignore[misc]
    @property
    def output_spatial(self) -> int:
        """Final spatial resolution after every convolution and pooling."""
        size = self.input.spatial
        pools = {p.index: p.stride for p in self.pooling}
        if self.family == Family.PHYSNET3DCNN:
            for layer in self.layers:
                if layer.index in pools:
                    size //= pools[layer.index]
            return size
        for meta in range(1, self.depth + 1):
            size -= 2  # second conv of each branch is unpadded
            if meta in pools:
                size //= pools[meta]
        return size


class Violation(BaseModel):
    """One broken descriptor rule."""

    model_config = ConfigDict(frozen=True)

    rule: str
    message: str
    index: Optional[int] = None
