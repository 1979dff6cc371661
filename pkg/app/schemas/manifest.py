"""Activation manifest schema."""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.models.activation import Family, FlattenMode, TransformTag
from app.models.transform import TransformSpec

MANIFEST_NAME = "manifest.json"


class ManifestLayer(BaseModel):
    """One layer entry of a manifest.

    ``shape`` is the shape of the stored array. When the array was already
    flattened before storage, ``flatten`` names the mode used and
    ``source_shape`` keeps the original axis lengths.
    """

    model_config = ConfigDict(extra="forbid")

    index: int = Field(ge=1)
    name: str = Field(min_length=1)
    file: str = Field(min_length=1)
    shape: List[int] = Field(min_length=1, max_length=5)
    flatten: Optional[FlattenMode] = None
    source_shape: Optional[List[int]] = None


class ActivationManifest(BaseModel):
    """Manifest document describing one activation set on disk."""

    model_config = ConfigDict(extra="forbid")

    model_id: str = Field(min_length=1)
    family: Family
    depth: int = Field(ge=1)
    fold: int = Field(default=0, ge=0)
    transform: TransformTag = TransformTag.NONE
    layers: List[ManifestLayer] = Field(min_length=1)
    examples_hash: Optional[str] = None
    dataset: Optional[str] = None
    transform_spec: Optional[TransformSpec] = None
