"""Similarity matrix models."""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.activation import ActivationSet, Family, TransformTag
from app.models.base import DomainModel, frozen_matrix
from app.models.cka import CkaConfig


class ModelMeta(BaseModel):
    """Identifies the model behind one axis of a similarity matrix."""

    model_config = ConfigDict(frozen=True)

    model_id: str
    family: Family
    depth: int
    fold: Optional[int] = None  # None once folds are averaged
    transform_tag: TransformTag = TransformTag.NONE
    layer_indices: List[int]
    layer_names: List[str] = Field(default_factory=list)
    examples_hash: Optional[str] = None

    @classmethod
    def from_activation_set(cls, aset: ActivationSet) -> "ModelMeta":
        return cls(
            model_id=aset.model_id,
            family=aset.family,
            depth=aset.depth,
            fold=aset.fold,
            transform_tag=aset.transform_tag,
            layer_indices=aset.layer_indices,
            layer_names=aset.layer_names,
            examples_hash=aset.examples_hash
        )

    def same_model_modulo_fold(self, other: "ModelMeta") -> bool:
        return (
            self.family == other.family
            and self.depth == other.depth
            and self.transform_tag == other.transform_tag
            and self.layer_indices == other.layer_indices
        )

    def describe(self) -> str:
        fold = "avg" if self.fold is None else str(self.fold)
        return (
            f"{self.model_id} family={self.family.value} depth={self.depth} "
            f"fold={fold} transform={self.transform_tag.value}"
        )


class SimilarityMatrix(DomainModel):
    """L_A × L_B grid of CKA values between two layer sequences."""

    values: np.ndarray
    row_model: ModelMeta
    col_model: ModelMeta
    config: CkaConfig
    folds_averaged: int = Field(default=1, ge=1)

    @field_validator("values", mode="before")
    @classmethod
    def _freeze_values(cls, value):
        return frozen_matrix(value)

    @model_validator(mode="after")
    def _check_shape(self) -> "SimilarityMatrix":
        rows, cols = self.values.shape
        if rows != len(self.row_model.layer_indices):
            raise ValueError("row count does not match row model layers")
        if cols != len(self.col_model.layer_indices):
            raise ValueError("column count does not match column model layers")
        return self

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def is_square(self) -> bool:
        rows, cols = self.values.shape
        return rows == cols

    def transpose(self) -> "SimilarityMatrix":
        return SimilarityMatrix(
            values=self.values.T,
            row_model=self.col_model,
            col_model=self.row_model,
            config=self.config,
            folds_averaged=self.folds_averaged
        )


class ComparisonGrid(DomainModel):
    """One reference model compared against several others."""

    reference: ModelMeta
    cells: List[SimilarityMatrix]

    @model_validator(mode="after")
    def _check_rows(self) -> "ComparisonGrid":
        expected = len(self.reference.layer_indices)
        for cell in self.cells:
            if cell.values.shape[0] != expected:
                raise ValueError(
                    f"cell for {cell.col_model.model_id} has {cell.values.shape[0]} rows, "
                    f"expected {expected}"
                )
        return self
