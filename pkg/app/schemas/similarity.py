"""HTTP request and response schemas."""

from typing import List, Optional

from pydantic import BaseModel, Field

from app.models.activation import FlattenMode
from app.models.architecture import ArchDescriptor, Violation
from app.models.cka import CkaConfig
from app.models.similarity import ModelMeta, SimilarityMatrix


class CkaRequest(BaseModel):
    """Two inline representations of the same examples."""

    x: List[List[float]] = Field(min_length=2)
    y: List[List[float]] = Field(min_length=2)
    config: CkaConfig = Field(default_factory=CkaConfig)


class CkaResponse(BaseModel):
    cka: float
    n_examples: int
    config: CkaConfig


class SelfSimilarityRequest(BaseModel):
    """Self-similarity of an activation set stored on the server.

    ``manifest`` is a path relative to the server's data root.
    """

    manifest: str = Field(min_length=1)
    config: CkaConfig = Field(default_factory=CkaConfig)
    flatten: FlattenMode = FlattenMode.FLATTEN_ALL
    branch: Optional[str] = None


class SimilarityMatrixResponse(BaseModel):
    values: List[List[float]]
    row_model: ModelMeta
    col_model: ModelMeta
    config: CkaConfig
    folds_averaged: int

    @classmethod
    def from_matrix(cls, matrix: SimilarityMatrix) -> "SimilarityMatrixResponse":
        return cls(
            values=matrix.values.tolist(),
            row_model=matrix.row_model,
            col_model=matrix.col_model,
            config=matrix.config,
            folds_averaged=matrix.folds_averaged
        )


class ArchitectureResponse(BaseModel):
    descriptor: ArchDescriptor
    violations: List[Violation]
    param_count: Optional[int] = None
