"""Structure analysis models: block partitions, coverage and depth recommendations."""

from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class BlockPartition(BaseModel):
    """Contiguous segmentation of a model's layers into similarity blocks.

    Positions are 1-based. ``boundaries`` holds the last position of every
    block except the final one, so ``[4]`` over ten layers means the blocks
    1-4 and 5-10.
    """

    model_config = ConfigDict(frozen=True)

    layer_count: int = Field(ge=1)
    boundaries: List[int]
    k: int = Field(ge=1)
    within_mean: List[Optional[float]]
    between_mean: Optional[float] = None
    objective: float
    penalty: float = Field(ge=0)
    redundancy: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_cover(self) -> "BlockPartition":
        if self.k != len(self.boundaries) + 1:
            raise ValueError("k must equal len(boundaries) + 1")
        edges = [0, *self.boundaries, self.layer_count]
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("boundaries must be strictly increasing inside the layer range")
        if len(self.within_mean) != self.k:
            raise ValueError("within_mean needs one entry per block")
        return self

    @property
    def blocks(self) -> List[Tuple[int, int]]:
        """Inclusive (first, last) layer positions per block."""
        edges = [0, *self.boundaries, self.layer_count]
        return [(a + 1, b) for a, b in zip(edges, edges[1:])]


class CoverageReport(BaseModel):
    """Which reference layers have a counterpart above the threshold."""

    model_config = ConfigDict(frozen=True)

    tau: float = Field(gt=0, lt=1)
    covered: List[bool]
    best_match: List[float] = Field(default_factory=list)
    coverage_fraction: float = Field(ge=0, le=1)
    uncovered_layers: List[int]


class DepthCoverage(BaseModel):
    """Bidirectional coverage of one candidate depth against the reference."""

    model_config = ConfigDict(frozen=True)

    model_id: str
    depth: int
    forward: float  # reference layers covered by the candidate
    backward: float  # candidate layers covered by the reference
    uncovered_reference_layers: List[int]
    uncovered_candidate_layers: List[int]
    qualifies: bool


class DepthRecommendation(BaseModel):
    """Outcome of a depth search; ``depth`` is None when nothing qualifies."""

    model_config = ConfigDict(frozen=True)

    depth: Optional[int] = None
    recommended: bool
    reference_model_id: str
    reference_depth: int
    tau: float
    min_coverage: float
    per_depth: List[DepthCoverage]
