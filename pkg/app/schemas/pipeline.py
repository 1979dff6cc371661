"""Pipeline configuration schema."""

from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.activation import FlattenMode
from app.models.cka import CkaConfig


class Palette(str, Enum):
    """Heatmap palettes."""
    GRAY = "gray"
    BLUE = "blue"


class ImageFormat(str, Enum):
    """Heatmap image formats."""
    PGM = "pgm"
    SVG = "svg"


class StructureParams(BaseModel):
    """Block, coverage and recommendation parameters."""

    model_config = ConfigDict(frozen=True)

    tau: float = Field(default=0.8, gt=0, lt=1)
    min_coverage: float = Field(default=1.0, ge=0, le=1)
    max_blocks: int = Field(default=4, ge=1)
    penalty: float = Field(default=0.05, ge=0)


class RenderOptions(BaseModel):
    """Heatmap rendering options."""

    model_config = ConfigDict(frozen=True)

    palette: Palette = Palette.GRAY
    clamp: Tuple[float, float] = (0.0, 1.0)
    scale: int = Field(default=1, ge=1)
    svg: bool = False

    @model_validator(mode="after")
    def _check_clamp(self) -> "RenderOptions":
        lo, hi = self.clamp
        if not lo < hi:
            raise ValueError("clamp low bound must be below the high bound")
        return self


class PipelineConfig(BaseModel):
    """Validated inputs of one analysis run."""

    model_config = ConfigDict(frozen=True)

    reference: List[Path] = Field(min_length=1)
    others: List[Path] = Field(default_factory=list)
    cka: CkaConfig = Field(default_factory=CkaConfig)
    structure: StructureParams = Field(default_factory=StructureParams)
    render: RenderOptions = Field(default_factory=RenderOptions)
    flatten: FlattenMode = FlattenMode.FLATTEN_ALL
    average_folds: bool = False
    branch: Optional[str] = None
    out_dir: Path

    @field_validator("reference", "others")
    @classmethod
    def _paths_exist(cls, paths: List[Path]) -> List[Path]:
        missing = [str(p) for p in paths if not p.exists()]
        if missing:
            raise ValueError(f"paths do not exist: {', '.join(missing)}")
        return paths
