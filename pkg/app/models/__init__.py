"""Init file for models package."""

from app.models.activation import (
    MIN_EXAMPLES,
    ActivationSet,
    Family,
    FlattenMode,
    LayerActivations,
    TransformTag,
)
from app.models.architecture import (
    ArchDescriptor,
    ArchInput,
    Branch,
    Follower,
    LayerOp,
    LayerSpec,
    PoolingSpec,
    PoolKind,
    Violation,
)
from app.models.base import DomainModel
from app.models.cka import CkaConfig, Estimator
from app.models.kernel import GramMatrix, KernelKind
from app.models.similarity import ComparisonGrid, ModelMeta, SimilarityMatrix
from app.models.structure import (
    BlockPartition,
    CoverageReport,
    DepthCoverage,
    DepthRecommendation,
)
from app.models.synthetic import PlantedSpec, SensitivityTag
from app.models.transform import Clip, TransformSpec

__all__ = [
    "MIN_EXAMPLES",
    "DomainModel",
    "ActivationSet",
    "LayerActivations",
    "Family",
    "FlattenMode",
    "TransformTag",
    "ArchDescriptor",
    "ArchInput",
    "Branch",
    "Follower",
    "LayerOp",
    "LayerSpec",
    "PoolingSpec",
    "PoolKind",
    "Violation",
    "CkaConfig",
    "Estimator",
    "GramMatrix",
    "KernelKind",
    "ComparisonGrid",
    "ModelMeta",
    "SimilarityMatrix",
    "BlockPartition",
    "CoverageReport",
    "DepthCoverage",
    "DepthRecommendation",
    "PlantedSpec",
    "SensitivityTag",
    "Clip",
    "TransformSpec",
]
