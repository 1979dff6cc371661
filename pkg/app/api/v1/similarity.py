"""Similarity endpoints."""

from pathlib import Path
from typing import Any

import numpy as np
import structlog
from fastapi import APIRouter, Depends, HTTPException, status

from app.core.config import Settings, get_settings
from app.schemas.similarity import (
    CkaRequest,
    CkaResponse,
    SelfSimilarityRequest,
    SimilarityMatrixResponse,
)
from app.services.cka_engine import cka
from app.services.sim_matrix import restrict_layers, self_similarity
from app.services.tensor_store import load_activation_set

logger = structlog.get_logger(__name__)

router = APIRouter()


def _resolve_manifest(manifest: str, data_root: Path) -> Path:
    root = data_root.resolve()
    path = (root / manifest).resolve()
    if not path.is_relative_to(root):
        logger.warning("manifest_outside_data_root", manifest=manifest)
        raise HTTPException(
            status_code=status.HTTP_403_FORBIDDEN,
            detail="manifest lies outside the data root"
        )
    return path


@router.post("/cka", response_model=CkaResponse)
def compute_cka(request: CkaRequest) -> Any:
    """CKA between two inline representations."""
    x = np.asarray(request.x, dtype=np.float64)
    y = np.asarray(request.y, dtype=np.float64)
    value = cka(x, y, request.config)
    return CkaResponse(cka=value, n_examples=x.shape[0], config=request.config)


@router.post("/self", response_model=SimilarityMatrixResponse)
def compute_self_similarity(
    request: SelfSimilarityRequest,
    settings: Settings = Depends(get_settings)
) -> Any:
    """Layer-by-layer self-similarity of an activation set under ``DATA_ROOT``."""
    manifest = _resolve_manifest(request.manifest, settings.DATA_ROOT)
    aset = load_activation_set(manifest, request.flatten)
    if request.branch:
        aset = restrict_layers(aset, request.branch)
    matrix = self_similarity(aset, request.config)
    logger.info("self_similarity_served", model_id=aset.model_id, layers=len(aset.layers))
    return SimilarityMatrixResponse.from_matrix(matrix)
