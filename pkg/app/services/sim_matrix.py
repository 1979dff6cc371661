"""Similarity matrices: self, cross, one-to-all grids and fold averaging."""

import json
import os
import re
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from pydantic import ValidationError

from app.core.exceptions import (
    AggregationError,
    AlignmentError,
    ArgumentError,
    DegenerateRepresentationError,
    ManifestError,
    StoreIOError,
)
from app.models.activation import ActivationSet, LayerActivations
from app.models.cka import CkaConfig
from app.models.kernel import GramMatrix
from app.models.similarity import ComparisonGrid, ModelMeta, SimilarityMatrix
from app.services.cka_engine import ESTIMATORS, cka, cka_from_grams, layer_gram

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]

_FOLD_SUFFIX = re.compile(r"[-_.](?:fold|f)\d+$")


def _layer_grams(aset: ActivationSet, cfg: CkaConfig) -> List[Tuple[GramMatrix, float]]:
    """Gram matrix and self-HSIC per layer, computed once."""
    hsic = ESTIMATORS[cfg.estimator]
    grams = []
    for layer in aset.layers:
        try:
            K = layer_gram(layer.data, cfg, layer.layer_name)
            self_k = hsic(K, K)
            if not (np.isfinite(self_k) and self_k > 0.0):
                raise DegenerateRepresentationError("representation has no self-dependence")
        except DegenerateRepresentationError as exc:
            raise DegenerateRepresentationError(
                f"layer {layer.layer_index} of {aset.model_id}: {exc.message}",
                model_id=aset.model_id,
                layer_index=layer.layer_index
            ) from exc
        grams.append((K, self_k))
    return grams


def _pair_cka(
    a: LayerActivations,
    b: LayerActivations,
    cfg: CkaConfig,
    grams: Optional[Tuple[Tuple[GramMatrix, float], Tuple[GramMatrix, float]]]
) -> float:
    if grams is None:
        try:
            return cka(a.data, b.data, cfg)
        except DegenerateRepresentationError as exc:
            raise DegenerateRepresentationError(
                f"layers {a.layer_index} and {b.layer_index}: {exc.message}",
                layer_index=a.layer_index
            ) from exc
    (K, self_k), (L, self_l) = grams
    return cka_from_grams(K, L, cfg.estimator, self_k, self_l)


def self_similarity(aset: ActivationSet, cfg: Optional[CkaConfig] = None) -> SimilarityMatrix:
    """CKA between every pair of layers of one model; upper triangle mirrored."""
    cfg = cfg or CkaConfig()
    layers = aset.layers
    grams = None if cfg.minibatch_size else _layer_grams(aset, cfg)

    count = len(layers)
    values = np.zeros((count, count))
    for i in range(count):
        for j in range(i, count):
            pair = None if grams is None else (grams[i], grams[j])
            values[i, j] = _pair_cka(layers[i], layers[j], cfg, pair)
            values[j, i] = values[i, j]

    meta = ModelMeta.from_activation_set(aset)
    logger.info("self_similarity_computed", model_id=aset.model_id, layers=count, config=cfg.describe())
    return SimilarityMatrix(values=values, row_model=meta, col_model=meta, config=cfg)


def check_alignment(a: ActivationSet, b: ActivationSet) -> None:
    """Two sets must cover the same examples in the same order."""
    if a.n_examples != b.n_examples:
        raise AlignmentError(
            f"{a.model_id} has {a.n_examples} examples, {b.model_id} has {b.n_examples}",
            models=[a.model_id, b.model_id]
        )
    if a.examples_hash and b.examples_hash and a.examples_hash != b.examples_hash:
        raise AlignmentError(
            f"{a.model_id} and {b.model_id} were evaluated on different examples",
            models=[a.model_id, b.model_id]
        )


def cross_similarity(
    a: ActivationSet,
    b: ActivationSet,
    cfg: Optional[CkaConfig] = None
) -> SimilarityMatrix:
    """CKA between every layer of ``a`` (rows) and every layer of ``b`` (columns)."""
    cfg = cfg or CkaConfig()
    check_alignment(a, b)
    grams_a = None if cfg.minibatch_size else _layer_grams(a, cfg)
    grams_b = None if cfg.minibatch_size else _layer_grams(b, cfg)

    values = np.zeros((len(a.layers), len(b.layers)))
    for i, layer_a in enumerate(a.layers):
        for j, layer_b in enumerate(b.layers):
            pair = None if grams_a is None else (grams_a[i], grams_b[j])
            values[i, j] = _pair_cka(layer_a, layer_b, cfg, pair)

    logger.info(
        "cross_similarity_computed",
        row_model=a.model_id,
        col_model=b.model_id,
        shape=list(values.shape)
    )
    return SimilarityMatrix(
        values=values,
        row_model=ModelMeta.from_activation_set(a),
        col_model=ModelMeta.from_activation_set(b),
        config=cfg
    )


def one_to_all(
    reference: ActivationSet,
    others: Sequence[ActivationSet],
    cfg: Optional[CkaConfig] = None
) -> ComparisonGrid:
    """Cross-similarity of a reference against each other model, shallowest first."""
    cfg = cfg or CkaConfig()
    if not others:
        raise ArgumentError("one_to_all needs at least one other model")
    ordered = sorted(others, key=lambda aset: (aset.depth, aset.model_id))
    cells = [cross_similarity(reference, other, cfg) for other in ordered]
    return ComparisonGrid(reference=ModelMeta.from_activation_set(reference), cells=cells)


def _averaged_meta(metas: Sequence[ModelMeta]) -> ModelMeta:
    ids = sorted(meta.model_id for meta in metas)
    stripped = {_FOLD_SUFFIX.sub("", model_id) for model_id in ids}
    if len(stripped) == 1:
        model_id = stripped.pop()
    else:
        model_id = os.path.commonprefix(ids).rstrip("-_.") or ids[0]
    hashes = {meta.examples_hash for meta in metas}
    first = metas[0]
    return first.model_copy(
        update={
            "model_id": model_id,
            "fold": None,
            "examples_hash": hashes.pop() if len(hashes) == 1 else None
        }
    )


def average_folds(mats: Sequence[SimilarityMatrix]) -> SimilarityMatrix:
    """Entry-wise mean of matrices that differ only in fold."""
    if not mats:
        raise AggregationError("no matrices to average")
    first = mats[0]
    for other in mats[1:]:
        if other.shape != first.shape:
            raise AggregationError(f"shape {other.shape} differs from {first.shape}")
        if other.config != first.config:
            raise AggregationError("matrices were computed with different CKA configurations")
        if not (
            other.row_model.same_model_modulo_fold(first.row_model)
            and other.col_model.same_model_modulo_fold(first.col_model)
        ):
            raise AggregationError("matrices describe different models")

    # sorting along the stack makes the sum independent of input order
    stack = np.sort(np.stack([m.values for m in mats]), axis=0)
    values = stack.sum(axis=0) / len(mats)

    return SimilarityMatrix(
        values=values,
        row_model=_averaged_meta([m.row_model for m in mats]),
        col_model=_averaged_meta([m.col_model for m in mats]),
        config=first.config,
        folds_averaged=sum(m.folds_averaged for m in mats)
    )


def restrict_layers(
    aset: ActivationSet,
    keep: Union[str, Callable[[LayerActivations], bool]]
) -> ActivationSet:
    """Keep matching layers, renumbered from 1.

    A string keeps layers whose name carries it as an underscore-separated
    token, e.g. ``"diff"`` keeps ``meta2_diff_conv1``.
    """
    if isinstance(keep, str):
        tag = keep
        predicate = lambda layer: tag in layer.layer_name.split("_")  # noqa: E731
    else:
        predicate = keep

    kept = [layer for layer in aset.layers if predicate(layer)]
    if not kept:
        raise ArgumentError(f"no layers of {aset.model_id} match the restriction")
    renumbered = [
        layer.model_copy(update={"layer_index": position})
        for position, layer in enumerate(kept, start=1)
    ]
    return aset.model_copy(update={"layers": renumbered})


def _meta_line(matrix: SimilarityMatrix) -> Tuple[str, str]:
    models = f"# rows={matrix.row_model.describe()}; cols={matrix.col_model.describe()}"
    config = f"# config={matrix.config.describe()} folds_averaged={matrix.folds_averaged}"
    return models, config


def _round9(value: float) -> float:
    return float(f"{value:.9g}")


def matrix_document(matrix: SimilarityMatrix) -> dict:
    """JSON sidecar content; values carry 9 significant digits."""
    return {
        "values": [[_round9(v) for v in row] for row in matrix.values.tolist()],
        "row_model": matrix.row_model.model_dump(mode="json"),
        "col_model": matrix.col_model.model_dump(mode="json"),
        "config": matrix.config.model_dump(mode="json"),
        "folds_averaged": matrix.folds_averaged,
    }


def write_matrix(matrix: SimilarityMatrix, stem: PathLike) -> Tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.json``."""
    stem = Path(stem)
    csv_path = stem.with_name(stem.name + ".csv")
    json_path = stem.with_name(stem.name + ".json")

    frame = pd.DataFrame(
        matrix.values,
        index=pd.Index(matrix.row_model.layer_indices, name="layer"),
        columns=[str(i) for i in matrix.col_model.layer_indices]
    )
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        with csv_path.open("w", encoding="utf-8", newline="") as fh:
            for line in _meta_line(matrix):
                fh.write(line + "\n")
            frame.to_csv(fh, float_format="%.9g", lineterminator="\n")
        json_path.write_text(
            json.dumps(matrix_document(matrix), indent=2, sort_keys=True) + "\n",
            encoding="utf-8"
        )
    except OSError as exc:
        raise StoreIOError(f"cannot write {stem}: {exc.strerror or exc}", path=str(stem)) from exc
    return csv_path, json_path


def read_matrix(json_path: PathLike) -> SimilarityMatrix:
    """Load a similarity matrix from its JSON sidecar."""
    json_path = Path(json_path)
    try:
        document = json.loads(json_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise StoreIOError(f"cannot read {json_path}: {exc.strerror or exc}", path=str(json_path)) from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"matrix file is not valid JSON: {exc.msg}", path=str(json_path)) from exc
    try:
        return SimilarityMatrix.model_validate(document)
    except ValidationError as exc:
        raise ManifestError(
            f"matrix file failed validation: {exc.errors()[0]['msg']}", path=str(json_path)
        ) from exc
