"""Block segmentation, redundancy, coverage and depth recommendation."""

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from app.core.exceptions import ArgumentError, ShapeError
from app.models.similarity import ComparisonGrid, SimilarityMatrix
from app.models.structure import (
    BlockPartition,
    CoverageReport,
    DepthCoverage,
    DepthRecommendation,
)

logger = structlog.get_logger(__name__)

MatrixLike = Union[SimilarityMatrix, np.ndarray]

# Objectives closer than this (relative) are treated as ties
TIE_TOLERANCE = 1e-12


def _values(S: MatrixLike) -> np.ndarray:
    values = S.values if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError(f"similarity matrix must have 2 axes, got {values.ndim}")
    return values


def _square(S: MatrixLike) -> np.ndarray:
    values = _values(S)
    rows, cols = values.shape
    if rows != cols:
        raise ShapeError(f"similarity matrix must be square, got {rows}x{cols}")
    return values


def _row_labels(S: MatrixLike, count: int) -> List[int]:
    if isinstance(S, SimilarityMatrix):
        return list(S.row_model.layer_indices)
    return list(range(1, count + 1))


def _ties(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_TOLERANCE * max(1.0, abs(a), abs(b))


def _better(value: float, bounds: Tuple[int, ...], best: Optional[float], best_bounds: Tuple[int, ...]) -> bool:
    if best is None:
        return True
    if _ties(value, best):
        return bounds < best_bounds
    return value > best


class _BlockScorer:
    """O(1) block scores from 2-D prefix sums."""

    def __init__(self, values: np.ndarray):
        count = values.shape[0]
        self.prefix = np.zeros((count + 1, count + 1))
        self.prefix[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)
        self.diag_prefix = np.concatenate([[0.0], np.cumsum(np.diag(values))])

    def block_sum(self, start: int, stop: int) -> float:
        p = self.prefix
        return float(p[stop, stop] - p[start, stop] - p[stop, start] + p[start, start])

    def off_diagonal_sum(self, start: int, stop: int) -> float:
        return self.block_sum(start, stop) - float(self.diag_prefix[stop] - self.diag_prefix[start])

    def score(self, start: int, stop: int) -> float:
        """Block size times its mean off-diagonal similarity; a singleton has no pairs and scores 0."""
        size = stop - start
        if size == 1:
            return 0.0
        return self.off_diagonal_sum(start, stop) / (size - 1)

    def within_mean(self, start: int, stop: int) -> Optional[float]:
        size = stop - start
        if size == 1:
            return None
        return self.off_diagonal_sum(start, stop) / (size * (size - 1))


def partition_objective(values: np.ndarray, boundaries: Sequence[int], penalty: float) -> float:
    """Objective of an explicit partition (used to audit the optimizer)."""
    values = _square(values)
    scorer = _BlockScorer(values)
    edges = [0, *boundaries, values.shape[0]]
    total = sum(scorer.score(a, b) for a, b in zip(edges, edges[1:]))
    return total - penalty * (len(edges) - 1)


def segment_blocks(S: MatrixLike, max_blocks: int = 4, penalty: float = 0.05) -> BlockPartition:
    """Optimal contiguous partition of layers into at most ``max_blocks`` blocks.

    Maximizes the sum of block scores minus ``penalty`` per block by dynamic
    programming over split points. Ties go to fewer blocks, then to the
    lexicographically smallest boundary list.
    """
    values = _square(S)
    if max_blocks < 1:
        raise ArgumentError(f"max_blocks must be at least 1, got {max_blocks}")
    if penalty < 0:
        raise ArgumentError(f"penalty must be non-negative, got {penalty}")
    scale = max(1.0, float(np.max(np.abs(values))))
    if not np.allclose(values, values.T, rtol=0.0, atol=1e-9 * scale):
        raise ShapeError("similarity matrix must be symmetric")

    count = values.shape[0]
    scorer = _BlockScorer(values)
    k_max = min(max_blocks, count)

    # best[k][j]: best score for the first j layers in exactly k blocks
    best: List[List[Optional[float]]] = [[None] * (count + 1) for _ in range(k_max + 1)]
    bounds: List[List[Tuple[int, ...]]] = [[()] * (count + 1) for _ in range(k_max + 1)]
    best[0][0] = 0.0
    for k in range(1, k_max + 1):
        for j in range(k, count + 1):
            for i in range(k - 1, j):
                prev = best[k - 1][i]
                if prev is None:
                    continue
                value = prev + scorer.score(i, j)
                candidate = bounds[k - 1][i] + ((i,) if i > 0 else ())
                if _better(value, candidate, best[k][j], bounds[k][j]):
                    best[k][j] = value
                    bounds[k][j] = candidate

    chosen_k, chosen_value = 1, None
    for k in range(1, k_max + 1):
        value = best[k][count] - penalty * k
        # strict improvement only, so ties keep the smaller k
        if chosen_value is None or (not _ties(value, chosen_value) and value > chosen_value):
            chosen_k, chosen_value = k, value

    boundaries = list(bounds[chosen_k][count])
    edges = [0, *boundaries, count]
    blocks = list(zip(edges, edges[1:]))
    within = [scorer.within_mean(a, b) for a, b in blocks]

    between = None
    if len(blocks) > 1:
        labels = np.repeat(np.arange(len(blocks)), [b - a for a, b in blocks])
        mask = labels[:, None] != labels[None, :]
        between = float(values[mask].mean())

    partition = BlockPartition(
        layer_count=count,
        boundaries=boundaries,
        k=len(blocks),
        within_mean=within,
        between_mean=between,
        objective=float(chosen_value),
        penalty=penalty,
        redundancy=layer_redundancy(values)
    )
    logger.info("blocks_segmented", layers=count, k=partition.k, boundaries=boundaries)
    return partition


def layer_redundancy(S: MatrixLike) -> List[float]:
    """score[j] = max similarity of layer j to any earlier layer; the first layer scores 0."""
    values = _square(S)
    scores = [0.0]
    for j in range(1, values.shape[0]):
        scores.append(float(values[:j, j].max()))
    return scores[: values.shape[0]]


def coverage(S: MatrixLike, tau: float = 0.8) -> CoverageReport:
    """Which row layers have some column layer with similarity ≥ tau."""
    if not 0.0 < tau < 1.0:
        raise ArgumentError(f"tau must lie in (0, 1), got {tau}")
    values = _values(S)
    best = values.max(axis=1)
    covered = [bool(v >= tau) for v in best]
    labels = _row_labels(S, values.shape[0])
    return CoverageReport(
        tau=tau,
        covered=covered,
        best_match=[float(v) for v in best],
        coverage_fraction=sum(covered) / len(covered),
        uncovered_layers=[label for label, ok in zip(labels, covered) if not ok]
    )


def recommend_depth(
    grid: ComparisonGrid,
    tau: float = 0.8,
    min_coverage: float = 1.0
) -> DepthRecommendation:
    """Smallest candidate depth whose coverage reaches ``min_coverage`` both ways.

    Forward coverage asks whether every reference layer has a counterpart in
    the candidate; backward coverage asks the reverse. When no candidate
    qualifies the result carries ``depth=None`` and the per-depth table.
    """
    if not 0.0 <= min_coverage <= 1.0:
        raise ArgumentError(f"min_coverage must lie in [0, 1], got {min_coverage}")
    if not grid.cells:
        raise ArgumentError("comparison grid has no cells")

    per_depth: List[DepthCoverage] = []
    for cell in grid.cells:
        forward = coverage(cell, tau)
        backward = coverage(cell.transpose(), tau)
        qualifies = (
            forward.coverage_fraction >= min_coverage - 1e-12
            and backward.coverage_fraction >= min_coverage - 1e-12
        )
        per_depth.append(
            DepthCoverage(
                model_id=cell.col_model.model_id,
                depth=cell.col_model.depth,
                forward=forward.coverage_fraction,
                backward=backward.coverage_fraction,
                uncovered_reference_layers=forward.uncovered_layers,
                uncovered_candidate_layers=backward.uncovered_layers,
                qualifies=qualifies
            )
        )
    per_depth.sort(key=lambda entry: (entry.depth, entry.model_id))

    qualifying = [entry.depth for entry in per_depth if entry.qualifies]
    depth = min(qualifying) if qualifying else None
    recommendation = DepthRecommendation(
        depth=depth,
        recommended=depth is not None,
        reference_model_id=grid.reference.model_id,
        reference_depth=grid.reference.depth,
        tau=tau,
        min_coverage=min_coverage,
        per_depth=per_depth
    )
    logger.info(
        "depth_recommended",
        reference=grid.reference.model_id,
        depth=depth,
        candidates=len(per_depth)
    )
    return recommendation


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.9g}"


def describe_partition(partition: BlockPartition) -> str:
    """Human-readable block report."""
    lines = [
        f"blocks: {partition.k} (penalty {partition.penalty:.9g}, objective {partition.objective:.9g})"
    ]
    for (first, last), mean in zip(partition.blocks, partition.within_mean):
        span = f"{first}" if first == last else f"{first}-{last}"
        lines.append(f"  layers {span}: within-block mean {_fmt(mean)}")
    lines.append(f"between-block mean: {_fmt(partition.between_mean)}")
    lines.append("redundancy: " + " ".join(_fmt(v) for v in partition.redundancy))
    return "\n".join(lines) + "\n"


def describe_coverage(report: CoverageReport) -> str:
    """Human-readable coverage report."""
    uncovered = ", ".join(map(str, report.uncovered_layers)) or "none"
    return (
        f"coverage at tau {report.tau:.9g}: {report.coverage_fraction:.9g} "
        f"({sum(report.covered)}/{len(report.covered)} layers)\n"
        f"uncovered layers: {uncovered}\n"
    )


def describe_recommendation(recommendation: DepthRecommendation) -> str:
    """Human-readable depth recommendation with the per-depth table."""
    head = (
        f"recommended depth: {recommendation.depth}"
        if recommendation.recommended
        else "recommended depth: none (no candidate reaches the coverage target)"
    )
    lines = [
        head,
        f"reference: {recommendation.reference_model_id} (depth {recommendation.reference_depth})",
        f"tau {recommendation.tau:.9g}, min coverage {recommendation.min_coverage:.9g}",
        "depth  forward    backward   qualifies  model",
    ]
    for entry in recommendation.per_depth:
        lines.append(
            f"{entry.depth:<6} {entry.forward:<10.9g} {entry.backward:<10.9g} "
            f"{'yes' if entry.qualifies else 'no':<10} {entry.model_id}"
        )
    return "\n".join(lines) + "\n"
