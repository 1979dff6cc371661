"""Analysis pipeline: activations to similarity maps, structure reports and a depth recommendation."""

import re
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import structlog

from app.core.exceptions import AggregationError, UsageError
from app.models.activation import ActivationSet
from app.models.similarity import ComparisonGrid, SimilarityMatrix
from app.models.structure import BlockPartition, CoverageReport, DepthRecommendation
from app.schemas.pipeline import ImageFormat, PipelineConfig, RenderOptions, StructureParams
from app.services.report import render_heatmap, write_json, write_text
from app.services.sim_matrix import (
    average_folds,
    cross_similarity,
    read_matrix,
    restrict_layers,
    self_similarity,
    write_matrix,
)
from app.services.structure import (
    coverage,
    describe_coverage,
    describe_partition,
    describe_recommendation,
    recommend_depth,
    segment_blocks,
)
from app.services.tensor_store import find_manifests, load_activation_set

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")
_FOLD_SUFFIX = re.compile(r"[-_.](?:fold|f)\d+$")


def safe_name(model_id: str) -> str:
    """File-name-safe version of a model id."""
    return _UNSAFE.sub("_", model_id).strip("_") or "model"


def write_outputs(matrix: SimilarityMatrix, stem: Path, render: RenderOptions) -> List[Path]:
    """CSV, JSON sidecar and heatmap(s) for one matrix."""
    csv_path, json_path = write_matrix(matrix, stem)
    written = [csv_path, json_path]
    written.append(render_heatmap(matrix, stem.with_name(stem.name + ".pgm"), render, ImageFormat.PGM))
    if render.svg:
        written.append(render_heatmap(matrix, stem.with_name(stem.name + ".svg"), render, ImageFormat.SVG))
    return written


class AnalysisPipeline:
    """Runs one configured analysis and writes its outputs under ``config.out_dir``."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.out_dir = Path(config.out_dir)

    def load(self, manifest: PathLike) -> ActivationSet:
        aset = load_activation_set(manifest, self.config.flatten)
        if self.config.branch:
            aset = restrict_layers(aset, self.config.branch)
        return aset

    def _references(self) -> List[ActivationSet]:
        refs = [self.load(path) for path in self.config.reference]
        if len(refs) > 1 and not self.config.average_folds:
            raise UsageError("several reference manifests need --average-folds")
        return refs

    def run_self(self) -> List[SimilarityMatrix]:
        """Self-similarity per manifest, or one fold-averaged matrix."""
        matrices = [self_similarity(self.load(p), self.config.cka) for p in self.config.reference]
        if self.config.average_folds:
            matrices = [average_folds(matrices)]
        for matrix in matrices:
            write_outputs(matrix, self.out_dir / f"self_{safe_name(matrix.row_model.model_id)}", self.config.render)
        return matrices

    def run_cross(self, other: PathLike) -> SimilarityMatrix:
        reference = self._references()[0]
        matrix = cross_similarity(reference, self.load(other), self.config.cka)
        stem = f"cross_{safe_name(matrix.row_model.model_id)}__{safe_name(matrix.col_model.model_id)}"
        write_outputs(matrix, self.out_dir / stem, self.config.render)
        return matrix

    def _other_manifests(self) -> List[Path]:
        skip = {Path(p).resolve() for p in self.config.reference}
        found: List[Path] = []
        for directory in self.config.others:
            found.extend(p for p in find_manifests(directory) if p.resolve() not in skip)
        if not found:
            raise UsageError("no comparison manifests found", directories=[str(d) for d in self.config.others])
        return found

    def _grouped_others(self) -> "OrderedDict[Tuple, List[ActivationSet]]":
        groups: "OrderedDict[Tuple, List[ActivationSet]]" = OrderedDict()
        for path in self._other_manifests():
            aset = self.load(path)
            if self.config.average_folds:
                key: Tuple = (
                    aset.family,
                    aset.depth,
                    aset.transform_tag,
                    _FOLD_SUFFIX.sub("", aset.model_id),
                )
            else:
                key = (str(path),)
            groups.setdefault(key, []).append(aset)
        return groups

    def build_grid(self) -> ComparisonGrid:
        """One cell per comparison model, fold-averaged when requested."""
        refs = self._references()
        cells: List[SimilarityMatrix] = []
        for members in self._grouped_others().values():
            if not self.config.average_folds:
                cells.append(cross_similarity(refs[0], members[0], self.config.cka))
                continue
            pairs = [(r, o) for r in refs for o in members if o.fold == r.fold]
            if not pairs:
                raise AggregationError(
                    f"no folds of {members[0].model_id} match the reference folds",
                    reference_folds=sorted(r.fold for r in refs)
                )
            cells.append(average_folds([cross_similarity(r, o, self.config.cka) for r, o in pairs]))
        cells.sort(key=lambda cell: (cell.col_model.depth, cell.col_model.model_id))
        return ComparisonGrid(reference=cells[0].row_model, cells=cells)

    def _coverage_document(self, grid: ComparisonGrid) -> Dict:
        tau = self.config.structure.tau
        entries = []
        for cell in grid.cells:
            entries.append({
                "model_id": cell.col_model.model_id,
                "depth": cell.col_model.depth,
                "forward": coverage(cell, tau).model_dump(mode="json"),
                "backward": coverage(cell.transpose(), tau).model_dump(mode="json"),
            })
        return {"reference": grid.reference.model_id, "tau": tau, "cells": entries}

    def run_grid(self, write_cells: bool = True) -> DepthRecommendation:
        """Grid cells, coverage table and depth recommendation."""
        grid = self.build_grid()
        if write_cells:
            cell_dir = self.out_dir / "cells"
            for cell in grid.cells:
                stem = f"{safe_name(cell.row_model.model_id)}__{safe_name(cell.col_model.model_id)}"
                write_outputs(cell, cell_dir / stem, self.config.render)
            write_json(self._coverage_document(grid), self.out_dir / "coverage.json")

        params = self.config.structure
        recommendation = recommend_depth(grid, params.tau, params.min_coverage)
        write_json(recommendation.model_dump(mode="json"), self.out_dir / "recommendation.json")
        write_text(describe_recommendation(recommendation), self.out_dir / "recommendation.txt")
        return recommendation


def analyze_blocks(matrix_path: PathLike, params: StructureParams, out_dir: PathLike) -> BlockPartition:
    """Block partition and redundancy scores of a stored square matrix."""
    partition = segment_blocks(read_matrix(matrix_path), params.max_blocks, params.penalty)
    out_dir = Path(out_dir)
    write_json(partition.model_dump(mode="json"), out_dir / "blocks.json")
    write_text(describe_partition(partition), out_dir / "blocks.txt")
    return partition


def analyze_coverage(matrix_path: PathLike, params: StructureParams, out_dir: PathLike) -> CoverageReport:
    """Coverage of the row model's layers by the column model."""
    report = coverage(read_matrix(matrix_path), params.tau)
    out_dir = Path(out_dir)
    write_json(report.model_dump(mode="json"), out_dir / "coverage.json")
    write_text(describe_coverage(report), out_dir / "coverage.txt")
    return report


def render_stored(
    matrix_path: PathLike,
    out_dir: PathLike,
    options: RenderOptions,
    image_format: ImageFormat,
    name: Optional[str] = None
) -> Path:
    """Heatmap of a stored matrix, named after its JSON file unless given."""
    matrix_path = Path(matrix_path)
    stem = name or matrix_path.stem
    return render_heatmap(
        read_matrix(matrix_path),
        Path(out_dir) / f"{stem}.{image_format.value}",
        options,
        image_format
    )
