"""Tests for the analysis pipeline."""

import pytest

from app.core.exceptions import AggregationError, UsageError
from app.models.synthetic import PlantedSpec
from app.schemas.pipeline import PipelineConfig
from app.services.pipeline import AnalysisPipeline, safe_name
from app.services.synth_oracle import planted_block_activations
from app.services.tensor_store import write_activation_set


@pytest.fixture
def folds(tmp_path, planted_set):
    """Two reference folds and two candidate folds of a shallower model."""
    candidate = planted_block_activations(
        PlantedSpec(n_examples=64, feature_dim=8, layer_count=4, block_boundaries=[2], noise_sigma=0.05, seed=7)
    )
    refs = [
        write_activation_set(
            planted_set.model_copy(update={"model_id": f"ref-fold{k}", "fold": k}), tmp_path / "refs" / str(k)
        )
        for k in (0, 1)
    ]
    for k in (0, 1):
        write_activation_set(
            candidate.model_copy(update={"model_id": f"cand-fold{k}", "fold": k}), tmp_path / "others" / str(k)
        )
    return refs, tmp_path / "others"


def _pipeline(tmp_path, reference, others=(), **options):
    return AnalysisPipeline(
        PipelineConfig(reference=list(reference), others=list(others), out_dir=tmp_path / "out", **options)
    )


def test_safe_name():
    assert safe_name("net/a b") == "net_a_b"
    assert safe_name("///") == "model"


def test_fold_averaged_grid(tmp_path, folds):
    refs, others = folds
    grid = _pipeline(tmp_path, refs, [others], average_folds=True).build_grid()
    assert len(grid.cells) == 1
    cell = grid.cells[0]
    assert cell.folds_averaged == 2
    assert cell.col_model.model_id == "cand"
    assert grid.reference.model_id == "ref"
    assert cell.shape == (6, 4)


def test_several_references_need_averaging(tmp_path, folds):
    refs, others = folds
    with pytest.raises(UsageError):
        _pipeline(tmp_path, refs, [others]).build_grid()


def test_unmatched_folds(tmp_path, folds, planted_set):
    refs, others = folds
    lonely = planted_set.model_copy(update={"model_id": "solo-fold5", "fold": 5})
    write_activation_set(lonely, others / "5")
    with pytest.raises(AggregationError):
        _pipeline(tmp_path, refs, [others], average_folds=True).build_grid()


def test_no_comparison_models(tmp_path, planted_manifest):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(UsageError):
        _pipeline(tmp_path, [planted_manifest], [empty]).build_grid()


def test_run_self_writes_outputs(tmp_path, planted_manifest):
    [matrix] = _pipeline(tmp_path, [planted_manifest]).run_self()
    assert matrix.shape == (6, 6)
    for suffix in ("csv", "json", "pgm"):
        assert (tmp_path / "out" / f"self_planted.{suffix}").exists()


def test_run_grid_writes_reports(tmp_path, folds):
    refs, others = folds
    recommendation = _pipeline(tmp_path, refs, [others], average_folds=True).run_grid()
    assert recommendation.reference_model_id == "ref"
    out = tmp_path / "out"
    assert (out / "recommendation.txt").read_text().startswith("recommended depth:")
    assert (out / "coverage.json").exists()
    assert (out / "cells" / "ref__cand.csv").exists()
