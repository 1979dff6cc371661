"""Tests for the synthetic activation generators."""

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import ArgumentError
from app.models.activation import TransformTag
from app.models.synthetic import PlantedSpec, SensitivityTag
from app.services.cka_engine import cka
from app.services.synth_oracle import (
    examples_hash,
    planted_block_activations,
    planted_block_matrix,
    planted_depth_family,
    probe_activations,
    random_orthogonal,
    rotated_copy,
    synthetic_clips,
)


def test_planted_set_layout(planted_spec, planted_set):
    assert planted_set.layer_names == [f"layer{i}" for i in range(1, 7)]
    assert planted_set.n_examples == 64
    assert all(layer.n_features == 8 for layer in planted_set.layers)
    assert planted_set.examples_hash == examples_hash(planted_spec.seed, 64)
    assert planted_set.dataset == "synthetic"


def test_generation_is_deterministic(planted_spec, planted_set):
    again = planted_block_activations(planted_spec)
    for a, b in zip(planted_set.layers, again.layers):
        np.testing.assert_array_equal(a.data, b.data)


def test_random_orthogonal(rng):
    Q = random_orthogonal(5, rng)
    np.testing.assert_allclose(Q @ Q.T, np.eye(5), atol=1e-12)


def test_rotated_copy_keeps_similarity(planted_set):
    rotated = rotated_copy(planted_set, seed=1)
    assert rotated.model_id == "planted-rotated"
    assert cka(planted_set.layers[0].data, rotated.layers[0].data) == pytest.approx(1.0, abs=1e-9)


def test_planted_spec_rejects_bad_boundaries():
    with pytest.raises(ValidationError):
        PlantedSpec(layer_count=4, block_boundaries=[2, 2])
    with pytest.raises(ValidationError):
        PlantedSpec(layer_count=4, block_boundaries=[4])


class TestPlantedMatrix:
    def test_layout(self):
        S = planted_block_matrix([2], 4, within=0.8, between=0.2)
        expected = np.array([
            [1.0, 0.8, 0.2, 0.2],
            [0.8, 1.0, 0.2, 0.2],
            [0.2, 0.2, 1.0, 0.8],
            [0.2, 0.2, 0.8, 1.0],
        ])
        np.testing.assert_allclose(S, expected)

    def test_noise_stays_symmetric(self):
        S = planted_block_matrix([3], 6, noise_sigma=0.05, seed=2)
        np.testing.assert_allclose(S, S.T)
        np.testing.assert_allclose(np.diag(S), 1.0)

    def test_bad_boundaries(self):
        with pytest.raises(ArgumentError):
            planted_block_matrix([3, 2], 5)


class TestDepthFamily:
    @pytest.fixture
    def family(self):
        base = PlantedSpec(n_examples=64, feature_dim=8, noise_sigma=0.05, seed=4)
        shared = {3: ["early"], 6: ["early", "late"]}
        return planted_depth_family(base, [3, 6], shared, groups=["early", "late"])

    def test_names_and_ids(self, family):
        shallow, deep = family
        assert shallow.model_id == "planted-d03"
        assert deep.model_id == "planted-d06"
        assert shallow.layer_names == ["layer1_early", "layer2_early", "layer3_late_private"]
        assert deep.layer_names[-1] == "layer6_late"
        assert shallow.examples_hash == deep.examples_hash

    def test_shared_groups_align_across_depths(self, family):
        shallow, deep = family
        assert cka(shallow.layers[0].data, deep.layers[0].data) > 0.95
        assert abs(cka(shallow.layers[2].data, deep.layers[5].data)) < 0.3

    def test_unknown_group(self):
        with pytest.raises(ArgumentError):
            planted_depth_family(PlantedSpec(), [3], {3: ["middle"]}, groups=["early"])

    def test_missing_assignment(self):
        with pytest.raises(ArgumentError):
            planted_depth_family(PlantedSpec(), [3, 4], {3: ["early"]})


class TestProbe:
    def test_clips(self):
        clips = synthetic_clips(3, frames=10, size=4, seed=1)
        assert len(clips) == 3
        assert clips[0].frames.shape == (10, 3, 4, 4)
        assert all(0.2 <= clip.frames.min() and clip.frames.max() <= 0.8 for clip in clips)

    def test_layers_follow_tags(self):
        tags = [SensitivityTag.SPATIAL, SensitivityTag.TEMPORAL, SensitivityTag.NONE]
        spec = PlantedSpec(n_examples=6, feature_dim=4, layer_count=3, sensitivity_tags=tags)
        aset = probe_activations(spec, synthetic_clips(6, frames=8, size=4), TransformTag.NONE)
        assert aset.layer_names == ["layer1_spatial", "layer2_temporal", "layer3_none"]
        assert aset.model_id == "planted-none"
        assert all(layer.n_features == 4 for layer in aset.layers)

    def test_clip_count_must_match(self):
        spec = PlantedSpec(n_examples=6, layer_count=1)
        with pytest.raises(ArgumentError):
            probe_activations(spec, synthetic_clips(5, frames=8, size=4))
