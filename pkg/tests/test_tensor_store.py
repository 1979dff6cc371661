"""Tests for the NPY codec, flattening and manifests."""

import json

import numpy as np
import pytest
from numpy.lib import format as npformat

from app.core.exceptions import (
    ConsistencyError,
    DataError,
    FormatError,
    InsufficientSamplesError,
    ManifestError,
    StoreIOError,
    UnsupportedError,
)
from app.models.activation import FlattenMode
from app.services.tensor_store import (
    find_manifests,
    flatten_layer,
    load_activation_set,
    read_array,
    write_activation_set,
    write_array,
)


def _raw_npy(path, array, version=(1, 0)):
    with path.open("wb") as fh:
        npformat.write_array(fh, array, version=version, allow_pickle=False)


def _manifest(directory, layers, **fields):
    document = {"model_id": "m", "family": "physnet3dcnn", "depth": len(layers), "layers": layers}
    document.update(fields)
    path = directory / "manifest.json"
    path.write_text(json.dumps(document))
    return path


class TestArrays:
    def test_smallest_float64_file_is_136_bytes(self, tmp_path):
        path = tmp_path / "a.npy"
        write_array(np.array([[1.5]]), path)
        assert path.stat().st_size == 136
        np.testing.assert_array_equal(read_array(path), [[1.5]])

    def test_float32_is_preserved(self, tmp_path):
        path = tmp_path / "a.npy"
        write_array(np.arange(6, dtype=np.float32).reshape(2, 3), path)
        array = read_array(path)
        assert array.dtype == np.float32
        assert array.shape == (2, 3)

    def test_integer_input_is_written_as_float64(self, tmp_path):
        path = tmp_path / "a.npy"
        write_array(np.arange(4).reshape(2, 2), path)
        assert read_array(path).dtype == np.float64

    def test_fortran_order_is_unsupported(self, tmp_path):
        path = tmp_path / "f.npy"
        _raw_npy(path, np.asfortranarray(np.arange(6.0).reshape(2, 3)))
        with pytest.raises(UnsupportedError) as exc:
            read_array(path)
        assert exc.value.kind == "unsupported"

    def test_integer_dtype_is_unsupported(self, tmp_path):
        path = tmp_path / "i.npy"
        _raw_npy(path, np.arange(4, dtype=np.int64))
        with pytest.raises(UnsupportedError):
            read_array(path)

    def test_version_two_is_unsupported(self, tmp_path):
        path = tmp_path / "v2.npy"
        _raw_npy(path, np.zeros(3), version=(2, 0))
        with pytest.raises(UnsupportedError):
            read_array(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.npy"
        path.write_bytes(b"NOT AN ARRAY FILE AT ALL")
        with pytest.raises(FormatError) as exc:
            read_array(path)
        assert exc.value.kind == "format"

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.npy"
        write_array(np.zeros((4, 4)), path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            read_array(path)

    def test_non_finite_payload(self, tmp_path):
        path = tmp_path / "nan.npy"
        _raw_npy(path, np.array([1.0, np.nan]))
        with pytest.raises(DataError):
            read_array(path)

    def test_refuses_to_write_non_finite(self, tmp_path):
        with pytest.raises(DataError):
            write_array(np.array([np.inf]), tmp_path / "x.npy")

    def test_unreadable_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(StoreIOError) as exc:
            read_array(blocker / "a.npy")
        assert exc.value.kind == "io"


class TestFlatten:
    def test_flatten_all_keeps_c_order(self):
        tensor = np.arange(2 * 3 * 2 * 2, dtype=np.float64).reshape(2, 3, 2, 2)
        flat = flatten_layer(tensor, FlattenMode.FLATTEN_ALL)
        assert flat.shape == (2, 12)
        np.testing.assert_array_equal(flat[1], tensor[1].ravel())

    def test_spatial_mean_leaves_one_feature_per_channel(self):
        tensor = np.ones((4, 3, 5, 2, 2))
        tensor[:, 1] = 3.0
        flat = flatten_layer(tensor, FlattenMode.SPATIAL_MEAN)
        assert flat.shape == (4, 3)
        np.testing.assert_allclose(flat[:, 1], 3.0)


class TestManifests:
    def test_round_trip(self, planted_set, planted_manifest):
        loaded = load_activation_set(planted_manifest)
        assert loaded.model_id == planted_set.model_id
        assert loaded.layer_indices == planted_set.layer_indices
        assert loaded.examples_hash == planted_set.examples_hash
        for ours, theirs in zip(loaded.layers, planted_set.layers):
            np.testing.assert_array_equal(ours.data, theirs.data)

    def test_raw_tensors_are_flattened_on_load(self, tmp_path, rng):
        write_array(rng.standard_normal((5, 2, 3, 3)), tmp_path / "l1.npy")
        write_array(rng.standard_normal((5, 4, 2, 2)), tmp_path / "l2.npy")
        path = _manifest(tmp_path, [
            {"index": 1, "name": "conv1", "file": "l1.npy", "shape": [5, 2, 3, 3]},
            {"index": 2, "name": "conv2", "file": "l2.npy", "shape": [5, 4, 2, 2]},
        ])
        full = load_activation_set(path)
        assert [layer.n_features for layer in full.layers] == [18, 16]
        pooled = load_activation_set(path, FlattenMode.SPATIAL_MEAN)
        assert [layer.n_features for layer in pooled.layers] == [2, 4]

    def test_layers_are_sorted_by_index(self, tmp_path, rng):
        for name in ("a", "b"):
            write_array(rng.standard_normal((6, 3)), tmp_path / f"{name}.npy")
        path = _manifest(tmp_path, [
            {"index": 2, "name": "second", "file": "b.npy", "shape": [6, 3]},
            {"index": 1, "name": "first", "file": "a.npy", "shape": [6, 3]},
        ])
        assert load_activation_set(path).layer_names == ["first", "second"]

    def test_duplicate_index(self, tmp_path, rng):
        write_array(rng.standard_normal((6, 3)), tmp_path / "a.npy")
        path = _manifest(tmp_path, [
            {"index": 1, "name": "a", "file": "a.npy", "shape": [6, 3]},
            {"index": 1, "name": "b", "file": "a.npy", "shape": [6, 3]},
        ])
        with pytest.raises(ManifestError):
            load_activation_set(path)

    def test_example_count_mismatch(self, tmp_path, rng):
        write_array(rng.standard_normal((6, 3)), tmp_path / "a.npy")
        write_array(rng.standard_normal((7, 3)), tmp_path / "b.npy")
        path = _manifest(tmp_path, [
            {"index": 1, "name": "a", "file": "a.npy", "shape": [6, 3]},
            {"index": 2, "name": "b", "file": "b.npy", "shape": [7, 3]},
        ])
        with pytest.raises(ConsistencyError) as exc:
            load_activation_set(path)
        assert exc.value.kind == "consistency"

    def test_too_few_examples(self, tmp_path, rng):
        write_array(rng.standard_normal((3, 3)), tmp_path / "a.npy")
        path = _manifest(tmp_path, [{"index": 1, "name": "a", "file": "a.npy", "shape": [3, 3]}])
        with pytest.raises(InsufficientSamplesError):
            load_activation_set(path)

    def test_shape_disagreement(self, tmp_path, rng):
        write_array(rng.standard_normal((6, 3)), tmp_path / "a.npy")
        path = _manifest(tmp_path, [{"index": 1, "name": "a", "file": "a.npy", "shape": [6, 4]}])
        with pytest.raises(ManifestError):
            load_activation_set(path)

    def test_unknown_field_is_rejected(self, tmp_path, rng):
        write_array(rng.standard_normal((6, 3)), tmp_path / "a.npy")
        path = _manifest(
            tmp_path,
            [{"index": 1, "name": "a", "file": "a.npy", "shape": [6, 3]}],
            owner="someone"
        )
        with pytest.raises(ManifestError) as exc:
            load_activation_set(path)
        assert exc.value.context["errors"]

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json")
        with pytest.raises(ManifestError):
            load_activation_set(path)

    def test_missing_layer_file(self, tmp_path):
        path = _manifest(tmp_path, [{"index": 1, "name": "a", "file": "gone.npy", "shape": [6, 3]}])
        with pytest.raises(StoreIOError):
            load_activation_set(path)

    def test_find_manifests_is_sorted(self, tmp_path, planted_set):
        write_activation_set(planted_set, tmp_path / "b")
        write_activation_set(planted_set, tmp_path / "a")
        found = find_manifests(tmp_path)
        assert [p.parent.name for p in found] == ["a", "b"]
