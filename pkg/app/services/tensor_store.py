"""Activation tensor storage: NPY v1.0 codec, flattening and manifests."""

import json
from math import prod
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import structlog
from numpy.lib import format as npformat
from pydantic import ValidationError

from app.core.exceptions import (
    ConsistencyError,
    DataError,
    FormatError,
    InsufficientSamplesError,
    ManifestError,
    ShapeError,
    StoreIOError,
    UnsupportedError,
)
from app.models.activation import MIN_EXAMPLES, ActivationSet, FlattenMode, LayerActivations
from app.models.transform import TransformSpec
from app.schemas.manifest import MANIFEST_NAME, ActivationManifest, ManifestLayer

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]

SUPPORTED_DESCR = ("<f4", "<f8")
MAX_AXES = 5


def read_array(path: PathLike) -> np.ndarray:
    """Read a little-endian float32/float64 C-order NPY v1.0 file.

    Raises:
        StoreIOError: The file cannot be opened.
        FormatError: Bad magic, header or payload length.
        UnsupportedError: Other version, dtype, Fortran order or rank.
        DataError: The payload holds NaN or infinity.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            try:
                version = npformat.read_magic(fh)
            except ValueError as exc:
                raise FormatError(f"not an NPY file: {exc}", path=str(path)) from exc
            if version != (1, 0):
                raise UnsupportedError(
                    f"NPY version {version[0]}.{version[1]} is not supported", path=str(path)
                )
            try:
                shape, fortran_order, dtype = npformat.read_array_header_1_0(fh)
            except ValueError as exc:
                raise FormatError(f"malformed NPY header: {exc}", path=str(path)) from exc
            payload = fh.read()
    except OSError as exc:
        raise StoreIOError(f"cannot read {path}: {exc.strerror or exc}", path=str(path)) from exc

    if dtype.str not in SUPPORTED_DESCR:
        raise UnsupportedError(f"dtype {dtype.str} is not supported", path=str(path))
    if fortran_order:
        raise UnsupportedError("Fortran-ordered arrays are not supported", path=str(path))
    if not 1 <= len(shape) <= MAX_AXES:
        raise UnsupportedError(f"arrays need 1 to {MAX_AXES} axes, got {len(shape)}", path=str(path))

    count = prod(shape)
    if len(payload) != count * dtype.itemsize:
        raise FormatError(
            f"payload holds {len(payload)} bytes, header implies {count * dtype.itemsize}",
            path=str(path)
        )
    array = np.frombuffer(payload, dtype=dtype, count=count).reshape(shape).copy()
    if not np.all(np.isfinite(array)):
        raise DataError("array contains non-finite values", path=str(path))
    return array


def write_array(array: np.ndarray, path: PathLike) -> None:
    """Write a finite array as NPY v1.0; float32 stays float32, all else becomes float64."""
    path = Path(path)
    array = np.asarray(array)
    target = "<f4" if array.dtype == np.float32 else "<f8"
    array = np.ascontiguousarray(array.astype(target, copy=False))
    if not 1 <= array.ndim <= MAX_AXES:
        raise ShapeError(f"arrays need 1 to {MAX_AXES} axes, got {array.ndim}")
    if not np.all(np.isfinite(array)):
        raise DataError("refusing to write non-finite values", path=str(path))
    try:
        with path.open("wb") as fh:
            npformat.write_array(fh, array, version=(1, 0), allow_pickle=False)
    except OSError as exc:
        raise StoreIOError(f"cannot write {path}: {exc.strerror or exc}", path=str(path)) from exc


def flatten_layer(tensor: np.ndarray, mode: FlattenMode = FlattenMode.FLATTEN_ALL) -> np.ndarray:
    """Turn an n×c×(t)×h×w tensor into an n×p float64 matrix.

    ``flatten_all`` keeps every value in C order; ``spatial_mean`` averages
    every axis after the channel axis, leaving one feature per channel.
    """
    tensor = np.asarray(tensor)
    if tensor.ndim < 2:
        raise ShapeError(f"activations need an example axis and features, got {tensor.ndim} axes")
    n = tensor.shape[0]
    if mode == FlattenMode.FLATTEN_ALL:
        return tensor.reshape(n, -1).astype(np.float64)
    channels = tensor.shape[1]
    return tensor.reshape(n, channels, -1).astype(np.float64).mean(axis=2)


def _read_manifest(path: Path) -> ActivationManifest:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StoreIOError(f"cannot read manifest {path}: {exc.strerror or exc}", path=str(path)) from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc.msg}", path=str(path)) from exc
    try:
        return ActivationManifest.model_validate(document)
    except ValidationError as exc:
        raise ManifestError(
            f"manifest failed validation with {exc.error_count()} error(s)",
            path=str(path),
            errors=[f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors()]
        ) from exc


def _load_layer(entry: ManifestLayer, root: Path, mode: FlattenMode) -> LayerActivations:
    array = read_array(root / entry.file)
    if list(array.shape) != entry.shape:
        raise ManifestError(
            f"layer {entry.index} array has shape {list(array.shape)}, manifest says {entry.shape}",
            layer_index=entry.index
        )

    if entry.flatten is None:
        data = flatten_layer(array, mode)
        source_shape = tuple(array.shape)
        used = mode
    elif array.ndim != 2:
        raise ManifestError(
            f"layer {entry.index} is marked as flattened but has {array.ndim} axes",
            layer_index=entry.index
        )
    else:
        source_shape = tuple(entry.source_shape) if entry.source_shape else tuple(array.shape)
        used = entry.flatten
        data = array
        # A fully flattened layer can still be reduced to channel means.
        if entry.flatten == FlattenMode.FLATTEN_ALL and mode == FlattenMode.SPATIAL_MEAN:
            if prod(source_shape) != array.size:
                raise ManifestError(
                    f"layer {entry.index} source_shape does not match stored data",
                    layer_index=entry.index
                )
            data = flatten_layer(array.reshape(source_shape), mode)
            used = mode

    try:
        return LayerActivations(
            layer_index=entry.index,
            layer_name=entry.name,
            data=data,
            source_shape=source_shape,
            mode=used
        )
    except ValidationError as exc:
        raise ManifestError(
            f"layer {entry.index} is inconsistent: {exc.errors()[0]['msg']}",
            layer_index=entry.index
        ) from exc


def load_activation_set(
    manifest_path: PathLike,
    mode: FlattenMode = FlattenMode.FLATTEN_ALL
) -> ActivationSet:
    """Load a manifest and its layer arrays into an :class:`ActivationSet`."""
    manifest_path = Path(manifest_path)
    manifest = _read_manifest(manifest_path)

    indices = [layer.index for layer in manifest.layers]
    duplicates = sorted({i for i in indices if indices.count(i) > 1})
    if duplicates:
        raise ManifestError(f"duplicate layer index {duplicates}", path=str(manifest_path))

    root = manifest_path.parent
    layers = [
        _load_layer(entry, root, mode)
        for entry in sorted(manifest.layers, key=lambda layer: layer.index)
    ]

    counts = {layer.layer_index: layer.n_examples for layer in layers}
    if len(set(counts.values())) != 1:
        raise ConsistencyError(
            "layers disagree on example count",
            path=str(manifest_path),
            example_counts=counts
        )
    n = layers[0].n_examples
    if n < MIN_EXAMPLES:
        raise InsufficientSamplesError(
            f"activation set has {n} examples, at least {MIN_EXAMPLES} required",
            path=str(manifest_path)
        )

    try:
        aset = ActivationSet(
            model_id=manifest.model_id,
            family=manifest.family,
            depth=manifest.depth,
            fold=manifest.fold,
            transform_tag=manifest.transform,
            layers=layers,
            examples_hash=manifest.examples_hash,
            dataset=manifest.dataset
        )
    except ValidationError as exc:
        raise ManifestError(
            f"manifest describes an invalid activation set: {exc.errors()[0]['msg']}",
            path=str(manifest_path)
        ) from exc

    logger.info(
        "activation_set_loaded",
        model_id=aset.model_id,
        depth=aset.depth,
        fold=aset.fold,
        layers=len(aset.layers),
        n_examples=n,
        mode=mode.value
    )
    return aset


def write_activation_set(
    aset: ActivationSet,
    directory: PathLike,
    transform_spec: Optional[TransformSpec] = None
) -> Path:
    """Write one NPY file per layer plus ``manifest.json``; returns the manifest path."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StoreIOError(f"cannot create {directory}: {exc.strerror or exc}", path=str(directory)) from exc

    entries: List[ManifestLayer] = []
    for layer in aset.layers:
        file_name = f"layer_{layer.layer_index:02d}.npy"
        write_array(layer.data, directory / file_name)
        entries.append(
            ManifestLayer(
                index=layer.layer_index,
                name=layer.layer_name,
                file=file_name,
                shape=list(layer.data.shape),
                flatten=layer.mode,
                source_shape=list(layer.source_shape)
            )
        )

    manifest = ActivationManifest(
        model_id=aset.model_id,
        family=aset.family,
        depth=aset.depth,
        fold=aset.fold,
        transform=aset.transform_tag,
        layers=entries,
        examples_hash=aset.examples_hash,
        dataset=aset.dataset,
        transform_spec=transform_spec
    )
    manifest_path = directory / MANIFEST_NAME
    document = json.dumps(manifest.model_dump(mode="json", exclude_none=True), indent=2, sort_keys=True)
    try:
        manifest_path.write_text(document + "\n", encoding="utf-8")
    except OSError as exc:
        raise StoreIOError(f"cannot write {manifest_path}: {exc.strerror or exc}", path=str(manifest_path)) from exc

    logger.info("activation_set_written", model_id=aset.model_id, path=str(manifest_path))
    return manifest_path


def find_manifests(directory: PathLike) -> List[Path]:
    """All ``manifest.json`` files below a directory, sorted by path."""
    return sorted(Path(directory).rglob(MANIFEST_NAME))
