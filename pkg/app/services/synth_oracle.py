"""Synthetic activation sets with planted, known structure."""

import hashlib
import math
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import structlog

from app.core.exceptions import ArgumentError
from app.models.activation import ActivationSet, LayerActivations, TransformTag
from app.models.synthetic import PlantedSpec, SensitivityTag
from app.models.transform import Clip

logger = structlog.get_logger(__name__)

CLIP_CHANNELS = 3
# Pulse-like rates, roughly 48-150 beats per minute
PULSE_HZ = (0.8, 2.5)


def examples_hash(seed: int, n: int) -> str:
    """Alignment key shared by every set generated over the same synthetic examples."""
    return hashlib.sha256(f"synthetic:{seed}:{n}".encode("utf-8")).hexdigest()[:16]


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR decomposition of a Gaussian."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def _layer(index: int, name: str, data: np.ndarray) -> LayerActivations:
    return LayerActivations(layer_index=index, layer_name=name, data=data, source_shape=data.shape)


def planted_block_activations(spec: PlantedSpec) -> ActivationSet:
    """Layers of one block share a Gaussian base, each rotated and noised independently."""
    rng = np.random.default_rng(spec.seed)
    n, p = spec.n_examples, spec.feature_dim
    bases = [rng.standard_normal((n, p)) for _ in spec.blocks]

    layers = []
    for block, base in zip(spec.blocks, bases):
        for position in block:
            rotation = random_orthogonal(p, rng)
            noise = rng.standard_normal((n, p))
            layers.append(_layer(position + 1, f"layer{position + 1}", base @ rotation + spec.noise_sigma * noise))

    logger.debug("planted_blocks_generated", layers=spec.layer_count, blocks=len(bases))
    return ActivationSet(
        model_id=spec.model_id,
        family=spec.family,
        depth=spec.layer_count,
        layers=layers,
        examples_hash=examples_hash(spec.seed, n),
        dataset="synthetic"
    )


def rotated_copy(aset: ActivationSet, seed: int) -> ActivationSet:
    """Every layer right-multiplied by a fresh random orthogonal matrix."""
    rng = np.random.default_rng(seed)
    layers = [
        layer.model_copy(update={"data": _readonly(layer.data @ random_orthogonal(layer.n_features, rng))})
        for layer in aset.layers
    ]
    return aset.model_copy(update={"model_id": f"{aset.model_id}-rotated", "layers": layers})


def _readonly(values: np.ndarray) -> np.ndarray:
    values.flags.writeable = False
    return values


def planted_block_matrix(
    boundaries: Sequence[int],
    layer_count: int,
    within: float = 0.9,
    between: float = 0.1,
    noise_sigma: float = 0.0,
    seed: int = 0
) -> np.ndarray:
    """Symmetric block matrix with unit diagonal and optional symmetric noise."""
    edges = [0, *boundaries, layer_count]
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ArgumentError("boundaries must partition 1..layer_count")
    values = np.full((layer_count, layer_count), float(between))
    for a, b in zip(edges, edges[1:]):
        values[a:b, a:b] = within
    if noise_sigma > 0:
        noise = np.random.default_rng(seed).normal(0.0, noise_sigma, (layer_count, layer_count))
        values += np.triu(noise, 1) + np.triu(noise, 1).T
    np.fill_diagonal(values, 1.0)
    return values


def planted_depth_family(
    base_spec: PlantedSpec,
    depths: Sequence[int],
    shared_groups: Mapping[int, Sequence[str]],
    groups: Optional[Sequence[str]] = None
) -> List[ActivationSet]:
    """One activation set per depth built from shared representation groups.

    Each depth splits its layers into contiguous segments, one per group in
    ``groups`` order. A segment whose group is listed for that depth reuses
    the family-wide base of the group; otherwise it gets a private base.
    """
    if groups is None:
        seen: Dict[str, None] = {}
        for depth in depths:
            for name in shared_groups.get(depth, ()):
                seen.setdefault(name, None)
        groups = list(seen)
    groups = list(groups)
    if not groups:
        raise ArgumentError("depth family needs at least one representation group")
    if len(set(groups)) != len(groups):
        raise ArgumentError("group names must be unique")
    for depth in depths:
        if depth < 1:
            raise ArgumentError(f"depth must be positive, got {depth}")
        if depth not in shared_groups:
            raise ArgumentError(f"no group assignment for depth {depth}")
        unknown = set(shared_groups[depth]) - set(groups)
        if unknown:
            raise ArgumentError(f"depth {depth} names unknown groups {sorted(unknown)}")

    rng = np.random.default_rng(base_spec.seed)
    n, p = base_spec.n_examples, base_spec.feature_dim
    shared = {name: rng.standard_normal((n, p)) for name in groups}
    key = examples_hash(base_spec.seed, n)

    family = []
    for depth in depths:
        segments = np.array_split(np.arange(depth), len(groups))
        layers = []
        for name, segment in zip(groups, segments):
            present = name in shared_groups[depth]
            base = shared[name] if present else rng.standard_normal((n, p))
            suffix = name if present else f"{name}_private"
            for position in segment:
                rotation = random_orthogonal(p, rng)
                noise = rng.standard_normal((n, p))
                index = int(position) + 1
                layers.append(
                    _layer(index, f"layer{index}_{suffix}", base @ rotation + base_spec.noise_sigma * noise)
                )
        family.append(
            ActivationSet(
                model_id=f"{base_spec.model_id}-d{depth:02d}",
                family=base_spec.family,
                depth=depth,
                layers=layers,
                examples_hash=key,
                dataset="synthetic"
            )
        )
    logger.info("depth_family_generated", depths=list(depths), groups=groups)
    return family


def synthetic_clips(
    n: int,
    frames: int = 64,
    size: int = 8,
    frame_rate: float = 30.0,
    seed: int = 0
) -> List[Clip]:
    """Clips of a static texture plus a sinusoidal pulse, values inside [0.2, 0.8]."""
    if n < 1 or frames < 2 or size < 1:
        raise ArgumentError("clips need n >= 1, frames >= 2 and size >= 1")
    rng = np.random.default_rng(seed)
    t = np.arange(frames, dtype=np.float64)
    clips = []
    for _ in range(n):
        texture = rng.uniform(-1.0, 1.0, (size, size))
        rate = rng.uniform(*PULSE_HZ)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        pulse = np.sin(2.0 * math.pi * rate * t / frame_rate + phase)
        frame_values = 0.5 + 0.15 * texture[None, :, :] + 0.15 * pulse[:, None, None]
        stacked = np.repeat(frame_values[:, None, :, :], CLIP_CHANNELS, axis=1)
        clips.append(Clip(frames=stacked, frame_rate=frame_rate))
    return clips


def _probe_inputs(clips: Sequence[Clip], tag: SensitivityTag, codes: np.ndarray) -> np.ndarray:
    if tag == SensitivityTag.SPATIAL:
        rows = []
        for clip in clips:
            mean_frame = clip.frames.mean(axis=0)
            rows.append((mean_frame - mean_frame.mean()).ravel())
        return np.stack(rows)
    if tag == SensitivityTag.TEMPORAL:
        rows = []
        for clip in clips:
            trace = clip.frames.mean(axis=(1, 2, 3))
            rows.append(trace - trace.mean())
        return np.stack(rows)
    return codes


def probe_activations(
    spec: PlantedSpec,
    clips: Sequence[Clip],
    transform_tag: TransformTag = TransformTag.NONE,
    model_id: Optional[str] = None,
    examples_key: Optional[str] = None
) -> ActivationSet:
    """Run a fixed random probe over clips.

    Spatial layers see the de-meaned average frame, temporal layers the
    de-meaned spatial-average trace, untagged layers a per-example code.
    The probe (projections, codes, noise) depends only on ``spec.seed`` and
    the clip geometry, so clean and transformed runs share it.
    """
    if len(clips) != spec.n_examples:
        raise ArgumentError(f"probe expects {spec.n_examples} clips, got {len(clips)}")
    frames_shape = clips[0].frames.shape
    if any(clip.frames.shape != frames_shape for clip in clips):
        raise ArgumentError("clips must share one geometry")
    tags = spec.sensitivity_tags or [SensitivityTag.NONE] * spec.layer_count

    rng = np.random.default_rng(spec.seed)
    n, p = spec.n_examples, spec.feature_dim
    codes = rng.standard_normal((n, p))

    layers = []
    for index, tag in enumerate(tags, start=1):
        inputs = _probe_inputs(clips, tag, codes)
        projection = rng.standard_normal((inputs.shape[1], p)) / math.sqrt(inputs.shape[1])
        noise = rng.standard_normal((n, p))
        layers.append(_layer(index, f"layer{index}_{tag.value}", inputs @ projection + spec.noise_sigma * noise))

    return ActivationSet(
        model_id=model_id or f"{spec.model_id}-{transform_tag.value}",
        family=spec.family,
        depth=spec.layer_count,
        transform_tag=transform_tag,
        layers=layers,
        examples_hash=examples_key,
        dataset="synthetic"
    )
