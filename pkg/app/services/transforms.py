"""Seedable spatial and temporal transformation sets for frame clips.

The spatial set is the composition flip ∘ illumination ∘ blur, so blur runs
first and the flip last. The "all" set runs the spatial set before the
temporal resampling.
"""

import math
from typing import List, Sequence

import numpy as np
import structlog
from scipy.ndimage import correlate1d

from app.core.exceptions import ArgumentError
from app.models.activation import TransformTag
from app.models.transform import Clip, TransformSpec

logger = structlog.get_logger(__name__)

# Axes of a T×C×H×W clip
HEIGHT_AXIS = 2
WIDTH_AXIS = 3


def _clamped(clip: Clip, frames: np.ndarray) -> Clip:
    return clip.with_frames(np.clip(frames, 0.0, 1.0))


def spatial_flip(clip: Clip, apply: bool = True) -> Clip:
    """Mirror every frame left to right."""
    if not apply:
        return clip
    return clip.with_frames(clip.frames[:, :, :, ::-1])


def illumination_noise(clip: Clip, amplitude: float, seed: int) -> Clip:
    """Add one uniform offset in [-amplitude, amplitude] to the whole clip."""
    if amplitude < 0:
        raise ArgumentError(f"amplitude must be non-negative, got {amplitude}")
    if amplitude == 0:
        return clip
    offset = np.random.default_rng(seed).uniform(-amplitude, amplitude)
    return _clamped(clip, clip.frames + offset)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian truncated at radius ceil(3σ)."""
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return kernel / kernel.sum()


def gaussian_blur(clip: Clip, sigma: float) -> Clip:
    """Separable per-frame blur with reflect padding."""
    if sigma < 0:
        raise ArgumentError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return clip
    kernel = gaussian_kernel(sigma)
    frames = correlate1d(clip.frames, kernel, axis=HEIGHT_AXIS, mode="reflect")
    frames = correlate1d(frames, kernel, axis=WIDTH_AXIS, mode="reflect")
    return _clamped(clip, frames)


def source_positions(n_frames: int, frame_rate: float, spec: TransformSpec) -> np.ndarray:
    """Unclamped source position s(t), the integral of the playback speed profile.

    Speed is v(u) = base + amp * sin(2π f u / frame_rate), so
    s(t) = base * t + amp * frame_rate / (2π f) * (1 - cos(2π f t / frame_rate)).
    """
    t = np.arange(n_frames, dtype=np.float64)
    positions = spec.speed_base * t
    if spec.speed_mod_freq > 0 and spec.speed_mod_amplitude > 0:
        omega = 2.0 * math.pi * spec.speed_mod_freq / frame_rate
        positions = positions + spec.speed_mod_amplitude / omega * (1.0 - np.cos(omega * t))
    return positions


def temporal_resample(clip: Clip, spec: TransformSpec) -> Clip:
    """Resample frames at the modulated playback speed, keeping the frame count."""
    n_frames = clip.n_frames
    positions = np.clip(source_positions(n_frames, clip.frame_rate, spec), 0.0, n_frames - 1)
    lower = np.floor(positions).astype(int)
    upper = np.minimum(lower + 1, n_frames - 1)
    weight = (positions - lower)[:, None, None, None]
    frames = (1.0 - weight) * clip.frames[lower] + weight * clip.frames[upper]
    return _clamped(clip, frames)


def apply_spatial(clip: Clip, spec: TransformSpec) -> Clip:
    rng = np.random.default_rng(spec.seed)
    flip = bool(rng.random() < spec.flip_prob)
    illum_seed = int(rng.integers(2 ** 31))
    clip = gaussian_blur(clip, spec.blur_sigma)
    clip = illumination_noise(clip, spec.illum_amplitude, illum_seed)
    return spatial_flip(clip, flip)


def apply_set(clip: Clip, spec: TransformSpec) -> Clip:
    """Apply the transformation set named by ``spec.tag``."""
    if spec.tag == TransformTag.NONE:
        return clip
    if spec.has_spatial:
        clip = apply_spatial(clip, spec)
    if spec.has_temporal:
        clip = temporal_resample(clip, spec)
    return clip


def apply_set_batch(clips: Sequence[Clip], spec: TransformSpec) -> List[Clip]:
    """Apply ``spec`` to every clip; clip i is seeded with ``spec.seed + i``."""
    transformed = [
        apply_set(clip, spec.model_copy(update={"seed": spec.seed + i}))
        for i, clip in enumerate(clips)
    ]
    logger.debug("transform_batch_applied", tag=spec.tag.value, clips=len(clips))
    return transformed
