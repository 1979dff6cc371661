"""HSIC estimators, CKA scores and the Pearson waveform metric.

All accumulation happens in float64. Linear-kernel Gram matrices are built
from column-centered features; both HSIC estimators are invariant to that
shift and it keeps constant representations exactly zero.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from app.core.exceptions import (
    ArgumentError,
    DegenerateRepresentationError,
    InsufficientSamplesError,
    ShapeError,
)
from app.models.activation import MIN_EXAMPLES
from app.models.cka import CkaConfig, Estimator
from app.models.kernel import GramMatrix, KernelKind
from app.services.kernel_core import center_gram, gram_linear, gram_rbf

logger = structlog.get_logger(__name__)

# Relative spread below which a feature column counts as constant
CONSTANT_TOLERANCE = 1e-12


def _check_pair(K: GramMatrix, L: GramMatrix, minimum: int) -> int:
    if K.values.shape != L.values.shape:
        raise ShapeError(f"Gram matrices differ in size: {K.n} vs {L.n}")
    if K.n < minimum:
        raise InsufficientSamplesError(
            f"estimator needs at least {minimum} examples, got {K.n}", n_examples=K.n
        )
    return K.n


def hsic_biased(K: GramMatrix, L: GramMatrix) -> float:
    """tr(Kc·Lc) / (n-1)²."""
    n = _check_pair(K, L, 2)
    Kc = K if K.centered else center_gram(K)
    Lc = L if L.centered else center_gram(L)
    return float(np.sum(Kc.values * Lc.values)) / (n - 1) ** 2


def hsic_unbiased(K: GramMatrix, L: GramMatrix) -> float:
    """U-statistic HSIC on diagonal-free Gram matrices; may be slightly negative."""
    n = _check_pair(K, L, MIN_EXAMPLES)
    Kt = np.array(K.values)
    Lt = np.array(L.values)
    np.fill_diagonal(Kt, 0.0)
    np.fill_diagonal(Lt, 0.0)

    trace_term = float(np.sum(Kt * Lt))
    sum_term = float(Kt.sum()) * float(Lt.sum()) / ((n - 1) * (n - 2))
    cross_term = 2.0 / (n - 2) * float(np.sum(Kt.sum(axis=1) * Lt.sum(axis=1)))
    return (trace_term + sum_term - cross_term) / (n * (n - 3))


ESTIMATORS: Dict[Estimator, Callable[[GramMatrix, GramMatrix], float]] = {
    Estimator.BIASED: hsic_biased,
    Estimator.UNBIASED: hsic_unbiased,
}


def _as_representation(X: np.ndarray, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"{name} must be an n×p matrix, got {X.ndim} axes")
    return X


def _check_not_constant(X: np.ndarray, name: str) -> None:
    spread = np.ptp(X, axis=0)
    scale = float(np.max(np.abs(X))) if X.size else 0.0
    if np.all(spread <= CONSTANT_TOLERANCE * scale):
        raise DegenerateRepresentationError(f"{name} is constant across examples")


def layer_gram(X: np.ndarray, cfg: CkaConfig, name: str = "representation") -> GramMatrix:
    """Gram matrix of one representation under ``cfg``'s kernel."""
    X = _as_representation(X, name)
    _check_not_constant(X, name)
    if cfg.kernel == KernelKind.LINEAR:
        return gram_linear(X - X.mean(axis=0))
    return gram_rbf(X, cfg.sigma_frac)


def _normalize(xy: float, xx: float, yy: float) -> float:
    if not (np.isfinite(xx) and xx > 0.0):
        raise DegenerateRepresentationError("first representation has no self-dependence", self_hsic=xx)
    if not (np.isfinite(yy) and yy > 0.0):
        raise DegenerateRepresentationError("second representation has no self-dependence", self_hsic=yy)
    value = xy / np.sqrt(xx * yy)
    if not np.isfinite(value):
        raise DegenerateRepresentationError("CKA is not finite")
    return float(value)


def cka_from_grams(
    K: GramMatrix,
    L: GramMatrix,
    estimator: Estimator = Estimator.UNBIASED,
    self_k: Optional[float] = None,
    self_l: Optional[float] = None
) -> float:
    """Normalize HSIC(K, L) by the self-HSIC values, computing those if not given."""
    hsic = ESTIMATORS[estimator]
    xy = hsic(K, L)
    xx = hsic(K, K) if self_k is None else self_k
    yy = hsic(L, L) if self_l is None else self_l
    return _normalize(xy, xx, yy)


def cka(X: np.ndarray, Y: np.ndarray, cfg: Optional[CkaConfig] = None) -> float:
    """CKA between two representations of the same examples.

    Unbiased results are returned raw and may dip below zero.
    """
    cfg = cfg or CkaConfig()
    X = _as_representation(X, "X")
    Y = _as_representation(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ShapeError(f"representations differ in example count: {X.shape[0]} vs {Y.shape[0]}")
    if cfg.minibatch_size is not None:
        return minibatch_cka(split_minibatches(X, Y, cfg.minibatch_size), cfg)
    K = layer_gram(X, cfg, "X")
    L = layer_gram(Y, cfg, "Y")
    return cka_from_grams(K, L, cfg.estimator)


def cka_linear_feature(X: np.ndarray, Y: np.ndarray) -> float:
    """Linear CKA in feature space: ‖YᵀX‖²_F / (‖XᵀX‖_F ‖YᵀY‖_F) on centered columns."""
    X = _as_representation(X, "X")
    Y = _as_representation(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ShapeError(f"representations differ in example count: {X.shape[0]} vs {Y.shape[0]}")
    _check_not_constant(X, "X")
    _check_not_constant(Y, "Y")
    X = X - X.mean(axis=0)
    Y = Y - Y.mean(axis=0)
    xy = np.linalg.norm(Y.T @ X) ** 2
    xx = np.linalg.norm(X.T @ X)
    yy = np.linalg.norm(Y.T @ Y)
    if xx <= 0.0 or yy <= 0.0:
        raise DegenerateRepresentationError("representation has no variance")
    return float(xy / (xx * yy))


def split_minibatches(
    X: np.ndarray,
    Y: np.ndarray,
    size: int
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Consecutive example batches; a remainder under four examples joins the previous batch."""
    X = _as_representation(X, "X")
    Y = _as_representation(Y, "Y")
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ShapeError(f"representations differ in example count: {n} vs {Y.shape[0]}")
    if size < MIN_EXAMPLES:
        raise ArgumentError(f"minibatch size must be at least {MIN_EXAMPLES}, got {size}")
    if n < MIN_EXAMPLES:
        raise InsufficientSamplesError(f"need at least {MIN_EXAMPLES} examples, got {n}")

    starts = list(range(0, n, size))
    if len(starts) > 1 and n - starts[-1] < MIN_EXAMPLES:
        starts.pop()
    ends = starts[1:] + [n]
    return [(X[a:b], Y[a:b]) for a, b in zip(starts, ends)]


def minibatch_cka(
    batches: Sequence[Tuple[np.ndarray, np.ndarray]],
    cfg: Optional[CkaConfig] = None
) -> float:
    """Ratio of mean unbiased HSIC values accumulated over batches."""
    cfg = cfg or CkaConfig()
    if cfg.estimator != Estimator.UNBIASED:
        raise ArgumentError("minibatch CKA requires the unbiased estimator")
    if not batches:
        raise ArgumentError("no batches given")

    dims = None
    xy, xx, yy = [], [], []
    for i, (Xi, Yi) in enumerate(batches):
        Xi = _as_representation(Xi, "X")
        Yi = _as_representation(Yi, "Y")
        if Xi.shape[0] != Yi.shape[0]:
            raise ShapeError(f"batch {i} pairs {Xi.shape[0]} and {Yi.shape[0]} examples")
        if Xi.shape[0] < MIN_EXAMPLES:
            raise InsufficientSamplesError(
                f"batch {i} has {Xi.shape[0]} examples, at least {MIN_EXAMPLES} required", batch=i
            )
        if dims is None:
            dims = (Xi.shape[1], Yi.shape[1])
        elif dims != (Xi.shape[1], Yi.shape[1]):
            raise ShapeError(f"batch {i} changes feature dimensions")
        K = layer_gram(Xi, cfg, "X")
        L = layer_gram(Yi, cfg, "Y")
        xy.append(hsic_unbiased(K, L))
        xx.append(hsic_unbiased(K, K))
        yy.append(hsic_unbiased(L, L))

    logger.debug("minibatch_cka", batches=len(batches))
    return _normalize(float(np.mean(xy)), float(np.mean(xx)), float(np.mean(yy)))


def _as_waveform(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional")
    return a


def pearson_r(a: np.ndarray, b: np.ndarray) -> float:
    """Sample Pearson correlation of two equal-length waveforms."""
    a = _as_waveform(a, "a")
    b = _as_waveform(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"waveforms differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise InsufficientSamplesError("waveforms need at least 2 samples")
    for name, wave in (("a", a), ("b", b)):
        if np.ptp(wave) <= CONSTANT_TOLERANCE * float(np.max(np.abs(wave))):
            raise DegenerateRepresentationError(f"waveform {name} has zero variance")
    da = a - a.mean()
    db = b - b.mean()
    var_a = float(np.dot(da, da))
    var_b = float(np.dot(db, db))
    return float(np.clip(np.dot(da, db) / np.sqrt(var_a * var_b), -1.0, 1.0))


def negative_pearson_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """1 - r, zero for a perfectly correlated prediction."""
    return 1.0 - pearson_r(pred, target)
