"""Gram matrices and double centering."""

import numpy as np
import structlog
from scipy.spatial.distance import pdist, squareform

from app.core.exceptions import DataError, DegenerateBandwidthError, InsufficientSamplesError, ShapeError
from app.models.kernel import GramMatrix, KernelKind

logger = structlog.get_logger(__name__)


def _as_examples(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"expected an n×p matrix, got {X.ndim} axes")
    if X.shape[0] < 2:
        raise InsufficientSamplesError(f"Gram matrices need at least 2 examples, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise DataError("representation contains non-finite values")
    return X


def _symmetrize(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + values.T)


def gram_linear(X: np.ndarray) -> GramMatrix:
    """K = X·Xᵀ."""
    X = _as_examples(X)
    return GramMatrix(values=_symmetrize(X @ X.T), kernel=KernelKind.LINEAR)


def median_bandwidth(X: np.ndarray, sigma_frac: float = 1.0) -> float:
    """sigma_frac times the median Euclidean distance over pairs of distinct rows.

    Repeated rows are left out of the median, so only an input whose rows are
    all identical has no bandwidth.
    """
    X = _as_examples(X)
    if sigma_frac <= 0:
        raise DataError(f"sigma_frac must be positive, got {sigma_frac}")
    distances = pdist(X, metric="euclidean")
    distances = distances[distances > 0.0]
    if distances.size == 0:
        raise DegenerateBandwidthError("all examples are identical", n_examples=X.shape[0])
    median = float(np.median(distances))
    return sigma_frac * median


def gram_rbf(X: np.ndarray, sigma_frac: float = 1.0) -> GramMatrix:
    """K[i, j] = exp(-‖x_i - x_j‖² / (2σ²)) with the median-heuristic σ."""
    X = _as_examples(X)
    sigma = median_bandwidth(X, sigma_frac)
    sq_dists = squareform(pdist(X, metric="sqeuclidean"))
    values = np.exp(-sq_dists / (2.0 * sigma ** 2))
    logger.debug("gram_rbf", n_examples=X.shape[0], sigma=sigma)
    return GramMatrix(values=values, kernel=KernelKind.RBF, sigma=sigma)


def center_gram(K: GramMatrix) -> GramMatrix:
    """H·K·H computed as K - rowmean - colmean + grandmean."""
    values = K.values
    row_mean = values.mean(axis=1, keepdims=True)
    col_mean = values.mean(axis=0, keepdims=True)
    centered = values - row_mean - col_mean + values.mean()
    return K.model_copy(update={"values": _freeze(_symmetrize(centered)), "centered": True})


def center_gram_explicit(K: GramMatrix) -> GramMatrix:
    """Reference centering through the explicit matrix H = I - 11ᵀ/n."""
    n = K.n
    H = np.eye(n) - np.full((n, n), 1.0 / n)
    return K.model_copy(update={"values": _freeze(_symmetrize(H @ K.values @ H)), "centered": True})


def _freeze(values: np.ndarray) -> np.ndarray:
    # model_copy skips validation, so freeze by hand
    values = np.array(values, dtype=np.float64)
    values.flags.writeable = False
    return values
