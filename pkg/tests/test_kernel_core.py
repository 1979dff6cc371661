"""Tests for Gram matrices, bandwidth selection and centering."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from pydantic import ValidationError

from app.core.exceptions import DegenerateBandwidthError, InsufficientSamplesError, ShapeError
from app.models.kernel import GramMatrix, KernelKind
from app.services.kernel_core import (
    center_gram,
    center_gram_explicit,
    gram_linear,
    gram_rbf,
    median_bandwidth,
)


def test_linear_gram_is_inner_products(rng):
    X = rng.standard_normal((7, 3))
    K = gram_linear(X)
    np.testing.assert_allclose(K.values, X @ X.T)
    assert K.kernel == KernelKind.LINEAR
    assert K.sigma is None
    assert not K.values.flags.writeable


def test_median_bandwidth():
    X = np.array([[0.0], [1.0], [3.0]])
    # distances 1, 3, 2
    assert median_bandwidth(X) == pytest.approx(2.0)
    assert median_bandwidth(X, sigma_frac=0.5) == pytest.approx(1.0)


def test_identical_examples_have_no_bandwidth():
    with pytest.raises(DegenerateBandwidthError) as exc:
        median_bandwidth(np.ones((5, 2)))
    assert exc.value.kind == "degenerate_bandwidth"


def test_repeated_rows_do_not_collapse_the_bandwidth():
    X = np.array([[0.0], [0.0], [0.0], [0.0], [1.0]])
    assert median_bandwidth(X) == pytest.approx(1.0)
    K = gram_rbf(X)
    assert K.values[0, 4] == pytest.approx(np.exp(-0.5))
    assert K.values[0, 1] == 1.0


def test_two_identical_rows_have_no_bandwidth():
    with pytest.raises(DegenerateBandwidthError):
        gram_rbf(np.array([[0.0], [0.0]]))


@pytest.mark.parametrize("distance", [0.5, 3.0])
def test_rbf_at_one_bandwidth(distance):
    K = gram_rbf(np.array([[0.0, 0.0], [distance, 0.0]]))
    assert K.values[0, 1] == pytest.approx(np.exp(-0.5))


def test_linear_gram_examples():
    np.testing.assert_array_equal(gram_linear(np.eye(2)).values, np.eye(2))
    np.testing.assert_array_equal(gram_linear(np.ones((2, 2))).values, np.full((2, 2), 2.0))


def test_centering_identity():
    centered = center_gram(GramMatrix(values=np.eye(2), kernel=KernelKind.LINEAR))
    np.testing.assert_allclose(centered.values, [[0.5, -0.5], [-0.5, 0.5]])
    assert centered.centered
    np.testing.assert_allclose(center_gram(centered).values, centered.values, atol=1e-12)


def test_centering_removes_constants():
    K = GramMatrix(values=np.full((4, 4), 3.0), kernel=KernelKind.LINEAR)
    np.testing.assert_allclose(center_gram(K).values, 0.0, atol=1e-12)


def test_rbf_gram():
    X = np.array([[0.0], [1.0], [3.0]])
    K = gram_rbf(X)
    assert K.sigma == pytest.approx(2.0)
    np.testing.assert_allclose(np.diag(K.values), 1.0)
    assert K.values[0, 2] == pytest.approx(np.exp(-9.0 / 8.0))


def test_rejects_bad_shapes():
    with pytest.raises(ShapeError):
        gram_linear(np.zeros(4))
    with pytest.raises(InsufficientSamplesError):
        gram_linear(np.zeros((1, 3)))


def test_gram_matrix_must_be_symmetric():
    with pytest.raises(ValidationError):
        GramMatrix(values=np.array([[1.0, 2.0], [0.0, 1.0]]), kernel=KernelKind.LINEAR)


def test_rbf_gram_needs_sigma():
    with pytest.raises(ValidationError):
        GramMatrix(values=np.eye(2), kernel=KernelKind.RBF)


@settings(max_examples=60, deadline=None)
@given(
    X=arrays(
        np.float64,
        st.tuples(st.integers(2, 12), st.integers(1, 5)),
        elements=st.floats(min_value=-10.0, max_value=10.0),
    )
)
def test_centering_matches_explicit_projection(X):
    K = gram_linear(X)
    fast = center_gram(K)
    slow = center_gram_explicit(K)
    n = X.shape[0]
    scale = max(1.0, float(np.abs(K.values).max()))
    np.testing.assert_allclose(fast.values, slow.values, atol=1e-9 * scale)
    np.testing.assert_allclose(fast.values.sum(axis=0), 0.0, atol=1e-9 * scale * n)
    assert np.linalg.eigvalsh(fast.values).min() >= -1e-8 * scale * n
    assert fast.centered
