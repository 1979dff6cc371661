"""Tests for HSIC estimators, CKA and the Pearson waveform metric."""

from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError
from scipy.stats import ortho_group

from app.core.exceptions import (
    ArgumentError,
    DegenerateRepresentationError,
    InsufficientSamplesError,
    ShapeError,
)
from app.models.cka import CkaConfig, Estimator
from app.models.kernel import GramMatrix, KernelKind
from app.services.cka_engine import (
    cka,
    cka_linear_feature,
    hsic_biased,
    hsic_unbiased,
    minibatch_cka,
    negative_pearson_loss,
    pearson_r,
    split_minibatches,
)
from app.services.kernel_core import gram_linear, gram_rbf

BIASED = CkaConfig(estimator=Estimator.BIASED)
RBF = CkaConfig(kernel=KernelKind.RBF)


def _hsic_u_statistic(K: np.ndarray, L: np.ndarray) -> float:
    """Mean of the HSIC core over ordered 4-tuples of distinct examples."""
    n = K.shape[0]
    total, count = 0.0, 0
    for i, j, q, r in permutations(range(n), 4):
        total += K[i, j] * L[i, j] + K[i, j] * L[q, r] - 2.0 * K[i, j] * L[i, q]
        count += 1
    return total / count


def _pair(seed: int, n: int, p: int = 3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    Y = X @ rng.standard_normal((p, p)) + rng.standard_normal((n, p))
    return X, Y


def _hsic_unbiased_expansion(K: np.ndarray, L: np.ndarray) -> float:
    """Unbiased HSIC from its expansion in diagonal-free row sums, one pass over pairs."""
    n = K.shape[0]
    trace = total_k = total_l = cross = 0.0
    for i in range(n):
        row_k = row_l = 0.0
        for j in range(n):
            if i == j:
                continue
            trace += K[i, j] * L[j, i]
            row_k += K[i, j]
            row_l += L[i, j]
        total_k += row_k
        total_l += row_l
        cross += row_k * row_l
    return (trace + total_k * total_l / ((n - 1) * (n - 2)) - 2.0 * cross / (n - 2)) / (n * (n - 3))


def _hsic_biased_double_sum(K: np.ndarray, L: np.ndarray) -> float:
    n = K.shape[0]
    k_rows = [sum(K[i, j] for j in range(n)) / n for i in range(n)]
    l_rows = [sum(L[i, j] for j in range(n)) / n for i in range(n)]
    k_all = sum(k_rows) / n
    l_all = sum(l_rows) / n
    total = 0.0
    for i in range(n):
        for j in range(n):
            kc = K[i, j] - k_rows[i] - k_rows[j] + k_all
            lc = L[i, j] - l_rows[i] - l_rows[j] + l_all
            total += kc * lc
    return total / (n - 1) ** 2


@pytest.mark.parametrize("n", [4, 5, 6])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_unbiased_hsic_matches_u_statistic(n, seed):
    X, Y = _pair(seed, n)
    K, L = gram_linear(X), gram_linear(Y)
    assert hsic_unbiased(K, L) == pytest.approx(_hsic_u_statistic(K.values, L.values), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("n", range(4, 17))
def test_hsic_estimators_match_pairwise_expansions(n):
    for seed in range(50):
        X, Y = _pair(seed, n)
        K, L = gram_linear(X), gram_rbf(Y)
        assert hsic_unbiased(K, L) == pytest.approx(
            _hsic_unbiased_expansion(K.values, L.values), rel=1e-10, abs=1e-10
        )
        assert hsic_biased(K, L) == pytest.approx(
            _hsic_biased_double_sum(K.values, L.values), rel=1e-10, abs=1e-10
        )


def test_biased_hsic_of_identity_pair():
    K = GramMatrix(values=np.eye(2), kernel=KernelKind.LINEAR)
    assert hsic_biased(K, K) == pytest.approx(1.0)


def test_biased_hsic_against_constant_kernel_is_zero(rng):
    K = gram_linear(rng.standard_normal((6, 3)))
    L = GramMatrix(values=np.full((6, 6), 2.5), kernel=KernelKind.LINEAR)
    assert hsic_biased(K, L) == pytest.approx(0.0, abs=1e-12)


def test_unbiased_self_dependence_is_positive(rng):
    K = gram_linear(rng.standard_normal((12, 3)))
    assert hsic_unbiased(K, K) > 0.0


@pytest.mark.parametrize("n", [4, 7, 16])
def test_biased_hsic_matches_trace_formula(n):
    X, Y = _pair(n, n)
    K, L = gram_linear(X), gram_linear(Y)
    H = np.eye(n) - 1.0 / n
    expected = np.trace(K.values @ H @ L.values @ H) / (n - 1) ** 2
    assert hsic_biased(K, L) == pytest.approx(expected, rel=1e-10)


def test_unbiased_hsic_needs_four_examples():
    X, Y = _pair(0, 3)
    with pytest.raises(InsufficientSamplesError):
        hsic_unbiased(gram_linear(X), gram_linear(Y))
    with pytest.raises(InsufficientSamplesError):
        cka(X, Y)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(16, 40), p=st.integers(2, 6))
def test_linear_cka_invariances(seed, n, p):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    Y = np.tanh(X @ rng.standard_normal((p, p))) + 0.3 * rng.standard_normal((n, p))
    Q = ortho_group.rvs(p, random_state=rng.integers(2 ** 31))
    base = cka(X, Y)

    assert cka(Y, X) == pytest.approx(base, abs=1e-10)
    assert cka(X @ Q, Y) == pytest.approx(base, abs=1e-8)
    assert cka(3.5 * X, Y) == pytest.approx(base, abs=1e-8)
    assert cka(X + 10.0, Y) == pytest.approx(base, abs=1e-8)
    assert cka(X, X) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(4, 40))
def test_biased_linear_cka_is_bounded_and_matches_feature_form(seed, n):
    X, Y = _pair(seed, n, p=4)
    value = cka(X, Y, BIASED)
    assert -1e-12 <= value <= 1.0 + 1e-12
    assert value == pytest.approx(cka_linear_feature(X, Y), abs=1e-9)


def test_rbf_cka_is_invariant_to_rotation(rng):
    X = rng.standard_normal((30, 5))
    Q = ortho_group.rvs(5, random_state=3)
    assert cka(X, X @ Q, RBF) == pytest.approx(1.0, abs=1e-9)
    assert cka(X, X, RBF) == pytest.approx(1.0, abs=1e-12)


def test_independent_representations_score_near_zero(rng):
    X = rng.standard_normal((400, 4))
    Y = rng.standard_normal((400, 4))
    assert abs(cka(X, Y)) < 0.05


def test_independent_gaussians_average_to_zero():
    values = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        values.append(cka(rng.standard_normal((64, 8)), rng.standard_normal((64, 8))))
    assert -0.02 <= np.mean(values) <= 0.02


@pytest.mark.parametrize("alpha", [3.7, 1e-13, 1e9])
def test_isotropic_scaling_at_any_magnitude(alpha):
    X, Y = _pair(11, 40, p=5)
    assert cka(alpha * X, Y) == pytest.approx(cka(X, Y), abs=1e-9)
    assert cka(alpha * X, alpha * X) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_general_mixing_changes_linear_cka(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((64, 8))
    Y = X[:, :4] + 0.1 * rng.standard_normal((64, 4))
    # invertible but anisotropic, so not a similarity transform
    M = np.diag(np.geomspace(0.1, 10.0, 8)) @ ortho_group.rvs(8, random_state=seed)
    assert abs(cka(X @ M, Y) - cka(X, Y)) > 1e-3


def test_feature_form_agrees_on_wide_representations(rng):
    X = rng.standard_normal((32, 100))
    Y = X[:, :50] @ rng.standard_normal((50, 50)) + rng.standard_normal((32, 50))
    assert cka_linear_feature(X, Y) == pytest.approx(cka(X, Y, BIASED), abs=1e-8)
    assert cka_linear_feature(X, X) == pytest.approx(1.0, abs=1e-9)


def test_orthogonal_column_spaces_score_zero(rng):
    X = rng.standard_normal((16, 3))
    basis, _ = np.linalg.qr(np.column_stack([np.ones(16), X - X.mean(axis=0)]))
    Z = rng.standard_normal((16, 2))
    Y = Z - basis @ (basis.T @ Z)
    assert cka_linear_feature(X, Y) == pytest.approx(0.0, abs=1e-9)


def test_constant_representation_is_degenerate(rng):
    X = rng.standard_normal((10, 3))
    with pytest.raises(DegenerateRepresentationError) as exc:
        cka(X, np.full((10, 2), 4.2))
    assert exc.value.kind == "degenerate_representation"


def test_example_count_mismatch(rng):
    with pytest.raises(ShapeError):
        cka(rng.standard_normal((10, 3)), rng.standard_normal((11, 3)))


class TestMinibatch:
    def test_split_merges_short_remainder(self, rng):
        X = rng.standard_normal((10, 2))
        batches = split_minibatches(X, X, 4)
        assert [len(a) for a, _ in batches] == [4, 6]

    def test_split_keeps_full_remainder(self, rng):
        X = rng.standard_normal((12, 2))
        assert [len(a) for a, _ in split_minibatches(X, X, 4)] == [4, 4, 4]

    def test_batch_size_below_four(self, rng):
        X = rng.standard_normal((12, 2))
        with pytest.raises(ArgumentError):
            split_minibatches(X, X, 3)

    def test_single_batch_equals_full_cka(self, rng):
        X, Y = _pair(5, 32)
        full = cka(X, Y)
        assert minibatch_cka([(X, Y)]) == pytest.approx(full, rel=1e-12)
        assert cka(X, Y, CkaConfig(minibatch_size=32)) == pytest.approx(full, rel=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_batches_track_pooled_cka(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((2048, 8))
        Y = np.tanh(X @ rng.standard_normal((8, 8))) + 0.5 * rng.standard_normal((2048, 8))
        batches = split_minibatches(X, Y, 64)
        assert len(batches) == 32
        assert abs(minibatch_cka(batches) - cka(X, Y)) < 0.05

    def test_self_similarity_is_one(self, rng):
        X = rng.standard_normal((40, 3))
        assert cka(X, X, CkaConfig(minibatch_size=8)) == pytest.approx(1.0, abs=1e-12)

    def test_short_batch_is_rejected(self, rng):
        X = rng.standard_normal((3, 2))
        with pytest.raises(InsufficientSamplesError):
            minibatch_cka([(X, X)])

    def test_biased_estimator_is_rejected(self):
        with pytest.raises(ValidationError):
            CkaConfig(estimator=Estimator.BIASED, minibatch_size=8)
        with pytest.raises(ArgumentError):
            minibatch_cka([(np.eye(4), np.eye(4))], BIASED)


class TestPearson:
    def test_affine_copy_correlates_perfectly(self, rng):
        a = rng.standard_normal(50)
        assert pearson_r(a, 2.0 * a + 1.0) == pytest.approx(1.0)
        assert pearson_r(a, -a) == pytest.approx(-1.0)
        assert negative_pearson_loss(a, 3.0 * a) == pytest.approx(0.0, abs=1e-12)

    def test_constant_waveform(self, rng):
        with pytest.raises(DegenerateRepresentationError):
            pearson_r(rng.standard_normal(10), np.full(10, 0.3))

    def test_length_mismatch(self, rng):
        with pytest.raises(ShapeError):
            pearson_r(rng.standard_normal(10), rng.standard_normal(9))
