import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsejt.ensembles import EnsembleSpec, sample_matrix
from sparsejt.errors import ParameterError
from sparsejt.signal_model import (
    GainProfile,
    NoiseModel,
    SparseSignal,
    d2_error_overlaps,
    make_signal,
    metric_d1,
    metric_d2,
    metric_d3,
    noise_vector,
    observe,
)


def test_full_support():
    x = make_signal(5, 5, mu0=1.0, seed=3)
    assert x.support == (0, 1, 2, 3, 4)
    assert x.values == (1.0,) * 5
    assert x.power == 5.0 and x.min_magnitude == 1.0


def test_fixed_magnitude_energy():
    x = make_signal(8, 2, mu0=2.0, seed=1)
    assert x.power == 8.0 and x.min_magnitude == 2.0


def test_k_greater_than_n():
    with pytest.raises(ParameterError):
        make_signal(3, 4)


def test_signal_validation():
    with pytest.raises(ParameterError):
        SparseSignal(5, (1, 1), (1.0, 2.0))
    with pytest.raises(ParameterError):
        SparseSignal(5, (1, 2), (0.0, 2.0))
    with pytest.raises(ParameterError):
        SparseSignal(5, (1, 5), (1.0, 2.0))
    with pytest.raises(ParameterError):
        NoiseModel(0.0)


def test_support_marginals_uniform():
    counts = np.zeros(100)
    for t in range(10_000):
        x = make_signal(100, 10, mu0=1.0, mu1=2.0, seed=21, trial=t)
        counts[list(x.support)] += 1
        assert all(1.0 <= abs(v) <= 2.0 for v in x.values)
    freq = counts / 10_000
    assert np.all(np.abs(freq - 0.1) <= 0.01)


def test_random_signs():
    vals = np.concatenate([make_signal(10, 5, signs="random", seed=2, trial=t).values for t in range(200)])
    assert set(np.unique(vals).tolist()) == {-1.0, 1.0}


def test_gain_profile():
    g = GainProfile.from_values([0.5, -3.0, 2.0])
    assert g.gains == (3.0, 2.0, 0.5)
    assert g.alpha_k == 0.5


def test_observe_single_spike():
    A = sample_matrix(EnsembleSpec("gaussian", 1), 6, 4)
    x = SparseSignal(4, (2,), (3.5,))
    noise = NoiseModel(0.3)
    y = observe(A, x, noise, seed=9)
    z = noise_vector(6, noise, seed=9)
    assert np.allclose(y, 3.5 * A.body[:, 2] + z)


def test_observe_linearity():
    A = sample_matrix(EnsembleSpec("gaussian", 2), 7, 6)
    noise = NoiseModel(1.0)
    x1 = SparseSignal(6, (0, 3), (1.0, -2.0))
    x2 = SparseSignal(6, (1, 4), (0.5, 4.0))
    x12 = SparseSignal(6, (0, 1, 3, 4), (1.0, 0.5, -2.0, 4.0))
    z = noise_vector(7, noise, seed=5)
    lhs = observe(A, x12, noise, seed=5)
    rhs = observe(A, x1, noise, seed=5) + observe(A, x2, noise, seed=5) - z
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_observe_noise_variance():
    m = 100_000
    A = sample_matrix(EnsembleSpec("gaussian", 3), m, 3)
    x = SparseSignal(3, (0, 2), (1.0, 1.0))
    y = observe(A, x, NoiseModel(0.7), seed=4)
    r = y - A.body @ x.dense()
    assert abs(r @ r / m - 0.7) <= 0.05 * 0.7


def test_observe_dimension_mismatch():
    A = sample_matrix(EnsembleSpec(), 4, 5)
    with pytest.raises(ParameterError):
        observe(A, SparseSignal(6, (0,), (1.0,)), NoiseModel(1.0), seed=0)


def test_metric_examples():
    x = SparseSignal(6, (1, 4), (1.0, 1.0))
    assert metric_d1(x, [1, 4]) == 1
    assert metric_d1(x, [1, 3]) == 0
    assert metric_d1(x, [4, 1]) == 1
    y = SparseSignal(20, tuple(range(10)), (1.0,) * 10)
    nine = list(range(9)) + [15]
    assert metric_d2(y, range(10), 0.05) == 1
    assert metric_d2(y, nine, 0.05) == 0
    assert metric_d2(y, nine, 0.2) == 1
    z = SparseSignal(4, (0, 1), (2.0, 1.0))
    assert metric_d3(z, [0, 1], 0.1) == 1
    assert metric_d3(z, [0, 3], 0.1) == 0
    assert metric_d3(z, [0, 3], 0.3) == 1


def test_metric_parameter_errors():
    x = SparseSignal(4, (0,), (1.0,))
    with pytest.raises(ParameterError):
        metric_d2(x, [0], 1.0)
    with pytest.raises(ParameterError):
        metric_d3(x, [0], 0.0)
    with pytest.raises(ParameterError):
        metric_d1(x, [7])


def test_d2_error_overlaps():
    assert d2_error_overlaps(10, 0.2) == list(range(9))
    assert d2_error_overlaps(10, 0.05) == list(range(10))
    assert d2_error_overlaps(4, 0.5) == [0, 1, 2]


@st.composite
def signal_and_sets(draw):
    n = draw(st.integers(2, 12))
    k = draw(st.integers(1, n))
    support = tuple(sorted(draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k, unique=True))))
    values = tuple(draw(st.floats(0.1, 5.0)) * draw(st.sampled_from([-1, 1])) for _ in range(k))
    J = draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k, unique=True))
    extra = draw(st.sampled_from(support))
    return SparseSignal(n, support, values), J, extra


@settings(max_examples=200, deadline=None)
@given(signal_and_sets(), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_metric_properties(case, alpha, eps):
    x, J, extra = case
    if metric_d1(x, J):
        assert metric_d2(x, J, alpha) == 1
        assert metric_d3(x, J, eps) == 1
    # adding a true-support index never turns success into failure
    bigger = set(J) | {extra}
    assert metric_d2(x, bigger, alpha) >= metric_d2(x, J, alpha)
    assert metric_d3(x, bigger, eps) >= metric_d3(x, J, eps)
