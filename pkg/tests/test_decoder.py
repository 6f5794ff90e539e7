import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_projection_residual
from sparsejt.decoder import (
    DecodeOutcome,
    Typicality,
    TypicalityParams,
    classify_events,
    decode_exhaustive,
    is_typical,
    metric_union_events,
    score,
    subset_statistics,
)
from sparsejt.ensembles import EnsembleSpec, sample_matrix
from sparsejt.errors import BudgetError, ParameterError
from sparsejt.signal_model import NoiseModel, SparseSignal, observe


def _gauss(m, n, seed=0, trial=0):
    return sample_matrix(EnsembleSpec("gaussian", seed), m, n, trial)


def test_zero_observation_statistic():
    A = _gauss(10, 5)
    y = np.zeros(10)
    # statistic is |0 - 8/10| = 0.8
    assert is_typical(A, [0, 3], y, 1.0, TypicalityParams(0.81)) is Typicality.TYPICAL
    assert is_typical(A, [0, 3], y, 1.0, TypicalityParams(0.5)) is Typicality.ATYPICAL


def test_boundary_is_atypical():
    A = np.eye(4)[:, :2]
    y = np.array([0.0, 0.0, 1.0, 1.0])
    # residual 2, m=4, k=2, sigma^2=1: |2/4 - 2/4| = 0, so pick delta equal to a nonzero statistic
    y2 = np.array([0.0, 0.0, 2.0, 0.0])
    # |4/4 - 1/2| = 0.5
    assert is_typical(A, [0, 1], y2, 1.0, TypicalityParams(0.5)) is Typicality.ATYPICAL
    assert is_typical(A, [0, 1], y2, 1.0, TypicalityParams(0.5 + 1e-12)) is Typicality.TYPICAL
    assert is_typical(A, [0, 1], y, 1.0, TypicalityParams(1e-9)) is Typicality.TYPICAL


def test_observation_in_span_is_atypical():
    A = _gauss(10, 4, seed=1)
    y = A.body[:, [1, 2]] @ np.array([0.3, -2.0])
    assert is_typical(A, [1, 2], y, 1.0, TypicalityParams(0.5)) is Typicality.ATYPICAL


def test_rank_deficient_set():
    body = np.random.default_rng(0).standard_normal((8, 4))
    body[:, 3] = -2 * body[:, 1]
    assert is_typical(body, [1, 3], np.ones(8), 1.0, TypicalityParams(1e9)) is Typicality.RANK_DEFICIENT


def test_is_typical_parameter_errors():
    A = _gauss(5, 4)
    with pytest.raises(ParameterError):
        is_typical(A, [0, 0], np.zeros(5), 1.0, TypicalityParams(0.1))
    with pytest.raises(ParameterError):
        is_typical(A, [0, 4], np.zeros(5), 1.0, TypicalityParams(0.1))
    with pytest.raises(ParameterError):
        TypicalityParams(0.0)


def test_true_support_typical_fraction():
    m, k, trials = 100, 10, 10_000
    params = TypicalityParams(0.2)
    x = SparseSignal(k, tuple(range(k)), (1.0,) * k)
    noise = NoiseModel(1.0)
    hits = 0
    for t in range(trials):
        A = _gauss(m, k, seed=77, trial=t)
        y = observe(A, x, noise, seed=78, trial=t)
        hits += is_typical(A, range(k), y, 1.0, params) is Typicality.TYPICAL
    assert hits / trials >= 1 - 0.927


def test_single_candidate():
    A = _gauss(9, 4, seed=2)
    x = SparseSignal(4, (0, 1, 2, 3), (1.0, 2.0, -1.0, 0.5))
    y = observe(A, x, NoiseModel(1.0), seed=3)
    params = TypicalityParams(0.3)
    out = decode_exhaustive(A, y, 4, 1.0, params)
    assert out.n_subsets == 1
    expected = is_typical(A, range(4), y, 1.0, params)
    assert (out.typical_sets == [(0, 1, 2, 3)]) == (expected is Typicality.TYPICAL)


def test_high_snr_against_dense_oracle():
    n, k, m = 6, 2, 100
    A = _gauss(m, n, seed=12)
    x = SparseSignal(n, (1, 4), (10.0, 10.0))
    sigma_sq, delta = 0.01, 0.005
    y = observe(A, x, NoiseModel(sigma_sq), seed=13)
    out = decode_exhaustive(A, y, k, sigma_sq, TypicalityParams(delta), "strict",
                            true_support=x.support, keep_residuals=True)
    subsets = list(itertools.combinations(range(n), k))
    assert len(out.residuals) == len(subsets) == 15
    oracle_typical = []
    for J, r in zip(subsets, out.residuals):
        ref = dense_projection_residual(A.body[:, J], y)
        assert r == pytest.approx(ref, rel=1e-8)
        if abs(ref / m - (m - k) / m * sigma_sq) < delta:
            oracle_typical.append(J)
    assert out.typical_sets == oracle_typical == [(1, 4)]
    assert out.chosen == (1, 4)
    assert not out.events.any
    assert score(out, x, 0.2, 0.2) == (1, 1, 1)


def test_huge_delta_everything_typical():
    n, k, m = 7, 2, 10
    A = _gauss(m, n, seed=4)
    x = SparseSignal(n, (0, 5), (1.0, 1.0))
    y = observe(A, x, NoiseModel(1.0), seed=5)
    out = decode_exhaustive(A, y, k, 1.0, TypicalityParams(1e9), "strict", true_support=x.support)
    assert len(out.typical_sets) == 21
    assert out.chosen is None
    assert out.events.omega_J_fired
    assert score(out, x, 0.2, 0.2) == (0, 0, 0)


def test_decode_errors():
    A = _gauss(5, 30)
    with pytest.raises(BudgetError):
        decode_exhaustive(A, np.zeros(5), 4, 1.0, TypicalityParams(0.1), max_subsets=1000)
    with pytest.raises(ParameterError):
        decode_exhaustive(A, np.zeros(5), 6, 1.0, TypicalityParams(0.1))
    with pytest.raises(ParameterError):
        decode_exhaustive(A, np.zeros(5), 2, 1.0, TypicalityParams(0.1), mode="greedy")


def _outcome(typical, deficient=(), mode="strict"):
    typical = [tuple(t) for t in typical]
    return DecodeOutcome(mode, 2, 10, typical, [tuple(d) for d in deficient],
                         typical[0] if len(typical) == 1 else None)


def test_classify_events_examples():
    I = (1, 3)
    ev = classify_events(_outcome([I]), I)
    assert not (ev.omega0 or ev.omega_I_complement or ev.omega_J_fired)
    ev = classify_events(_outcome([]), I)
    assert ev.omega_I_complement and not ev.omega0 and not ev.omega_J_fired
    ev = classify_events(_outcome([I, (1, 4)]), I)
    assert ev.omega_J_fired and not ev.omega_I_complement
    ev = classify_events(_outcome([], deficient=[I]), I)
    assert ev.omega0 and not ev.omega_I_complement


def test_first_unique_scores_wrong_set():
    x = SparseSignal(10, (0, 1, 2, 3, 4), (1.0,) * 5)
    out = DecodeOutcome("first_unique", 5, 252, [(0, 1, 2, 3, 9)], [], (0, 1, 2, 3, 9))
    assert score(out, x, 0.3, 0.3) == (0, 1, 1)
    assert score(out, x, 0.1, 0.1) == (0, 0, 0)
    strict = DecodeOutcome("strict", 5, 252, [(0, 1, 2, 3, 9)], [], (0, 1, 2, 3, 9))
    assert score(strict, x, 0.3, 0.3) == (0, 0, 0)
    u = metric_union_events(strict, x, 0.3, 0.3)
    assert u == (True, True, True)  # true support atypical


def test_metric_union_events_wrong_but_acceptable():
    x = SparseSignal(10, (0, 1, 2, 3, 4), (1.0,) * 5)
    out = DecodeOutcome("strict", 5, 252, [(0, 1, 2, 3, 4), (0, 1, 2, 3, 9)], [], None)
    assert metric_union_events(out, x, 0.3, 0.3) == (True, False, False)
    assert metric_union_events(out, x, 0.1, 0.1) == (True, True, True)


def test_enumeration_order_irrelevant():
    n, k, m = 9, 3, 15
    A = _gauss(m, n, seed=6)
    x = SparseSignal(n, (2, 5, 7), (1.0, -1.0, 1.5))
    y = observe(A, x, NoiseModel(0.5), seed=7)
    subsets = np.array(list(itertools.combinations(range(n), k)))
    perm = np.random.default_rng(0).permutation(len(subsets))
    ok1, r1 = subset_statistics(A.body, y, subsets)
    ok2, r2 = subset_statistics(A.body, y, subsets[perm])
    assert np.array_equal(ok1[perm], ok2)
    assert np.allclose(r1[perm], r2, rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["strict", "first_unique"]))
def test_relabeling_symmetry(seed, mode):
    n, k, m = 8, 2, 12
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) / np.sqrt(m)
    support = tuple(sorted(rng.choice(n, k, replace=False).tolist()))
    x = SparseSignal(n, support, (1.0, 1.0))
    y = A[:, list(support)] @ np.ones(k) + 0.1 * rng.standard_normal(m)
    params = TypicalityParams(0.004)
    out = decode_exhaustive(A, y, k, 0.01, params, mode, true_support=support)
    perm = rng.permutation(n)  # new column j holds old column perm[j]
    inv = np.argsort(perm)
    A2 = A[:, perm]
    support2 = tuple(sorted(int(inv[i]) for i in support))
    out2 = decode_exhaustive(A2, y, k, 0.01, params, mode, true_support=support2)
    mapped = sorted(tuple(sorted(int(inv[i]) for i in J)) for J in out.typical_sets)
    assert mapped == sorted(out2.typical_sets)
    assert out.events == out2.events
    x2 = SparseSignal(n, support2, (1.0, 1.0))
    assert score(out, x, 0.3, 0.3) == score(out2, x2, 0.3, 0.3)
