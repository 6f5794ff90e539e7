"""delta-joint-typicality support decoder with exhaustive subset search.

A size-k index set J is delta-typical with y when A_J has full column rank and

    | ||P_perp(A_J) y||^2 / m  -  (m - k) sigma^2 / m |  <  delta.

The decoder classifies every size-k subset in lexicographic order. Two modes
are offered:

``strict``
    Success only when the true support is the one and only typical set. The
    per-trial error is then exactly the union of the three error events
    (rank failure of the true support, atypical true support, some wrong set
    typical), which makes simulated error rates directly comparable to the
    union bound.
``first_unique``
    The operational decoder: output the typical set if exactly one exists,
    otherwise make no decision. Metrics are scored on whatever set it outputs.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from sparsejt.ensembles import MeasurementMatrix
from sparsejt.errors import BudgetError, ParameterError
from sparsejt.linalg import (
    DEFAULT_RANK_TOL,
    batch_rank_ok,
    batch_residual_norm_sq,
    numerical_rank,
    residual_norm_sq,
)
from sparsejt.signal_model import SparseSignal, metric_d1, metric_d2, metric_d3

DEFAULT_MAX_SUBSETS = 10**7
MODES = ("strict", "first_unique")


class Typicality(enum.Enum):
    TYPICAL = "typical"
    ATYPICAL = "atypical"
    RANK_DEFICIENT = "rank_deficient"


@dataclass(frozen=True)
class TypicalityParams:
    delta: float
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        if not self.rank_tol > 0:
            raise ParameterError("rank_tol must be positive")


@dataclass(frozen=True)
class EventFlags:
    omega0: bool
    omega_I_complement: bool
    omega_J_fired: bool

    @property
    def any(self) -> bool:
        return self.omega0 or self.omega_I_complement or self.omega_J_fired


@dataclass
class DecodeOutcome:
    mode: str
    k: int
    n_subsets: int
    typical_sets: list[tuple[int, ...]]
    rank_deficient_sets: list[tuple[int, ...]]
    chosen: tuple[int, ...] | None
    events: EventFlags | None = None
    # per-subset residual energies in lexicographic order, only when requested
    residuals: np.ndarray | None = field(default=None, repr=False)

    @property
    def rank_failures(self) -> int:
        return len(self.rank_deficient_sets)


def _body(A) -> np.ndarray:
    return A.body if isinstance(A, MeasurementMatrix) else np.asarray(A, dtype=float)


def _check_index_set(J, k: int, n: int) -> tuple[int, ...]:
    J = tuple(sorted(int(j) for j in J))
    if len(J) != k or len(set(J)) != k:
        raise ParameterError(f"index set must hold {k} distinct indices, got {J}")
    if J and (J[0] < 0 or J[-1] >= n):
        raise ParameterError(f"index set {J} out of range for n={n}")
    return J


def typicality_statistic(residual: float | np.ndarray, m: int, k: int, sigma_sq: float):
    return np.abs(residual / m - (m - k) / m * sigma_sq)


def is_typical(A, J, y, sigma_sq: float, params: TypicalityParams) -> Typicality:
    body = _body(A)
    m, n = body.shape
    k = len(J)
    J = _check_index_set(J, k, n)
    if k > m:
        raise ParameterError(f"|J|={k} exceeds m={m}")
    sub = body[:, list(J)]
    if numerical_rank(sub, params.rank_tol) < k:
        return Typicality.RANK_DEFICIENT
    stat = typicality_statistic(residual_norm_sq(sub, y, params.rank_tol), m, k, sigma_sq)
    # boundary equality counts as atypical
    return Typicality.TYPICAL if stat < params.delta else Typicality.ATYPICAL


def subset_statistics(body: np.ndarray, y: np.ndarray, subsets: np.ndarray,
                      rank_tol: float = DEFAULT_RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Full-rank mask and residual energies for every row of ``subsets`` (S, k)."""
    stack = np.transpose(body[:, subsets], (1, 0, 2))
    ok = batch_rank_ok(stack, rank_tol)
    res = np.full(len(subsets), np.nan)
    if ok.any():
        res[ok] = batch_residual_norm_sq(stack[ok], y)
    return ok, res


def _subset_chunks(n: int, k: int, chunk: int):
    it = itertools.combinations(range(n), k)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.intp).reshape(len(block), k)


def decode_exhaustive(
    A,
    y,
    k: int,
    sigma_sq: float,
    params: TypicalityParams,
    mode: str = "strict",
    true_support=None,
    max_subsets: int = DEFAULT_MAX_SUBSETS,
    keep_residuals: bool = False,
    chunk: int = 2048,
) -> DecodeOutcome:
    """Classify every size-k subset and pick the decoder output.

    Raises:
        BudgetError: C(n, k) exceeds ``max_subsets``.
        ParameterError: bad mode, k > m, or y of the wrong length.
    """
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}; expected one of {MODES}")
    body = _body(A)
    y = np.asarray(y, dtype=float)
    m, n = body.shape
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    if k > m:
        raise ParameterError(f"k={k} exceeds m={m}")
    if y.shape != (m,):
        raise ParameterError(f"y has shape {y.shape}, expected ({m},)")
    total = math.comb(n, k)
    if total > max_subsets:
        raise BudgetError(f"C({n},{k}) = {total} subsets exceeds budget {max_subsets}")

    typical: list[tuple[int, ...]] = []
    deficient: list[tuple[int, ...]] = []
    kept = []
    for subsets in _subset_chunks(n, k, chunk):
        ok, res = subset_statistics(body, y, subsets, params.rank_tol)
        stat = typicality_statistic(res, m, k, sigma_sq)
        hit = ok & (stat < params.delta)
        typical.extend(tuple(s) for s in subsets[hit].tolist())
        deficient.extend(tuple(s) for s in subsets[~ok].tolist())
        if keep_residuals:
            kept.append(res)

    chosen = typical[0] if len(typical) == 1 else None
    outcome = DecodeOutcome(
        mode=mode,
        k=k,
        n_subsets=total,
        typical_sets=typical,
        rank_deficient_sets=deficient,
        chosen=chosen,
        residuals=np.concatenate(kept) if keep_residuals else None,
    )
    if true_support is not None:
        outcome.events = classify_events(outcome, true_support)
    return outcome


def classify_events(outcome: DecodeOutcome, true_support) -> EventFlags:
    I = tuple(sorted(int(i) for i in true_support))
    omega0 = I in set(outcome.rank_deficient_sets)
    typical = set(outcome.typical_sets)
    return EventFlags(
        omega0=omega0,
        omega_I_complement=(not omega0) and I not in typical,
        omega_J_fired=any(J != I for J in typical),
    )


def score(outcome: DecodeOutcome, x: SparseSignal, alpha: float, eps_energy: float) -> tuple[int, int, int]:
    """Success bits (d1, d2, d3) for a decode of signal ``x``.

    In strict mode all three bits are 1 only when the true support is the
    unique typical set. In first_unique mode the metrics are evaluated on the
    chosen set, and "no decision" scores 0 everywhere.
    """
    if outcome.chosen is None:
        return 0, 0, 0
    if outcome.mode == "strict":
        ok = int(outcome.chosen == x.support)
        return ok, ok, ok
    J = outcome.chosen
    return metric_d1(x, J), metric_d2(x, J, alpha), metric_d3(x, J, eps_energy)


def metric_union_events(outcome: DecodeOutcome, x: SparseSignal, alpha: float,
                        eps_energy: float) -> tuple[bool, bool, bool]:
    """Per-metric union events, the quantities the achievability bounds control.

    For metric d the event is: rank failure of the true support, or the true
    support atypical, or some typical set that fails metric d. For d1 this is
    exactly the strict-mode error.
    """
    ev = outcome.events if outcome.events is not None else classify_events(outcome, x.support)
    base = ev.omega0 or ev.omega_I_complement
    wrong = [J for J in outcome.typical_sets if J != x.support]
    u1 = base or bool(wrong)
    u2 = base or any(not metric_d2(x, J, alpha) for J in wrong)
    u3 = base or any(not metric_d3(x, J, eps_energy) for J in wrong)
    return u1, u2, u3
