"""Empirical checks of the chi-square-type concentration behind the achievability proof.

The central object is the normalised residual statistic

    V = ||P_perp(A_J) y||^2 / sigma_y^2 - (m - k),   sigma_y^2 = s * sum_{I \\ J} x_i^2 + sigma^2,

where ``s`` is the per-entry variance of the ensemble (1 for raw or
root-m columns, 1/m for unit columns). Under the moment condition with
constants (gamma1, gamma2) its upper and lower tails are bounded by e^{-lambda}
at thresholds gamma2*lambda + sqrt(2 gamma1 lambda) and -sqrt(2 gamma1 lambda).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from sparsejt.ensembles import EnsembleSpec, draw_entries, normalize_columns
from sparsejt.errors import ParameterError
from sparsejt.linalg import DEFAULT_RANK_TOL, batch_rank_ok, batch_residual_norm_sq
from sparsejt.rng import substream
from sparsejt.signal_model import SparseSignal

# Smallest expected exceedance count (trials * e^-lambda) that still resolves a tail;
# 1e4 trials resolve lambda up to 5.
MIN_EXPECTED_COUNT = 1e4 * math.exp(-5.0)

DEFAULT_LAMBDAS = (0.5, 1.0, 2.0)
DEFAULT_T_GRID = (-0.2, -0.1, 0.05, 0.1, 0.2)


@dataclass
class VSampleSet:
    gamma1: float
    gamma2: float
    samples: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return len(self.samples)


def sample_V(spec: EnsembleSpec, x: SparseSignal, J, sigma_sq: float, m: int,
             trials: int, seed: int | None = None, chunk: int = 2000,
             rank_tol: float = DEFAULT_RANK_TOL) -> VSampleSet:
    """Draw V over fresh matrices and noise; rank-deficient draws are dropped and counted."""
    J = tuple(sorted(int(j) for j in J))
    k = x.k
    if len(J) != k or len(set(J)) != k:
        raise ParameterError(f"J must hold {k} distinct indices")
    if any(j < 0 or j >= x.n for j in J):
        raise ParameterError("J out of range")
    if m < k:
        raise ParameterError(f"m={m} must be >= k={k}")
    if not sigma_sq > 0 or trials < 1:
        raise ParameterError("sigma_sq and trials must be positive")
    seed = spec.seed if seed is None else seed

    # only the columns in I u J matter; the rest of A never touches y or A_J
    cols = sorted(set(J) | set(x.support))
    pos = {c: i for i, c in enumerate(cols)}
    j_idx = [pos[j] for j in J]
    i_idx = [pos[i] for i in x.support]
    vals = np.asarray(x.values)
    sigma_y_sq = spec.entry_variance(m) * x.energy_outside(J) + sigma_sq
    sd = math.sqrt(sigma_sq)

    out = []
    dropped = 0
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        mats = np.empty((stop - start, m, len(cols)))
        ys = np.empty((stop - start, m))
        for row, t in enumerate(range(start, stop)):
            rng = substream(seed, t, "V", m, len(cols))
            a = normalize_columns(draw_entries(spec.kind, rng, (m, len(cols))), spec.normalization)
            mats[row] = a
            ys[row] = a[:, i_idx] @ vals + sd * rng.standard_normal(m)
        sub = mats[:, :, j_idx]
        ok = batch_rank_ok(sub, rank_tol)
        dropped += int(np.count_nonzero(~ok))
        if m == k:
            res = np.zeros(int(ok.sum()))
        else:
            res = batch_residual_norm_sq(sub[ok], ys[ok])
        out.append(res / sigma_y_sq - (m - k))

    meta = {
        "ensemble": spec.kind,
        "normalization": spec.normalization,
        "seed": seed,
        "m": m,
        "k": k,
        "overlap": len(set(J) & set(x.support)),
        "sigma_sq": sigma_sq,
        "sigma_y_sq": sigma_y_sq,
        "trials": trials,
        "rank_deficient": dropped,
    }
    return VSampleSet(float(m - k), 2.0, np.concatenate(out), meta)


def upper_threshold(gamma1: float, gamma2: float, lam: float) -> float:
    return gamma2 * lam + math.sqrt(2.0 * gamma1 * lam)


def lower_threshold(gamma1: float, lam: float) -> float:
    return -math.sqrt(2.0 * gamma1 * lam)


@dataclass(frozen=True)
class TailCheck:
    lam: float
    upper_threshold: float
    lower_threshold: float
    upper_freq: float
    lower_freq: float
    bound: float
    resolvable: bool
    upper_violation: bool | None
    lower_violation: bool | None

    @property
    def violated(self) -> bool:
        return bool(self.upper_violation) or bool(self.lower_violation)


def check_tail_bounds(vs: VSampleSet, lambda_grid=DEFAULT_LAMBDAS) -> list[TailCheck]:
    """Empirical Pr(V >= upper) and Pr(V <= lower) against e^{-lambda}.

    Violation means the frequency exceeds the bound by more than
    3 sqrt(bound / trials). Grid points whose tail holds too few expected
    samples are reported with ``resolvable=False`` and no verdict.
    """
    lambda_grid = [float(v) for v in lambda_grid]
    if not lambda_grid:
        raise ParameterError("lambda_grid must not be empty")
    if any(v <= 0 for v in lambda_grid):
        raise ParameterError("lambda values must be positive")
    v = vs.samples
    n = len(v)
    rows = []
    for lam in lambda_grid:
        hi = upper_threshold(vs.gamma1, vs.gamma2, lam)
        lo = lower_threshold(vs.gamma1, lam)
        bound = math.exp(-lam)
        up = float(np.count_nonzero(v >= hi)) / n if n else math.nan
        dn = float(np.count_nonzero(v <= lo)) / n if n else math.nan
        resolvable = n * bound >= MIN_EXPECTED_COUNT
        slack = bound + 3.0 * math.sqrt(bound / n) if n else math.inf
        rows.append(TailCheck(
            lam, hi, lo, up, dn, bound, resolvable,
            up > slack if resolvable else None,
            dn > slack if resolvable else None,
        ))
    return rows


def moment_bound(gamma1: float, gamma2: float, t: float) -> float:
    """Right-hand side of the moment condition, -g1 t - (g1/2) ln(1 - g2 t)."""
    return -gamma1 * t - 0.5 * gamma1 * math.log1p(-gamma2 * t)


@dataclass(frozen=True)
class MomentCheck:
    t: float
    empirical: float
    se: float
    bound: float
    quadratic_bound: float | None
    violation: bool
    quadratic_violation: bool | None


def _log_mgf(v: np.ndarray, t: float) -> float:
    return float(logsumexp(t * v) - math.log(len(v)))


def _bootstrap_se(v: np.ndarray, t: float, n_boot: int, seed: int, batch: int = 16) -> float:
    n = len(v)
    # same resamples for every t
    rng = substream(seed, 0, "bootstrap", n)
    boots = []
    for start in range(0, n_boot, batch):
        idx = rng.integers(0, n, size=(min(batch, n_boot - start), n))
        boots.append(logsumexp(t * v[idx], axis=1) - math.log(n))
    return float(np.std(np.concatenate(boots), ddof=1))


def check_moment_condition(vs: VSampleSet, t_grid=DEFAULT_T_GRID, n_boot: int = 200,
                           seed: int = 0) -> list[MomentCheck]:
    """Empirical log E[e^{tV}] against the moment condition and, for t < 0, g1 t^2.

    The Monte Carlo tolerance is three bootstrap standard errors.
    """
    t_grid = [float(t) for t in t_grid]
    if not t_grid:
        raise ParameterError("t_grid must not be empty")
    lim = 1.0 / vs.gamma2
    bad = [t for t in t_grid if not -lim < t < lim]
    if bad:
        raise ParameterError(f"t must lie strictly inside (-{lim}, {lim}); got {bad}")
    v = vs.samples
    n = len(v)
    rows = []
    for t in t_grid:
        emp = _log_mgf(v, t)
        se = _bootstrap_se(v, t, n_boot, seed) if n_boot > 1 else 0.0
        bound = moment_bound(vs.gamma1, vs.gamma2, t)
        quad = vs.gamma1 * t * t if t < 0 else None
        rows.append(MomentCheck(
            t, emp, se, bound, quad,
            emp > bound + 3.0 * se,
            (emp > quad + 3.0 * se) if quad is not None else None,
        ))
    return rows


# ------------------------------------------------------------- Chernoff algebra


def chernoff_objective(t: float, eps: float, gamma1: float, gamma2: float) -> float:
    return t * eps - gamma1 * t * t / (2.0 * (1.0 - gamma2 * t))


def g_numeric(eps: float, gamma1: float, gamma2: float) -> tuple[float, float]:
    """(sup, argmax) over 0 < t < 1/gamma2 of the Chernoff objective, by bounded Brent search."""
    hi = 1.0 / gamma2
    res = minimize_scalar(
        lambda t: -chernoff_objective(t, eps, gamma1, gamma2),
        bounds=(0.0, hi * (1.0 - 1e-15)),
        method="bounded",
        options={"xatol": 1e-14 * hi, "maxiter": 2000},
    )
    return -float(res.fun), float(res.x)


def t_star(eps: float, gamma1: float, gamma2: float) -> float:
    """Closed-form maximiser of the Chernoff objective."""
    return (1.0 - math.sqrt(gamma1) / math.sqrt(2.0 * eps * gamma2 + gamma1)) / gamma2


@dataclass(frozen=True)
class GCheck:
    gamma1: float
    gamma2: float
    lam: float
    eps: float
    g_numeric: float
    t_numeric: float
    t_closed: float
    g_at_t_closed: float

    @property
    def g_error(self) -> float:
        return abs(self.g_numeric - self.lam)

    @property
    def t_error(self) -> float:
        return abs(self.g_at_t_closed - self.g_numeric)


def verify_g_identity(gamma1: float, gamma2: float, lam: float) -> GCheck:
    """Check numerically that the Chernoff exponent at eps = g2 lam + sqrt(2 g1 lam) is lam."""
    eps = upper_threshold(gamma1, gamma2, lam)
    g, t = g_numeric(eps, gamma1, gamma2)
    tc = t_star(eps, gamma1, gamma2)
    return GCheck(gamma1, gamma2, lam, eps, g, t, tc, chernoff_objective(tc, eps, gamma1, gamma2))


def concentration_report(spec: EnsembleSpec, x: SparseSignal, J, sigma_sq: float, m: int,
                         trials: int, lambda_grid=DEFAULT_LAMBDAS, t_grid=DEFAULT_T_GRID,
                         seed: int | None = None) -> dict:
    vs = sample_V(spec, x, J, sigma_sq, m, trials, seed)
    tails = check_tail_bounds(vs, lambda_grid)
    moments = check_moment_condition(vs, t_grid)
    return {
        "meta": vs.meta,
        "gamma1": vs.gamma1,
        "gamma2": vs.gamma2,
        "mean_V": float(np.mean(vs.samples)) if vs.trials else None,
        "var_V": float(np.var(vs.samples, ddof=1)) if vs.trials > 1 else None,
        "tails": [r.__dict__ for r in tails],
        "moments": [r.__dict__ for r in moments],
        "tail_violations": sum(r.violated for r in tails),
        "moment_violations": sum(r.violation or bool(r.quadratic_violation) for r in moments),
    }
