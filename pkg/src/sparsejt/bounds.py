"""Closed-form achievability and converse bounds.

Rates are in nats unless a function says otherwise. Converse expressions that
are ratios of logarithms are base invariant and are evaluated in base 2, which
keeps values such as ``2 log(64) / log(2) = 12`` exact in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from sparsejt.errors import ParameterError
from sparsejt.signal_model import GainProfile, SparseSignal, d2_error_overlaps

LOW_SNR_THRESHOLD = 0.1
E0_FORM = "gaussian-input cutoff rate: E0 = 0.5 * ln(1 + alpha_k^2 / (2 sigma^2))"


@dataclass(frozen=True)
class AchievabilityInputs:
    n: int
    k: int
    m: int
    sigma_sq: float
    delta: float
    signal: SparseSignal
    c0: float | None = None
    # Per-entry variance of the measurement matrix. The wrong-set bound is stated
    # for unit-variance entries; unit-norm columns (variance 1/m) scale the
    # residual energy floors by this factor.
    entry_variance: float = 1.0

    def __post_init__(self):
        if not (1 <= self.k <= self.n and self.m >= 1):
            raise ParameterError(f"need 1 <= k <= n and m >= 1, got n={self.n} k={self.k} m={self.m}")
        if self.k > self.m:
            raise ParameterError(f"k={self.k} exceeds m={self.m}")
        if not self.sigma_sq > 0 or not self.delta > 0:
            raise ParameterError("sigma_sq and delta must be positive")
        if self.c0 is not None and not self.c0 > 0:
            raise ParameterError("c0 must be positive when given")
        if not self.entry_variance > 0:
            raise ParameterError("entry_variance must be positive")

    @property
    def delta_prime(self) -> float:
        return self.delta * self.m / (self.m - self.k)


class BoundValue(NamedTuple):
    value: float
    vacuous: bool


def _require_m_gt_k(m: int, k: int) -> None:
    if m <= k:
        raise ParameterError(f"bound requires m > k, got m={m}, k={k}")


def atypical_exponent(m: int, k: int, sigma_sq: float, delta: float) -> float:
    _require_m_gt_k(m, k)
    return (delta * delta / (4.0 * sigma_sq * sigma_sq)) * m * m / (m - k + 2.0 * delta / sigma_sq * m)


def prob_atypical_bound(m: int, k: int, sigma_sq: float, delta: float) -> float:
    """Upper bound on Pr(true support not delta-typical); in [0, 2], not clamped."""
    return 2.0 * math.exp(-atypical_exponent(m, k, sigma_sq, delta))


def wrong_set_exponent(m: int, k: int, sigma_sq: float, delta: float, energy: float) -> float:
    """Exponent of the wrong-set bound, or 0.0 when ``energy`` does not exceed delta'."""
    _require_m_gt_k(m, k)
    if energy < 0:
        raise ParameterError("residual energy must be non-negative")
    dp = delta * m / (m - k)
    if energy <= dp:
        return 0.0
    ratio = (energy - dp) / (energy + sigma_sq)
    return (m - k) / 4.0 * ratio * ratio


def prob_wrong_set_bound(m: int, k: int, sigma_sq: float, delta: float, energy: float) -> BoundValue:
    """Bound on Pr(a fixed wrong set with residual energy ``energy`` is typical)."""
    dp = delta * m / (m - k) if m > k else math.inf
    expo = wrong_set_exponent(m, k, sigma_sq, delta, energy)
    return BoundValue(2.0 * math.exp(-expo), energy <= dp)


def _log_comb(a: int, b: int) -> float:
    c = math.comb(a, b)
    return math.log(c) if c > 0 else -math.inf


def logsumexp(xs) -> float:
    xs = [x for x in xs if x != -math.inf]
    if not xs:
        return -math.inf
    top = max(xs)
    return top + math.log(math.fsum(math.exp(x - top) for x in xs))


@dataclass(frozen=True)
class UnionBound:
    metric: str
    param: float | None
    total: float
    log_total: float
    rank_term: float | None
    atypical_term: float
    wrong_set_term: float
    log_wrong_set_term: float
    # (overlap p, number of wrong sets, per-set bound, residual energy floor)
    terms: list[tuple[int, int, float, float]] = field(repr=False)
    vacuous_overlaps: list[int] = field(repr=False)

    @property
    def vacuous(self) -> bool:
        return self.total >= 1.0

    @property
    def rank_term_note(self) -> str:
        if self.rank_term is None:
            return "unquantified: rank-failure exponent c0 not supplied, see the empirical rank sweep"
        return "exp(-c0 m)"


def metric_overlaps(k: int, metric: str, alpha: float | None = None) -> list[int]:
    """Overlaps |I & J| of the wrong sets that count as errors under ``metric``."""
    if metric in ("d1", "d3"):
        return list(range(k))
    if metric == "d2":
        if alpha is None:
            raise ParameterError("metric d2 needs alpha")
        return d2_error_overlaps(k, alpha)
    raise ParameterError(f"unknown metric {metric!r}")


def energy_floor(inputs: AchievabilityInputs, metric: str, p: int,
                 alpha: float | None = None, eps_energy: float | None = None) -> float:
    """Smallest residual energy a wrong set with overlap p can leave under ``metric``."""
    x = inputs.signal
    mu_sq = x.min_magnitude ** 2
    if metric == "d1":
        e = (inputs.k - p) * mu_sq
    elif metric == "d2":
        e = alpha * inputs.k * mu_sq
    elif metric == "d3":
        if eps_energy is None or not 0 < eps_energy < 1:
            raise ParameterError("metric d3 needs eps_energy in (0, 1)")
        e = eps_energy * x.power
    else:
        raise ParameterError(f"unknown metric {metric!r}")
    return e * inputs.entry_variance


def union_bound(inputs: AchievabilityInputs, metric: str = "d1", alpha: float | None = None,
                eps_energy: float | None = None) -> UnionBound:
    """Rank term + atypical-true-support term + wrong-set sum, accumulated in log domain."""
    if metric == "d2" and (alpha is None or not 0 < alpha < 1):
        raise ParameterError("metric d2 needs alpha in (0, 1)")
    n, k, m = inputs.n, inputs.k, inputs.m
    _require_m_gt_k(m, k)
    param = alpha if metric == "d2" else eps_energy if metric == "d3" else None

    terms = []
    logs = []
    vac = []
    for p in metric_overlaps(k, metric, alpha):
        count = math.comb(k, p) * math.comb(n - k, k - p)
        if count == 0:
            continue
        e = energy_floor(inputs, metric, p, alpha, eps_energy)
        per_set = prob_wrong_set_bound(m, k, inputs.sigma_sq, inputs.delta, e)
        if per_set.vacuous:
            vac.append(p)
        expo = wrong_set_exponent(m, k, inputs.sigma_sq, inputs.delta, e)
        logs.append(math.log(count) + math.log(2.0) - expo)
        terms.append((p, count, per_set.value, e))

    log_wrong = logsumexp(logs)
    log_atyp = math.log(2.0) - atypical_exponent(m, k, inputs.sigma_sq, inputs.delta)
    parts = [log_wrong, log_atyp]
    rank_term = None
    if inputs.c0 is not None:
        rank_term = math.exp(-inputs.c0 * m)
        parts.append(-inputs.c0 * m)
    log_total = logsumexp(parts)
    return UnionBound(
        metric=metric,
        param=param,
        total=_safe_exp(log_total),
        log_total=log_total,
        rank_term=rank_term,
        atypical_term=math.exp(log_atyp),
        wrong_set_term=_safe_exp(log_wrong),
        log_wrong_set_term=log_wrong,
        terms=terms,
        vacuous_overlaps=vac,
    )


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


# ---------------------------------------------------------------- converse side


def _gains(g) -> GainProfile:
    return g if isinstance(g, GainProfile) else GainProfile(tuple(g))


def cmac_sumrate_gaussian(gains, sigma_sq: float) -> float:
    """Gaussian-MAC sum capacity 0.5 ln(1 + ||gains||^2 / sigma^2), nats per use.

    The sum rate is symmetric in the gains, so the minimum over gain
    permutations is attained by any ordering.
    """
    if not sigma_sq > 0:
        raise ParameterError("sigma_sq must be positive")
    return 0.5 * math.log1p(_gains(gains).energy / sigma_sq)


def converse_general(n: int, k: int, r_cmac: float) -> float:
    """Measurement lower bound k ln(n/k) / R, with R in nats per channel use."""
    if not 0 < k < n:
        raise ParameterError(f"need 0 < k < n, got k={k}, n={n}")
    if not r_cmac > 0:
        raise ParameterError("r_cmac must be positive")
    return k * math.log(n / k) / r_cmac


@dataclass(frozen=True)
class GaussianConverse:
    single_user_term: float
    sum_rate_term: float
    two_term_max: float
    refined_single_user: float
    low_snr: float
    low_snr_valid: bool


def converse_gaussian(n: int, k: int, gains, sigma_sq: float) -> GaussianConverse:
    if not 0 < k < n:
        raise ParameterError(f"need 0 < k < n, got k={k}, n={n}")
    if not sigma_sq > 0:
        raise ParameterError("sigma_sq must be positive")
    g = _gains(gains)
    if g.k != k:
        raise ParameterError(f"expected {k} gains, got {g.k}")
    snr_k = g.alpha_k ** 2 / sigma_sq
    log_ratio = math.log2(n / k)
    single = 2.0 * log_ratio / math.log2(1.0 + snr_k)
    total = 2.0 * k * log_ratio / math.log2(1.0 + g.energy / sigma_sq)
    refined = math.log2(n - k + 1) / math.log2(1.0 + snr_k)
    low = sigma_sq * math.log(n / k) / g.alpha_k ** 2
    return GaussianConverse(single, total, max(single, total), refined, low, snr_k < LOW_SNR_THRESHOLD)


def converse_bernoulli(n: int, k: int) -> float:
    """Sign-ensemble bound 2k log2(n/k) / log2(pi e k / 2)."""
    if not 0 < k < n:
        raise ParameterError(f"need 0 < k < n, got k={k}, n={n}")
    return 2.0 * k * math.log2(n / k) / math.log2(math.pi * math.e * k / 2.0)


def cutoff_rate(alpha_k: float, sigma_sq: float) -> float:
    if not sigma_sq > 0:
        raise ParameterError("sigma_sq must be positive")
    return 0.5 * math.log1p(alpha_k * alpha_k / (2.0 * sigma_sq))


def error_exponent_floor(m: int, alpha_k: float, sigma_sq: float) -> float:
    """Lower bound exp(-E0 m) on the support-recovery error probability."""
    if m < 0:
        raise ParameterError("m must be non-negative")
    return math.exp(-cutoff_rate(alpha_k, sigma_sq) * m)


def bounds_report(inputs: AchievabilityInputs, alpha: float = 0.2, eps_energy: float = 0.2) -> dict:
    """Every closed-form bound at one operating point, as a JSON-ready record."""
    x = inputs.signal
    g = x.gain_profile()
    n, k, m, s2 = inputs.n, inputs.k, inputs.m, inputs.sigma_sq
    out = {
        "inputs": {
            "n": n, "k": k, "m": m, "sigma_sq": s2, "delta": inputs.delta,
            "delta_prime": inputs.delta_prime if m > k else None,
            "mu": x.min_magnitude, "P": x.power, "gains": list(g.gains),
            "c0": inputs.c0, "entry_variance": inputs.entry_variance,
        },
        "interpretation": {
            "E0": E0_FORM,
            "c0": "supplied" if inputs.c0 is not None else "unquantified (rank term omitted)",
            "rate_unit": "nats",
        },
    }
    if m > k:
        out["prob_atypical_bound"] = prob_atypical_bound(m, k, s2, inputs.delta)
        out["union_bound"] = {}
        for metric, kw in (("d1", {}), ("d2", {"alpha": alpha}), ("d3", {"eps_energy": eps_energy})):
            ub = union_bound(inputs, metric, **kw)
            out["union_bound"][metric] = {
                "param": ub.param, "total": ub.total, "log_total": ub.log_total,
                "rank_term": ub.rank_term, "atypical_term": ub.atypical_term,
                "wrong_set_term": ub.wrong_set_term, "vacuous": ub.vacuous,
                "vacuous_overlaps": ub.vacuous_overlaps,
            }
    if k < n:
        gc = converse_gaussian(n, k, g, s2)
        r = cmac_sumrate_gaussian(g, s2)
        out["converse"] = {
            "cmac_sumrate_nats": r,
            "cmac_sumrate_bits": r / math.log(2.0),
            "general": converse_general(n, k, r),
            "gaussian": gc.__dict__,
            "bernoulli": converse_bernoulli(n, k),
        }
    out["error_exponent_floor"] = error_exponent_floor(m, g.alpha_k, s2)
    out["cutoff_rate_nats"] = cutoff_rate(g.alpha_k, s2)
    return out
