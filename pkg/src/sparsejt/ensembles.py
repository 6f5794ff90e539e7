"""Random measurement ensembles and empirical checks of their tail and rank behaviour."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from sparsejt.errors import ParameterError
from sparsejt.linalg import DEFAULT_RANK_TOL, batch_rank_ok, numerical_rank
from sparsejt.rng import substream

KINDS = ("gaussian", "rademacher", "uniform_pm")
NORMALIZATIONS = ("unit_column", "root_m_column", "raw")

# Subgaussian moment B with Pr(|x| >= t) <= 2 exp(-t^2 / B^2) for all t > 0.
# A variable bounded by M always satisfies it with B = M / sqrt(ln 2); for +/-1
# entries that value is also the smallest valid one, since Pr(|x| >= 1) = 1.
DEFAULT_MOMENTS = {
    "gaussian": math.sqrt(2.0),
    "rademacher": 1.0 / math.sqrt(math.log(2.0)),
    "uniform_pm": math.sqrt(3.0),
}

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str = "gaussian"
    seed: int = 0
    normalization: str = "unit_column"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown ensemble kind {self.kind!r}; expected one of {KINDS}")
        if self.normalization not in NORMALIZATIONS:
            raise ParameterError(
                f"unknown normalization {self.normalization!r}; expected one of {NORMALIZATIONS}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be an unsigned 64-bit integer")

    def entry_variance(self, m: int) -> float:
        """Per-entry variance after normalization (1/m for unit-norm columns)."""
        return 1.0 / m if self.normalization == "unit_column" else 1.0


@dataclass(frozen=True)
class MeasurementMatrix:
    body: np.ndarray
    spec: EnsembleSpec = field(default_factory=EnsembleSpec)

    @property
    def m(self) -> int:
        return self.body.shape[0]

    @property
    def n(self) -> int:
        return self.body.shape[1]

    def columns(self, index) -> np.ndarray:
        return self.body[:, list(index)]


def draw_entries(kind: str, rng: np.random.Generator, shape) -> np.ndarray:
    if kind == "gaussian":
        return rng.standard_normal(shape)
    if kind == "rademacher":
        return 2.0 * rng.integers(0, 2, size=shape) - 1.0
    if kind == "uniform_pm":
        return rng.uniform(-_SQRT3, _SQRT3, size=shape)
    raise ParameterError(f"unknown ensemble kind {kind!r}")


def normalize_columns(a: np.ndarray, normalization: str) -> np.ndarray:
    """Rescale the columns of ``a`` (last two axes are rows, columns)."""
    if normalization == "raw":
        return a
    norms = np.linalg.norm(a, axis=-2, keepdims=True)
    target = 1.0 if normalization == "unit_column" else math.sqrt(a.shape[-2])
    safe = np.where(norms > 0, norms, 1.0)
    return a * (target / safe)


def sample_matrix(spec: EnsembleSpec, m: int, n: int, trial: int = 0) -> MeasurementMatrix:
    """Draw an m x n matrix from ``spec``; identical arguments give an identical matrix.

    ``trial`` selects an independent substream of the same seed, so Monte Carlo
    loops can draw matrix ``t`` without touching matrices ``0..t-1``.
    """
    if m < 1 or n < 1:
        raise ParameterError(f"matrix dimensions must be positive, got {m}x{n}")
    rng = substream(spec.seed, trial, "matrix", m, n)
    raw = draw_entries(spec.kind, rng, (m, n))
    return MeasurementMatrix(normalize_columns(raw, spec.normalization), spec)


@dataclass(frozen=True)
class TailPoint:
    t: float
    empirical: float
    bound: float
    violation: bool


def empirical_subgaussian_tail(
    spec: EnsembleSpec,
    samples: int,
    t_grid,
    moment: float | None = None,
) -> list[TailPoint]:
    """Compare the empirical two-sided tail of raw entries against 2 exp(-t^2/B^2).

    A grid point is flagged when the empirical frequency exceeds the bound by
    more than ``3 * sqrt(bound / samples)``.
    """
    t_grid = [float(t) for t in t_grid]
    if not t_grid:
        raise ParameterError("t_grid must not be empty")
    if samples < 1:
        raise ParameterError("samples must be positive")
    B = DEFAULT_MOMENTS[spec.kind] if moment is None else float(moment)
    rng = substream(spec.seed, 0, "tail", samples)
    x = np.abs(draw_entries(spec.kind, rng, samples))
    out = []
    for t in t_grid:
        emp = float(np.count_nonzero(x >= t)) / samples
        bound = 2.0 * math.exp(-(t * t) / (B * B))
        out.append(TailPoint(t, emp, bound, emp > bound + 3.0 * math.sqrt(bound / samples)))
    return out


@dataclass(frozen=True)
class RankPoint:
    m: int
    frequency: float
    se: float
    failures: int
    trials: int


@dataclass(frozen=True)
class SingularSweep:
    kind: str
    k: int
    points: list[RankPoint]
    # least-squares fit of ln(frequency) = intercept + slope * m over nonzero points
    slope: float | None
    intercept: float | None


def rank_failures(spec: EnsembleSpec, m: int, k: int, trials: int,
                  tol: float = DEFAULT_RANK_TOL, chunk: int = 4096) -> int:
    """Count of trials in which a fresh m x k draw is numerically rank deficient."""
    failures = 0
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        stack = np.stack([
            draw_entries(spec.kind, substream(spec.seed, t, "rank", m, k), (m, k))
            for t in range(start, stop)
        ])
        failures += int(np.count_nonzero(~batch_rank_ok(stack, tol)))
    return failures


def smallest_singular_sweep(spec: EnsembleSpec, k: int, m_grid, trials: int,
                            tol: float = DEFAULT_RANK_TOL) -> SingularSweep:
    """Empirical frequency of rank(m x k submatrix) < k for each m in ``m_grid``."""
    m_grid = [int(m) for m in m_grid]
    if k < 1 or trials < 1:
        raise ParameterError("k and trials must be positive")
    bad = [m for m in m_grid if m < k]
    if bad:
        raise ParameterError(f"every m must be >= k={k}; got {bad}")
    points = []
    for m in m_grid:
        f = rank_failures(spec, m, k, trials, tol)
        p = f / trials
        points.append(RankPoint(m, p, math.sqrt(p * (1 - p) / trials), f, trials))
    nz = [pt for pt in points if pt.frequency > 0]
    slope = intercept = None
    if len({pt.m for pt in nz}) >= 2:
        slope, intercept = np.polyfit([pt.m for pt in nz], [math.log(pt.frequency) for pt in nz], 1)
        slope, intercept = float(slope), float(intercept)
    return SingularSweep(spec.kind, k, points, slope, intercept)


def exhaustive_sign_singular_fraction(m: int, k: int, tol: float = DEFAULT_RANK_TOL) -> float:
    """Exact fraction of all 2^(mk) sign matrices of size m x k with rank < k."""
    if m * k > 20:
        raise ParameterError("exhaustive enumeration limited to m*k <= 20")
    total = singular = 0
    for signs in itertools.product((-1.0, 1.0), repeat=m * k):
        total += 1
        if numerical_rank(np.reshape(signs, (m, k)), tol) < k:
            singular += 1
    return singular / total


def with_seed(spec: EnsembleSpec, seed: int) -> EnsembleSpec:
    return replace(spec, seed=int(seed))
