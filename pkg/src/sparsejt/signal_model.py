"""Sparse signals, the noisy linear observation channel and the three recovery metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sparsejt.ensembles import MeasurementMatrix
from sparsejt.errors import ParameterError
from sparsejt.rng import substream


@dataclass(frozen=True)
class GainProfile:
    """Nonzero magnitudes sorted in descending order."""

    gains: tuple[float, ...]

    def __post_init__(self):
        g = tuple(float(v) for v in self.gains)
        if not g:
            raise ParameterError("gain profile must be nonempty")
        if any(v <= 0 or not math.isfinite(v) for v in g):
            raise ParameterError("gains must be positive and finite")
        object.__setattr__(self, "gains", tuple(sorted(g, reverse=True)))

    @classmethod
    def from_values(cls, values) -> GainProfile:
        return cls(tuple(abs(float(v)) for v in values))

    @property
    def alpha_k(self) -> float:
        return self.gains[-1]

    @property
    def k(self) -> int:
        return len(self.gains)

    @property
    def energy(self) -> float:
        return math.fsum(g * g for g in self.gains)


@dataclass(frozen=True)
class SparseSignal:
    n: int
    support: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        values = tuple(float(v) for v in self.values)
        if len(support) != len(values):
            raise ParameterError("support and values must have equal length")
        if not 1 <= len(support) <= self.n:
            raise ParameterError(f"need 1 <= k <= n, got k={len(support)}, n={self.n}")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ParameterError("support must be strictly increasing")
        if support[0] < 0 or support[-1] >= self.n:
            raise ParameterError("support index out of range")
        if any(v == 0.0 or not math.isfinite(v) for v in values):
            raise ParameterError("stored values must be nonzero and finite")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return len(self.support)

    @property
    def power(self) -> float:
        """Signal energy P = sum of squared values."""
        return math.fsum(v * v for v in self.values)

    @property
    def min_magnitude(self) -> float:
        """mu(x): the smallest nonzero magnitude."""
        return min(abs(v) for v in self.values)

    def gain_profile(self) -> GainProfile:
        return GainProfile.from_values(self.values)

    def dense(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[list(self.support)] = self.values
        return x

    def energy_outside(self, J) -> float:
        """Energy of the entries of x whose index is not in J."""
        J = set(int(j) for j in J)
        return math.fsum(v * v for i, v in zip(self.support, self.values) if i not in J)


@dataclass(frozen=True)
class NoiseModel:
    sigma_sq: float

    def __post_init__(self):
        if not self.sigma_sq > 0:
            raise ParameterError("noise variance must be positive")


def make_signal(n: int, k: int, mu0: float = 1.0, mu1: float | None = None,
                signs: str = "positive", seed: int = 0, trial: int = 0) -> SparseSignal:
    """Random k-sparse signal with a uniformly chosen support.

    Magnitudes are ``mu0`` when ``mu1`` is None, otherwise uniform on
    [mu0, mu1]. ``signs`` is ``"positive"`` or ``"random"`` (independent +/-).
    """
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not mu0 > 0:
        raise ParameterError("mu0 must be positive")
    if mu1 is not None and mu1 < mu0:
        raise ParameterError("mu1 must be >= mu0")
    if signs not in ("positive", "random"):
        raise ParameterError(f"unknown sign law {signs!r}")
    rng = substream(seed, trial, "signal", n, k)
    support = np.sort(rng.choice(n, size=k, replace=False))
    if mu1 is None or mu1 == mu0:
        mags = np.full(k, float(mu0))
    else:
        mags = rng.uniform(mu0, mu1, size=k)
    if signs == "random":
        mags = mags * (2.0 * rng.integers(0, 2, size=k) - 1.0)
    return SparseSignal(n, tuple(support.tolist()), tuple(mags.tolist()))


def noise_vector(m: int, noise: NoiseModel, seed: int, trial: int = 0) -> np.ndarray:
    rng = substream(seed, trial, "noise", m)
    return math.sqrt(noise.sigma_sq) * rng.standard_normal(m)


def observe(A: MeasurementMatrix, x: SparseSignal, noise: NoiseModel,
            seed: int, trial: int = 0) -> np.ndarray:
    """y = A x + z with z ~ N(0, sigma^2 I) drawn from the (seed, trial) substream."""
    body = A.body if isinstance(A, MeasurementMatrix) else np.asarray(A, dtype=float)
    if body.shape[1] != x.n:
        raise ParameterError(f"A has {body.shape[1]} columns but signal dimension is {x.n}")
    clean = body[:, list(x.support)] @ np.asarray(x.values)
    return clean + noise_vector(body.shape[0], noise, seed, trial)


def _overlap(x: SparseSignal, J) -> int:
    J = set(int(j) for j in J)
    if any(j < 0 or j >= x.n for j in J):
        raise ParameterError("index set out of range")
    return len(J.intersection(x.support))


def metric_d1(x: SparseSignal, J) -> int:
    """1 iff J is exactly the support of x."""
    J = sorted(set(int(j) for j in J))
    _overlap(x, J)
    return int(tuple(J) == x.support)


def metric_d2(x: SparseSignal, J, alpha: float) -> int:
    """1 iff the recovered fraction |I & J| / k exceeds 1 - alpha."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    return int(_overlap(x, J) / x.k > 1.0 - alpha)


def metric_d3(x: SparseSignal, J, eps_energy: float) -> int:
    """1 iff the energy of x captured by J exceeds (1 - eps_energy) P."""
    if not 0 < eps_energy < 1:
        raise ParameterError("eps_energy must lie in (0, 1)")
    _overlap(x, J)
    J = set(int(j) for j in J)
    captured = math.fsum(v * v for i, v in zip(x.support, x.values) if i in J)
    return int(captured > (1.0 - eps_energy) * x.power)


def d2_error_overlaps(k: int, alpha: float) -> list[int]:
    """Overlaps p in 0..k-1 for which a size-k set fails metric 2."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    return [p for p in range(k) if not p / k > 1.0 - alpha]
