"""Monte Carlo experiment orchestration.

Seeds form a tree: master seed -> grid point (keyed by the (n, k, m) values,
not by grid position) -> trial index. Adding grid points never changes the
results of existing ones, and trials can be split across worker processes in
any way without changing a single bit of output.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from sparsejt.bounds import (
    AchievabilityInputs,
    converse_bernoulli,
    converse_gaussian,
    error_exponent_floor,
    union_bound,
)
from sparsejt.decoder import (
    DEFAULT_MAX_SUBSETS,
    MODES,
    TypicalityParams,
    decode_exhaustive,
    metric_union_events,
    score,
    typicality_statistic,
)
from sparsejt.ensembles import EnsembleSpec, draw_entries, normalize_columns, sample_matrix, with_seed
from sparsejt.errors import BudgetError, ParameterError
from sparsejt.linalg import DEFAULT_RANK_TOL, batch_rank_ok, batch_residual_norm_sq
from sparsejt.rng import DEFAULT_SEED, derive_seed, substream
from sparsejt.signal_model import NoiseModel, SparseSignal, make_signal, observe

log = logging.getLogger(__name__)

METRICS = ("d1", "d2", "d3")
CSV_COLUMNS = (
    "n", "k", "m", "sigma_sq", "delta", "metric", "param", "trials", "seed",
    "err_rate", "se", "omega0_rate", "omegaIc_rate", "omegaJ_rate",
    "union_bound", "vacuous_flag",
)
_INT_COLUMNS = {"n", "k", "m", "trials", "seed", "vacuous_flag"}


@dataclass
class SweepConfig:
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    n_grid: list[int] = field(default_factory=lambda: [12])
    k_grid: list[int] = field(default_factory=lambda: [2])
    m_grid: list[int] = field(default_factory=lambda: [24])
    sigma_sq: float = 0.01
    delta: float = 0.005
    alpha: float = 0.2
    eps_energy: float = 0.2
    mu0: float = 1.0
    mu1: float | None = None
    signs: str = "positive"
    trials: int = 100
    seed: int = DEFAULT_SEED
    mode: str = "strict"
    max_subsets: int = DEFAULT_MAX_SUBSETS
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        if isinstance(self.ensemble, dict):
            self.ensemble = EnsembleSpec(**self.ensemble)
        for name in ("n_grid", "k_grid", "m_grid"):
            vals = getattr(self, name)
            if isinstance(vals, int):
                vals = [vals]
            vals = [int(v) for v in vals]
            if not vals or any(v < 1 for v in vals):
                raise ParameterError(f"{name} must be a nonempty list of positive integers")
            setattr(self, name, vals)
        if self.mode not in MODES:
            raise ParameterError(f"unknown mode {self.mode!r}")
        if not self.sigma_sq > 0 or not self.delta > 0:
            raise ParameterError("sigma_sq and delta must be positive")
        if not 0 < self.alpha < 1 or not 0 < self.eps_energy < 1:
            raise ParameterError("alpha and eps_energy must lie in (0, 1)")
        if self.trials < 1:
            raise ParameterError("trials must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be an unsigned 64-bit integer")
        if self.max_subsets < 1:
            raise ParameterError("max_subsets must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> SweepConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ParameterError(str(exc)) from exc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def points(self) -> list[tuple[int, int, int]]:
        """Grid points (n, k, m) with k <= n and k <= m, sorted."""
        return sorted(
            (n, k, m)
            for n in set(self.n_grid) for k in set(self.k_grid) for m in set(self.m_grid)
            if k <= n and k <= m
        )

    def params(self) -> TypicalityParams:
        return TypicalityParams(self.delta, self.rank_tol)


def load_config(path: str) -> SweepConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: config must be a JSON object")
    return SweepConfig.from_dict(data)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    omega0: bool
    omega_I_c: bool
    omega_J: bool
    d1: int
    d2: int
    d3: int
    # |chosen & I|, None when the decoder made no decision
    overlap: int | None
    # per-metric union events (what each achievability bound controls)
    union_d1: bool
    union_d2: bool
    union_d3: bool


def point_seed(config: SweepConfig, n: int, k: int, m: int) -> int:
    return derive_seed(config.seed, "point", n, k, m)


def run_trial(config: SweepConfig, n: int, k: int, m: int, trial: int) -> TrialRecord:
    seed = point_seed(config, n, k, m)
    A = sample_matrix(with_seed(config.ensemble, seed), m, n, trial=trial)
    x = make_signal(n, k, config.mu0, config.mu1, config.signs, seed=seed, trial=trial)
    y = observe(A, x, NoiseModel(config.sigma_sq), seed=seed, trial=trial)
    out = decode_exhaustive(A, y, k, config.sigma_sq, config.params(), config.mode,
                            true_support=x.support, max_subsets=config.max_subsets)
    d1, d2, d3 = score(out, x, config.alpha, config.eps_energy)
    u1, u2, u3 = metric_union_events(out, x, config.alpha, config.eps_energy)
    overlap = len(set(out.chosen) & set(x.support)) if out.chosen is not None else None
    ev = out.events
    return TrialRecord(trial, ev.omega0, ev.omega_I_complement, ev.omega_J_fired,
                       d1, d2, d3, overlap, u1, u2, u3)


def _run_trials(args) -> list[TrialRecord]:
    config, n, k, m, trials = args
    return [run_trial(config, n, k, m, t) for t in trials]


@dataclass
class PointResult:
    n: int
    k: int
    m: int
    trials: int
    records: list[TrialRecord] = field(repr=False, default_factory=list)
    skipped: str | None = None

    def _rate(self, key) -> float:
        return sum(bool(getattr(r, key)) for r in self.records) / self.trials

    def err_rate(self, metric: str) -> float:
        return 1.0 - sum(getattr(r, metric) for r in self.records) / self.trials

    def union_event_rate(self, metric: str) -> float:
        return self._rate(f"union_{metric}")

    @property
    def omega0_rate(self) -> float:
        return self._rate("omega0")

    @property
    def omegaIc_rate(self) -> float:
        return self._rate("omega_I_c")

    @property
    def omegaJ_rate(self) -> float:
        return self._rate("omega_J")

    def se(self, p: float) -> float:
        return binomial_se(p, self.trials)

    def summary(self) -> dict:
        if self.skipped:
            return {"n": self.n, "k": self.k, "m": self.m, "skipped": self.skipped}
        out = {"n": self.n, "k": self.k, "m": self.m, "trials": self.trials}
        for metric in METRICS:
            e = self.err_rate(metric)
            out[f"err_{metric}"] = e
            out[f"se_{metric}"] = self.se(e)
        out.update(omega0_rate=self.omega0_rate, omegaIc_rate=self.omegaIc_rate,
                   omegaJ_rate=self.omegaJ_rate)
        return out


def binomial_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def _split(trials: int, parts: int) -> list[range]:
    parts = max(1, min(parts, trials))
    bounds = np.linspace(0, trials, parts + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def run_point(config: SweepConfig, n: int, k: int, m: int, workers: int = 1,
              executor: ProcessPoolExecutor | None = None) -> PointResult:
    """Monte Carlo at one grid point; a budget overrun is recorded and the point skipped."""
    if k > m:
        raise ParameterError(f"k={k} exceeds m={m}")
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    total = math.comb(n, k)
    if total > config.max_subsets:
        msg = f"C({n},{k}) = {total} exceeds max_subsets={config.max_subsets}"
        log.warning("skipping point n=%d k=%d m=%d: %s", n, k, m, msg)
        return PointResult(n, k, m, config.trials, skipped=msg)
    if workers <= 1 and executor is None:
        records = _run_trials((config, n, k, m, range(config.trials)))
    else:
        chunks = _split(config.trials, 4 * max(workers, 1))
        jobs = [(config, n, k, m, c) for c in chunks]
        if executor is not None:
            parts = list(executor.map(_run_trials, jobs))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_run_trials, jobs))
        records = [r for part in parts for r in part]
    records.sort(key=lambda r: r.trial)
    return PointResult(n, k, m, config.trials, records)


def run_sweep(config: SweepConfig, workers: int = 1) -> list[PointResult]:
    if workers <= 1:
        return [run_point(config, n, k, m) for n, k, m in config.points()]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [run_point(config, n, k, m, workers, executor=pool) for n, k, m in config.points()]


# ------------------------------------------------------------- bound comparison


def representative_signal(config: SweepConfig, n: int, k: int) -> SparseSignal:
    """Worst-case signal for the bounds: every magnitude at the lower end mu0."""
    return SparseSignal(n, tuple(range(k)), (config.mu0,) * k)


def point_union_bound(config: SweepConfig, n: int, k: int, m: int, metric: str):
    if m <= k:
        return None
    x = representative_signal(config, n, k)
    inputs = AchievabilityInputs(n, k, m, config.sigma_sq, config.delta, x,
                                 entry_variance=config.ensemble.entry_variance(m))
    kw = {"alpha": config.alpha} if metric == "d2" else {"eps_energy": config.eps_energy} if metric == "d3" else {}
    return union_bound(inputs, metric, **kw)


def compare_bounds(config: SweepConfig, results: list[PointResult] | None = None,
                   workers: int = 1) -> list[dict]:
    """Join simulated error rates with the achievability and converse bounds.

    ``above_union`` flags a metric's union-event rate more than 3 SE above its
    union bound; ``below_floor`` flags a d1 error rate more than 3 SE below
    the cutoff-rate floor. Neither should ever fire.
    """
    if results is None:
        results = run_sweep(config, workers)
    rows = []
    for res in results:
        if res.skipped:
            continue
        n, k, m = res.n, res.k, res.m
        x = representative_signal(config, n, k)
        gains = x.gain_profile()
        floor = error_exponent_floor(m, gains.alpha_k, config.sigma_sq)
        conv = converse_gaussian(n, k, gains, config.sigma_sq) if k < n else None
        bern = converse_bernoulli(n, k) if k < n else None
        for metric in METRICS:
            ub = point_union_bound(config, n, k, m, metric)
            err = res.err_rate(metric)
            se = res.se(err)
            u_rate = res.union_event_rate(metric)
            u_se = res.se(u_rate)
            bound = ub.total if ub is not None else math.nan
            rows.append({
                "n": n, "k": k, "m": m, "metric": metric,
                "param": ub.param if ub is not None else None,
                "trials": res.trials,
                "empirical_error": err, "se": se,
                "union_event_rate": u_rate, "union_event_se": u_se,
                "union_bound": bound,
                "bound_vacuous": ub is None or ub.vacuous,
                "above_union": ub is not None and u_rate > bound + 3.0 * u_se,
                "converse_gaussian_m": conv.two_term_max if conv else None,
                "converse_refined_m": conv.refined_single_user if conv else None,
                "converse_bernoulli_m": bern,
                "exponent_floor": floor,
                "below_floor": metric == "d1" and err < floor - 3.0 * se,
            })
    return rows


# ------------------------------------------------------------ quick estimators


def estimate_true_support_events(spec: EnsembleSpec, m: int, k: int, sigma_sq: float,
                                 delta: float, trials: int, mu0: float = 1.0,
                                 rank_tol: float = DEFAULT_RANK_TOL, chunk: int = 4000) -> dict:
    """Monte Carlo rates of rank failure and atypicality of the true support only.

    Only A_I matters for these two events, so each trial draws an m x k
    matrix instead of a full m x n one.
    """
    if not 1 <= k <= m:
        raise ParameterError(f"need 1 <= k <= m, got k={k}, m={m}")
    sd = math.sqrt(sigma_sq)
    vals = np.full(k, float(mu0))
    deficient = atypical = 0
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        mats = np.empty((stop - start, m, k))
        ys = np.empty((stop - start, m))
        for row, t in enumerate(range(start, stop)):
            rng = substream(spec.seed, t, "true-support", m, k)
            a = normalize_columns(draw_entries(spec.kind, rng, (m, k)), spec.normalization)
            mats[row] = a
            ys[row] = a @ vals + sd * rng.standard_normal(m)
        ok = batch_rank_ok(mats, rank_tol)
        deficient += int(np.count_nonzero(~ok))
        res = batch_residual_norm_sq(mats[ok], ys[ok])
        stat = typicality_statistic(res, m, k, sigma_sq)
        atypical += int(np.count_nonzero(stat >= delta))
    p0, p1 = deficient / trials, atypical / trials
    return {
        "trials": trials,
        "omega0_rate": p0, "omega0_se": binomial_se(p0, trials),
        "omegaIc_rate": p1, "omegaIc_se": binomial_se(p1, trials),
    }


# ---------------------------------------------------------------------- output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def result_rows(config: SweepConfig, results: list[PointResult]) -> list[dict]:
    """Canonical rows, one per (n, k, m, metric), sorted."""
    rows = []
    for res in results:
        if res.skipped:
            continue
        for metric in METRICS:
            ub = point_union_bound(config, res.n, res.k, res.m, metric)
            err = res.err_rate(metric)
            rows.append({
                "n": res.n, "k": res.k, "m": res.m,
                "sigma_sq": config.sigma_sq, "delta": config.delta,
                "metric": metric,
                "param": config.alpha if metric == "d2" else config.eps_energy if metric == "d3" else None,
                "trials": res.trials, "seed": int(config.seed),
                "err_rate": err, "se": res.se(err),
                "omega0_rate": res.omega0_rate, "omegaIc_rate": res.omegaIc_rate,
                "omegaJ_rate": res.omegaJ_rate,
                "union_bound": ub.total if ub is not None else None,
                "vacuous_flag": int(ub is None or ub.vacuous),
            })
    rows.sort(key=lambda r: (r["n"], r["k"], r["m"], r["metric"]))
    return rows


def render(rows: list[dict], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        clean = [{c: (None if r[c] is None else r[c]) for c in CSV_COLUMNS} for r in rows]
        return json.dumps(clean, indent=1, sort_keys=False) + "\n"
    raise ParameterError(f"unknown format {fmt!r}; expected csv or json")


def emit(rows: list[dict], fmt: str, path: str | os.PathLike) -> None:
    """Write rows as CSV or JSON; I/O failures are re-raised with the path attached."""
    text = render(rows, fmt)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc


def _parse(col: str, s: str):
    if s == "":
        return None
    if col == "metric":
        return s
    if col in _INT_COLUMNS:
        return int(s)
    return float(s)


def read_rows(path: str | os.PathLike, fmt: str = "csv") -> list[dict]:
    with open(path, newline="") as fh:
        if fmt == "json":
            return json.load(fh)
        reader = csv.DictReader(fh)
        return [{c: _parse(c, r[c]) for c in CSV_COLUMNS} for r in reader]
