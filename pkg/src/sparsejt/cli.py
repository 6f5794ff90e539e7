"""Command-line entry point.

Exit codes: 0 success, 2 parameter error, 3 budget error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from sparsejt import __version__
from sparsejt.bounds import AchievabilityInputs, bounds_report
from sparsejt.concentration import DEFAULT_LAMBDAS, DEFAULT_T_GRID, concentration_report, verify_g_identity
from sparsejt.ensembles import EnsembleSpec
from sparsejt.errors import BudgetError, ParameterError
from sparsejt.harness import (
    SweepConfig,
    compare_bounds,
    load_config,
    render,
    result_rows,
    run_point,
    run_sweep,
)
from sparsejt.signal_model import SparseSignal

EXIT_OK, EXIT_PARAM, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("sparsejt")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its keys")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--ensemble", choices=("gaussian", "rademacher", "uniform_pm"))
    common.add_argument("--normalization", choices=("unit_column", "root_m_column", "raw"))
    common.add_argument("--n", type=int, nargs="+", dest="n_grid")
    common.add_argument("--k", type=int, nargs="+", dest="k_grid")
    common.add_argument("--m", type=int, nargs="+", dest="m_grid")
    common.add_argument("--sigma-sq", type=float, dest="sigma_sq")
    common.add_argument("--delta", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--eps-energy", type=float, dest="eps_energy")
    common.add_argument("--mu0", type=float)
    common.add_argument("--mu1", type=float)
    common.add_argument("--trials", type=int)
    common.add_argument("--mode", choices=("strict", "first_unique"))
    common.add_argument("--max-subsets", type=int, dest="max_subsets")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sparsejt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo at a single (n, k, m) point")
    sub.add_parser("sweep", parents=[common], help="Monte Carlo over the full grid")
    sub.add_parser("bounds", parents=[common], help="closed-form bounds only (JSON)")
    vc = sub.add_parser("verify-concentration", parents=[common],
                        help="empirical tail and moment checks of the residual statistic (JSON)")
    vc.add_argument("--overlap", type=int, default=0, help="|I & J| of the tested index set")
    vc.add_argument("--lambdas", type=float, nargs="+", default=list(DEFAULT_LAMBDAS))
    vc.add_argument("--t-grid", type=float, nargs="+", default=list(DEFAULT_T_GRID), dest="t_grid")
    sub.add_parser("version", help="print version")
    return p


_CONFIG_KEYS = {f.name for f in dataclasses.fields(SweepConfig)}


def _config(args) -> SweepConfig:
    base = {}
    if args.config:
        base = load_config(args.config).to_dict()
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    ens = dict(base.get("ensemble") or {})
    if args.ensemble:
        ens["kind"] = args.ensemble
    if args.normalization:
        ens["normalization"] = args.normalization
    if args.seed is not None:
        ens["seed"] = args.seed
    base["ensemble"] = EnsembleSpec(**ens)
    return SweepConfig.from_dict(base)


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {out}: {exc.strerror}") from exc


def _cmd_simulate(args, cfg: SweepConfig) -> int:
    n, k, m = cfg.n_grid[0], cfg.k_grid[0], cfg.m_grid[0]
    res = run_point(cfg, n, k, m, workers=args.workers)
    if res.skipped:
        raise BudgetError(res.skipped)
    _write(render(result_rows(cfg, [res]), args.format or "csv"), args.out)
    return EXIT_OK


def _cmd_sweep(args, cfg: SweepConfig) -> int:
    results = run_sweep(cfg, workers=args.workers)
    _write(render(result_rows(cfg, results), args.format or "csv"), args.out)
    skipped = [r for r in results if r.skipped]
    if args.verbose:
        for row in compare_bounds(cfg, results):
            log.info("%s", row)
    return EXIT_BUDGET if skipped else EXIT_OK


def _cmd_bounds(args, cfg: SweepConfig) -> int:
    records = []
    for n, k, m in cfg.points():
        x = SparseSignal(n, tuple(range(k)), (cfg.mu0,) * k)
        inputs = AchievabilityInputs(n, k, m, cfg.sigma_sq, cfg.delta, x,
                                     entry_variance=cfg.ensemble.entry_variance(m))
        records.append(bounds_report(inputs, cfg.alpha, cfg.eps_energy))
    _write(json.dumps(records, indent=1) + "\n", args.out)
    return EXIT_OK


def _cmd_verify(args, cfg: SweepConfig) -> int:
    n, k, m = cfg.n_grid[0], cfg.k_grid[0], cfg.m_grid[0]
    if not 0 <= args.overlap <= k or n < 2 * k - args.overlap:
        raise ParameterError(f"overlap must be in [0, k] with n >= 2k - overlap (n={n}, k={k})")
    x = SparseSignal(n, tuple(range(k)), (cfg.mu0,) * k)
    J = tuple(range(args.overlap)) + tuple(range(k, 2 * k - args.overlap))
    report = concentration_report(cfg.ensemble, x, J, cfg.sigma_sq, m, cfg.trials,
                                  args.lambdas, args.t_grid)
    checks = [verify_g_identity(g1, g2, lam)
              for g1 in (1.0, 10.0, 90.0) for g2 in (0.5, 2.0, 5.0) for lam in (0.1, 1.0, 5.0)]
    report["g_identity"] = {
        "points": len(checks),
        "max_g_error": max(c.g_error for c in checks),
        "max_t_star_error": max(c.t_error for c in checks),
    }
    _write(json.dumps(report, indent=1, default=float) + "\n", args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        handler = {
            "simulate": _cmd_simulate,
            "sweep": _cmd_sweep,
            "bounds": _cmd_bounds,
            "verify-concentration": _cmd_verify,
        }[args.command]
        return handler(args, cfg)
    except (ParameterError, ValueError) as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
