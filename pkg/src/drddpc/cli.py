"""Command-line interface: ``drddpc {collect,run,bench,sweep,report,tune-lambda}``.

Exit codes: 0 on success, 2 on configuration or usage errors, 3 when a
campaign or run fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from drddpc import bench
from drddpc.controllers import OfflineData, run_closed_loop
from drddpc.data import excite_and_collect, write_csv
from drddpc.model import realize_noise

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3
OUT_DIR_ENV = "DRDDPC_OUT_DIR"

log = logging.getLogger("drddpc")


def _out_dir(args: argparse.Namespace) -> Path:
    return bench.ensure_dir(args.out_dir or os.environ.get(OUT_DIR_ENV) or "results")


def _load(args: argparse.Namespace) -> bench.ExperimentConfig:
    cfg = bench.load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, base_seed=args.seed)
    if getattr(args, "n_runs", None) is not None:
        cfg = dataclasses.replace(cfg, n_runs=args.n_runs)
    if getattr(args, "method", None):
        names = [n for group in args.method for n in group.split(",") if n]
        try:
            cfg = cfg.with_controllers([(n, cfg.controller(n)) for n in names])
        except KeyError as exc:
            raise bench.ConfigError(str(exc.args[0])) from None
    level = getattr(args, "level", 0)
    if not 0 <= level < len(cfg.noise_levels):
        raise bench.ConfigError(f"--level {level} out of range; config has {len(cfg.noise_levels)} noise levels")
    return cfg


def cmd_collect(args: argparse.Namespace) -> int:
    cfg = _load(args)
    seed = cfg.base_seed
    traj = excite_and_collect(cfg.model, cfg.noise_levels[args.level], cfg.T, cfg.input_std, seed)
    path = _out_dir(args) / f"offline_level{args.level}_seed{seed}.csv"
    write_csv(traj, path)
    print(path)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    seed = cfg.base_seed
    noise = cfg.noise_levels[args.level]
    offline = OfflineData.from_trajectory(excite_and_collect(cfg.model, noise, cfg.T, cfg.input_std, seed), cfg.Tp, cfg.Tf)
    real = realize_noise(noise, cfg.model.n, cfg.Tp + cfg.T_run, seed, x0_scale=cfg.x0_scale)
    out = _out_dir(args)
    status = EXIT_OK
    for name, cc in cfg.controllers:
        tr = run_closed_loop(cfg.model, cc, offline, real, cfg.reference_fn(), cfg.T_run)
        path = out / f"trace_{name}_level{args.level}_seed{seed}.csv"
        tr.to_csv(path)
        J = bench.j_test(tr, cc.costs)
        viol = bench.violation_rate(tr, cc.constraints)
        print(f"{name}: J_test={J:.6g} violation={viol:.4g}% fallback_steps={tr.fallback_steps} -> {path}")
    return status


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    t0 = time.perf_counter()
    levels = [args.level] if args.only_level else range(len(cfg.noise_levels))
    reports = [bench.run_monte_carlo(cfg, lv, args.jobs) for lv in levels]
    records = [r for rep in reports for r in rep.records]
    stem = args.name or Path(args.config).stem
    bench.write_runs_csv(records, out / f"{stem}_runs.csv")
    bench.write_report_csv(records, out / f"{stem}_report.csv", cfg.base_seed)
    n_failed = sum(r.failed for r in records)
    bench.write_sidecar(out / f"{stem}_report.json", cfg, "bench", time.perf_counter() - t0, args.jobs,
                        {"n_failed_runs": n_failed, "level_runtime_s": [rep.runtime_s for rep in reports]})
    for rep in reports:
        for s in rep.methods:
            print(f"{rep.level} {s.method}: J_test={s.mean_j:.4f} +- {s.std_j:.4f} "
                  f"violation={s.mean_violation_pct:.2f}% failed={s.n_failed}/{s.n_runs}")
    print(out / f"{stem}_report.csv")
    return EXIT_FAILURE if n_failed else EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    name = cfg.controllers[0][0] if args.method else None
    res = bench.sweep(cfg, level=args.level, jobs=args.jobs, controller=name)
    stem = args.name or Path(args.config).stem
    bench.write_matrix_csv(out / f"{stem}_violation.csv", res.eps_con, res.beta, res.violation)
    bench.write_matrix_csv(out / f"{stem}_cost.csv", res.eps_con, res.beta, res.cost)
    bench.write_runs_csv(res.records, out / f"{stem}_runs.csv")
    n_failed = sum(r.failed for r in res.records)
    bench.write_sidecar(out / f"{stem}_sweep.json", cfg, "sweep", res.runtime_s, args.jobs,
                        {"eps_con": list(res.eps_con), "beta": list(res.beta), "n_failed_runs": n_failed,
                         "rows": "eps_con", "columns": "beta"})
    print(out / f"{stem}_violation.csv")
    print(out / f"{stem}_cost.csv")
    return EXIT_FAILURE if n_failed else EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        records = bench.read_runs_csv(args.runs)
    except (OSError, ValueError) as exc:
        raise bench.ConfigError(str(exc)) from None
    if not records:
        raise bench.ConfigError(f"{args.runs}: no runs recorded")
    base = {r.seed - r.run for r in records}
    if len(base) != 1:
        raise bench.ConfigError(f"{args.runs}: runs do not share one base seed")
    out = Path(args.out) if args.out else _out_dir(args) / (Path(args.runs).stem.removesuffix("_runs") + "_report.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    bench.write_report_csv(records, out, base.pop())
    print(out)
    return EXIT_OK


def cmd_tune_lambda(args: argparse.Namespace) -> int:
    cfg = _load(args)
    best, means = bench.select_lambda_g(cfg, n_runs=args.tune_runs, level=args.level)
    print(json.dumps({"best_lambda_g": best, "mean_j_test": {repr(k): v for k, v in means.items()}}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drddpc", description="Data-driven predictive control experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, runs: bool = True) -> None:
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--seed", type=int, help="override base_seed")
        p.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or ./results)")
        p.add_argument("--method", action="append", help="controller name(s) to run; repeat or comma-separate")
        p.add_argument("--level", type=int, default=0, help="noise level index")
        if runs:
            p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
            p.add_argument("--n-runs", type=int, help="override n_runs")
            p.add_argument("--name", help="output file stem (default: config file stem)")

    p = sub.add_parser("collect", help="run one offline experiment and write its CSV")
    common(p, runs=False)
    p.set_defaults(func=cmd_collect)
    p = sub.add_parser("run", help="one closed loop per controller, written as trace CSVs")
    common(p, runs=False)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("bench", help="Monte-Carlo campaign over every noise level")
    common(p)
    p.add_argument("--only-level", action="store_true", help="run only the level given by --level")
    p.set_defaults(func=cmd_bench)
    p = sub.add_parser("sweep", help="eps_con x beta grid for one robust controller")
    common(p)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("report", help="re-aggregate a stored per-run CSV")
    p.add_argument("--runs", required=True, help="per-run CSV written by bench or sweep")
    p.add_argument("--out", help="report CSV path")
    p.add_argument("--out-dir", help=f"output directory when --out is absent (default ${OUT_DIR_ENV} or ./results)")
    p.set_defaults(func=cmd_report)
    p = sub.add_parser("tune-lambda", help="grid search of the Reg-DeePC weight on held-out seeds")
    common(p, runs=False)
    p.add_argument("--tune-runs", type=int, default=10)
    p.set_defaults(func=cmd_tune_lambda)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # report, never traceback, on a failed campaign
        log.debug("failure", exc_info=True)
        print(f"failed: {exc!r}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
