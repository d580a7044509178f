"""Command-line entry point.

    cio run --config maze.cfg --out runs/maze
    cio compare --config maze.cfg --out runs/cmp
    cio solve-contacts wrenches.jsonl --out solutions.jsonl
    cio validate [--mutate]

Exit codes: 0 success, 1 configuration error (or failed validation), 2 simulation error.
"""

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import config as config_mod
from . import validate as validate_mod
from .config import MODES
from .contact_solver import solve_batch
from .errors import ConfigError, SimulationError
from .sim_world import run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_SIM = 0, 1, 2
COMPARE_COLUMNS = ["t", "ex_cio", "ey_cio", "ez_cio", "ex_pred", "ey_pred", "ez_pred", "err_cio", "err_pred"]

log = logging.getLogger("cio")


def _setup_logging():
    level = os.environ.get("CIO_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _config_path(arg):
    if arg is None:
        raise ConfigError("config", "no configuration given (use --config PATH or a bundled name)")
    if os.path.exists(arg):
        return arg
    if arg.removesuffix(".cfg") in config_mod.bundled_names():
        return config_mod.bundled(arg)
    raise ConfigError("config", f"file not found: {arg}")


def _load(args, **overrides):
    cfg = config_mod.load(_config_path(args.config))
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.mode is not None:
        overrides["mode"] = args.mode
    if getattr(args, "no_cio", False):
        overrides["cio"] = False
    return cfg.replace(**overrides) if overrides else cfg


def _run_one(cfg, out_dir):
    runlog = run_scenario(cfg)
    if out_dir:
        runlog.write(out_dir)
    return runlog.metrics


def _batch_worker(job):
    cfg, out_dir = job
    try:
        return cfg.seed, _run_one(cfg, out_dir), None
    except SimulationError as exc:
        return cfg.seed, None, str(exc)


def cmd_run(args):
    cfg = _load(args)
    out = args.out or os.path.join("runs", cfg.name)
    if args.batch <= 1:
        metrics = _run_one(cfg, out)
        print(json.dumps(metrics, indent=2, sort_keys=True))
        return EXIT_OK

    seeds = [cfg.seed + i for i in range(args.batch)]
    jobs = [(cfg.replace(seed=s), os.path.join(out, f"seed_{s}")) for s in seeds]
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(_batch_worker, jobs))
    results.sort(key=lambda r: r[0])
    merged = [{"seed": s, "metrics": m, "error": e} for s, m, e in results]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "batch.json"), "w") as fh:
        json.dump(merged, fh, indent=2, sort_keys=True)
        fh.write("\n")
    failed = [r for r in merged if r["error"]]
    for r in failed:
        print(f"seed {r['seed']}: {r['error']}", file=sys.stderr)
    print(f"{len(merged) - len(failed)}/{len(merged)} runs completed; summary in {out}/batch.json")
    return EXIT_SIM if failed else EXIT_OK


def cmd_compare(args):
    cfg = _load(args, comparison=True, record_ticks=True)
    runlog = run_scenario(cfg)
    out = args.out or os.path.join("runs", f"{cfg.name}_compare")
    runlog.write(out)
    tr = np.asarray(runlog.traces)
    e_cio = tr[:, 7:10] - tr[:, 4:7]
    e_pred = tr[:, 10:13] - tr[:, 4:7]
    with open(os.path.join(out, "compare.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARE_COLUMNS)
        for i in range(tr.shape[0]):
            writer.writerow([repr(float(v)) for v in (tr[i, 0], *e_cio[i], *e_pred[i], tr[i, 13], tr[i, 14])])
    m = runlog.metrics
    summary = {
        "max_err_cio": m["max_err_cio"],
        "max_err_pred": m["max_err_pred"],
        "max_axis_err_cio": [float(v) for v in np.max(np.abs(e_cio), axis=0)],
        "max_axis_err_pred": [float(v) for v in np.max(np.abs(e_pred), axis=0)],
        "t_pred_exceeds_2": m["t_pred_exceeds_2"],
        "n_updates": m["n_updates"],
        "cio_better": m["max_err_cio"] < m["max_err_pred"],
    }
    with open(os.path.join(out, "compare.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_solve_contacts(args):
    from .params import VehicleParams
    p = VehicleParams.load(args.vehicle) if args.vehicle else VehicleParams.load()
    if not os.path.exists(args.input):
        raise ConfigError("input", f"file not found: {args.input}")
    n_ok = n_err = 0
    with open(args.input) as src:
        out = open(args.out, "w") if args.out else sys.stdout
        try:
            for rec in solve_batch(src, p):
                out.write(json.dumps(rec) + "\n")
                if "error" in rec:
                    n_err += 1
                else:
                    n_ok += 1
        finally:
            if out is not sys.stdout:
                out.close()
    print(f"{n_ok} solved, {n_err} flagged", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args):
    checks = validate_mod.run_all(mutate=args.mutate)
    print(validate_mod.format_table(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CONFIG


def _scenario_flags(sp):
    sp.add_argument("--config", help="scenario file, or the name of a bundled one (maze, corridor, ...)")
    sp.add_argument("--seed", type=int, help="override the scenario seed (unsigned 64-bit)")
    sp.add_argument("--duration", type=float, help="override the duration in seconds")
    sp.add_argument("--mode", choices=MODES, help="override the vehicle mode")
    sp.add_argument("--no-cio", action="store_true", help="disable the collision updates (ablation)")
    sp.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="cio", description="Contact-inertial odometry simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="run a scenario and write run.jsonl, metrics.json, traces.csv")
    _scenario_flags(sp)
    sp.add_argument("--batch", type=int, default=1, help="run N consecutive seeds in parallel")
    sp.add_argument("--workers", type=int, default=None, help="worker processes for --batch")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="CIO filter vs prediction-only filter on one sensor stream")
    _scenario_flags(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("solve-contacts", help="contact points from a JSON-lines file of total wrenches")
    sp.add_argument("input")
    sp.add_argument("--out", help="output file (default stdout)")
    sp.add_argument("--vehicle", help="vehicle parameter YAML (default: bundled)")
    sp.set_defaults(func=cmd_solve_contacts)

    sp = sub.add_parser("validate", help="oracle-equivalence suite")
    sp.add_argument("--mutate", action="store_true",
                    help="inject a 1%% error in the solver's wheel half-track; the solver check must fail")
    sp.set_defaults(func=cmd_validate)

    sub.add_parser("list-configs", help="names of the bundled scenarios").set_defaults(
        func=lambda a: print("\n".join(config_mod.bundled_names())) or EXIT_OK)
    return parser


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
