"""Command line entry points.

``fracxy run <config.json>`` executes one experiment; ``fracxy check``
runs the invariant suite with defaults; ``fracxy dump-field`` prints a
saved field CSV. Exit codes: 0 success, 1 check failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .experiments import ConfigError, ExperimentConfig, load_config, run_experiment


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        report = run_experiment(cfg, out=args.out, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({k: v for k, v in report.items() if k != "config"}, indent=2,
                     sort_keys=True, default=str))
    if cfg.experiment in ("invariants", "flatnorm-check") and not report.get("passed", True):
        return 1
    return 0


def _cmd_check(args) -> int:
    raw = {
        "experiment": "invariants",
        "seed": args.seed if args.seed is not None else 0,
        "out": args.out or "fracxy-check",
        "invariant_sizes": {"vorticity_fields": 20000},
    }
    cfg = ExperimentConfig.from_dict(raw)
    report = run_experiment(cfg, workers=args.workers)
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    return 0 if report["passed"] else 1


def _cmd_dump_field(args) -> int:
    path = os.path.join(args.run_dir, "fields", f"{args.tag}.csv")
    if not os.path.isfile(path):
        print(f"no field dump {path}", file=sys.stderr)
        return 2
    with open(path) as fh:
        sys.stdout.write(fh.read())
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fracxy", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_check = sub.add_parser("check", help="run the invariant suite with defaults")
    p_check.add_argument("--seed", type=int, default=None)
    p_check.add_argument("--workers", type=int, default=1)
    p_check.add_argument("--out", default=None)
    p_check.set_defaults(func=_cmd_check)

    p_dump = sub.add_parser("dump-field", help="print a saved field CSV")
    p_dump.add_argument("run_dir")
    p_dump.add_argument("tag")
    p_dump.set_defaults(func=_cmd_dump_field)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
