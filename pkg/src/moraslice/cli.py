"""Command-line entry point.

Modes (mutually exclusive):
  run (default)         simulate the configured scenario, write metrics.csv/summary.csv
  --experiment NAME     reproduce a figure at --scale desk|paper, write NAME.csv
  --verify SUITE        randomised property checks (theorems|oracle|all)

Exit codes: 0 success, 1 verification failure, 2 configuration/usage error,
3 infeasible instance or size guard.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from moraslice.config import POLICIES, ConfigError, load_config
from moraslice.model import InfeasibleAllocation, InstanceError, SizeGuardError

SCHEMA = "# schema=1"
EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3


def write_csv(path: Path, columns, rows) -> None:
    from moraslice.experiments import format_value

    lines = [SCHEMA, ",".join(columns)]
    lines += [",".join(format_value(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="moraslice", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, help="key=value scenario file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--policy", choices=POLICIES, help="association policy for a run")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="config override (repeatable)")
    p.add_argument("--experiment", help="fig1 .. fig9")
    p.add_argument("--scale", choices=("desk", "paper"), default="desk")
    p.add_argument("--verify", choices=("theorems", "oracle", "all"))
    p.add_argument("--instances", type=int,
                   help="random instances (verify) or seeds (experiment)")
    p.add_argument("--workers", type=int, default=1, help="parallel replications")
    p.add_argument("--confirm-long", action="store_true",
                   help="allow full-scale experiments that take machine-hours")
    p.add_argument("--inject-fault", action="store_true",
                   help="self-test: corrupt allocations so verification must fail")
    return p


def _config(args):
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.policy is not None:
        overrides.append(f"policy={args.policy}")
    return load_config(args.config, overrides)


def cmd_run(args) -> int:
    from moraslice.simulate import run

    cfg = _config(args)
    res = run(cfg)
    n_op = cfg.num_operators
    cols = ("time_s", "W", "users", "handoffs", "idle_operators") + tuple(
        f"U_{o}" for o in range(n_op))
    rows = [(s.time, s.utility, s.users, s.handoffs, s.idle_operators) + s.operator_utility
            for s in res.snapshots]
    steady = res.steady(cfg.warmup_fraction)
    mean_rate = np.mean([s.rates[s.members].mean() if s.users else 0.0 for s in steady])
    summary = [(res.policy, cfg.seed, len(res.snapshots), res.mean_utility(cfg.warmup_fraction),
                res.snapshots[-1].utility, res.snapshots[-1].handoffs,
                float(np.mean([s.users for s in steady])), mean_rate / 1e6)]
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "metrics.csv", cols, rows)
    write_csv(args.out / "summary.csv",
              ("policy", "seed", "snapshots", "mean_W", "final_W", "handoffs",
               "mean_users", "mean_rate_mbps"), summary)
    print(f"{res.policy}: mean W {summary[0][3]:.6f} over {len(steady)} snapshots")
    return EXIT_OK


def cmd_experiment(args) -> int:
    from moraslice import experiments

    if args.experiment not in experiments.NAMES:
        print(f"unknown experiment {args.experiment!r}; choose from "
              f"{', '.join(experiments.NAMES)}", file=sys.stderr)
        return EXIT_CONFIG
    base = _config(args) if (args.config or args.set) else None
    seed = args.seed if args.seed is not None else 1
    if args.scale == "paper" and not args.confirm_long:
        est = experiments.estimate_seconds(args.experiment, experiments.PAPER)
        print(f"{args.experiment} at full scale needs roughly {est / 3600:.1f} "
              "machine-hours; rerun with --confirm-long to proceed", file=sys.stderr)
        return EXIT_CONFIG
    cols, rows = experiments.run_experiment(args.experiment, args.scale, seed,
                                            max(1, args.workers), args.instances, base)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{args.experiment}.csv"
    write_csv(path, cols, rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_verify(args) -> int:
    from moraslice.verify import run_suite

    n = args.instances if args.instances is not None else 1000
    seed = args.seed if args.seed is not None else 1
    checks, violations = run_suite(args.verify, n, seed, inject_fault=args.inject_fault)
    if not violations:
        print(f"{args.verify}: {checks} checks on {n} instances passed")
        return EXIT_OK
    v = violations[0]
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "counterexample.json"
    path.write_text(json.dumps({"check": v.check, "message": v.message,
                                "seed": seed, "instance": v.instance}, indent=2) + "\n")
    print(f"FAILED {v.check}: {v.message}\ncounterexample written to {path}",
          file=sys.stderr)
    return EXIT_VERIFY


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.experiment and args.verify:
        print("--experiment and --verify are mutually exclusive", file=sys.stderr)
        return EXIT_CONFIG
    if args.instances is not None and args.instances < 1:
        print("--instances must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.verify:
            return cmd_verify(args)
        if args.experiment:
            return cmd_experiment(args)
        return cmd_run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SizeGuardError, InfeasibleAllocation, InstanceError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
