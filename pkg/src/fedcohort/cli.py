"""Command-line entry points: run, sweep, datagen."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import statistics
import sys

from .backend import BACKEND_NAME
from .client import LocalBudget
from .config import (ConfigError, ExperimentConfig, SweepSpec, _Section, parse_config,
                     parse_sweep, parse_synthetic_spec)
from .data import DatasetFormatError, generate_synthetic, save_dataset
from .loop import CohortSchedule, run_experiment
from .reporting import build_summary, write_json, write_run_outputs


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def cmd_run(args) -> int:
    config = parse_config(_read(args.config))
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.workers is not None:
        config = dataclasses.replace(config, workers=args.workers)
    out_dir = args.output or config.output
    if out_dir is None:
        raise ConfigError("output", "no output directory (set 'output' in the config or pass --output)")
    result = run_experiment(config)
    csv_path, summary_path = write_run_outputs(out_dir, config, result)
    status = "aborted" if result.halted else "ok"
    print(f"{status}: {len(result.metrics)} rounds, {len(result.failure_rounds)} failure(s), "
          f"backend={BACKEND_NAME} -> {csv_path}, {summary_path}")
    return 1 if result.halted else 0


def sweep_cell_config(spec: SweepSpec, local_steps: int | None, cohort_size: int | None,
                      trial: int) -> ExperimentConfig:
    config = dataclasses.replace(spec.base, seed=spec.base.seed + trial, output=None)
    if cohort_size is not None:
        config = dataclasses.replace(config, cohort=CohortSchedule(kind="fixed", size=cohort_size))
    if local_steps is not None:
        config = dataclasses.replace(
            config,
            budget=LocalBudget(mode="steps", value=local_steps,
                               batch_size=spec.base.budget.batch_size),
        )
    return config


def cell_name(local_steps: int | None, cohort_size: int | None, trial: int) -> str:
    parts = []
    if local_steps is not None:
        parts.append(f"steps{local_steps}")
    if cohort_size is not None:
        parts.append(f"M{cohort_size}")
    parts.append(f"t{trial}")
    return "_".join(parts)


def _median_or_none(values):
    # Never-reached runs rank last; a never-reached median is the sentinel.
    ordered = sorted(values, key=lambda v: (v is None, v if v is not None else 0))
    n = len(ordered)
    if n % 2 == 1:
        return ordered[n // 2]
    lo, hi = ordered[n // 2 - 1], ordered[n // 2]
    if lo is None or hi is None:
        return None
    return (lo + hi) / 2


def cmd_sweep(args) -> int:
    spec = parse_sweep(_read(args.sweep))
    if args.seed is not None:
        spec = dataclasses.replace(spec, base=dataclasses.replace(spec.base, seed=args.seed))
    out_dir = args.output or spec.base.output
    if out_dir is None:
        raise ConfigError("output", "no output directory (set base.output or pass --output)")
    steps_axis = list(spec.local_steps) or [None]
    cohort_axis = list(spec.cohort_sizes) or [None]

    cells = []
    for local_steps in steps_axis:
        for cohort_size in cohort_axis:
            per_trial_acc = []
            per_trial_crossings = {format(th, "g"): [] for th in spec.base.thresholds}
            run_dirs = []
            for trial in range(spec.trials):
                config = sweep_cell_config(spec, local_steps, cohort_size, trial)
                run_dir = os.path.join(out_dir, "cells", cell_name(local_steps, cohort_size, trial))
                result = run_experiment(config)
                write_run_outputs(run_dir, config, result)
                summary = build_summary(config, result)
                run_dirs.append(os.path.relpath(run_dir, out_dir))
                per_trial_acc.append(summary["final"]["test_acc"])
                for key, value in summary["rounds_to_threshold"].items():
                    per_trial_crossings[key].append(value)
            accs = [a for a in per_trial_acc if a is not None]
            cells.append({
                "local_steps": local_steps,
                "cohort_size": cohort_size,
                "runs": run_dirs,
                "final_test_acc": per_trial_acc,
                "final_test_acc_mean": statistics.fmean(accs) if accs else None,
                "rounds_to_threshold": per_trial_crossings,
                "rounds_to_threshold_median": {
                    key: _median_or_none(vals) for key, vals in per_trial_crossings.items()
                },
            })
    grid = {
        "local_steps_axis": steps_axis,
        "cohort_sizes_axis": cohort_axis,
        "trials": spec.trials,
        "thresholds": [format(th, "g") for th in spec.base.thresholds],
        "cells": cells,
    }
    grid_path = os.path.join(out_dir, "grid_summary.json")
    write_json(grid_path, grid)
    print(f"ok: {len(cells)} grid cells x {spec.trials} trials -> {grid_path}")
    return 0


def cmd_datagen(args) -> int:
    raw = json.loads(_read(args.genspec))
    spec = parse_synthetic_spec(_Section(raw, "genspec"))
    fed = generate_synthetic(spec, args.seed)
    save_dataset(fed, args.output, generator=spec, seed=args.seed)
    print(f"ok: {len(fed.train_clients)} train / {len(fed.test_clients)} test clients -> {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedcohort",
                                     description="Deterministic federated-learning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--output", default=None, help="override the output directory")
    p_run.add_argument("--workers", type=int, default=None, help="override the worker count")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a cohort-size / local-steps grid")
    p_sweep.add_argument("sweep")
    p_sweep.add_argument("--seed", type=int, default=None, help="override the base seed")
    p_sweep.add_argument("--output", default=None, help="override the output directory")
    p_sweep.set_defaults(func=cmd_sweep)

    p_gen = sub.add_parser("datagen", help="generate a synthetic dataset file")
    p_gen.add_argument("genspec")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--output", required=True)
    p_gen.set_defaults(func=cmd_datagen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
