"""Metrics CSV and run-summary JSON emission.

The CSV column order is fixed; floats are printed with 17 significant digits
so replays compare byte-for-byte; missing values are empty fields.
"""

from __future__ import annotations

import json
import math
import os

from .config import ExperimentConfig
from .diagnostics import INT_FIELDS, METRIC_FIELDS, RoundMetrics, accuracy_percentiles, rounds_to_threshold
from .loop import RunResult

CSV_HEADER = ",".join(METRIC_FIELDS)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return format(value, ".17g")


def metrics_to_csv(metrics: list[RoundMetrics]) -> str:
    lines = [CSV_HEADER]
    for row in metrics:
        lines.append(",".join(_cell(getattr(row, name)) for name in METRIC_FIELDS))
    return "\n".join(lines) + "\n"


def write_metrics_csv(path: str, metrics: list[RoundMetrics]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(metrics_to_csv(metrics))


def read_metrics_csv(path: str) -> list[RoundMetrics]:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected CSV header")
    out = []
    for line_no, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(METRIC_FIELDS):
            raise ValueError(f"{path}: line {line_no}: expected {len(METRIC_FIELDS)} fields")
        kwargs = {}
        for name, cell in zip(METRIC_FIELDS, cells):
            if cell == "":
                kwargs[name] = None
            elif name in INT_FIELDS:
                kwargs[name] = int(cell)
            else:
                kwargs[name] = float(cell)
        out.append(RoundMetrics(**kwargs))
    return out


def _finite_or_none(value):
    # strict JSON has no Infinity/NaN literals; blown-up losses become null
    if value is None or not math.isfinite(value):
        return None
    return value


def build_summary(config: ExperimentConfig, result: RunResult) -> dict:
    """Run summary: final accuracies, failure accounting, threshold crossings,
    and the per-client accuracy lists consumed by the box-plot tooling."""
    train_loss, train_acc, per_client_train = result.final_train
    if result.final_test is not None:
        test_loss, test_acc, per_client_test = result.final_test
    else:
        test_loss = test_acc = None
        per_client_test = []
    threshold_field = "test_acc" if result.final_test is not None else "train_acc"
    crossings = {
        format(th, "g"): rounds_to_threshold(result.metrics, threshold_field, th)
        for th in config.thresholds
    }
    return {
        "rounds_completed": len(result.metrics),
        "halted": result.halted,
        "failure_count": len(result.failure_rounds),
        "failure_rounds": result.failure_rounds,
        "zero_delta_rounds": result.zero_delta_rounds,
        "final": {
            "train_loss": _finite_or_none(train_loss),
            "train_acc": _finite_or_none(train_acc),
            "test_loss": _finite_or_none(test_loss),
            "test_acc": _finite_or_none(test_acc),
        },
        "per_client_train_accuracy": per_client_train,
        "per_client_test_accuracy": per_client_test,
        "test_accuracy_percentiles": (
            {str(p): v for p, v in accuracy_percentiles(per_client_test).items()}
            if per_client_test else None
        ),
        "threshold_field": threshold_field,
        "rounds_to_threshold": crossings,
    }


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def write_run_outputs(out_dir: str, config: ExperimentConfig, result: RunResult) -> tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "metrics.csv")
    summary_path = os.path.join(out_dir, "summary.json")
    write_metrics_csv(csv_path, result.metrics)
    write_json(summary_path, build_summary(config, result))
    return csv_path, summary_path
