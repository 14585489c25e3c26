"""Shifted-exponential client runtime model.

A client with N examples takes alpha*N seconds of deterministic compute plus
an exponential tail with mean lambda*N; a synchronous round lasts as long as
its slowest client. The overlay never alters training, it only prices it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import RoundMetrics, rounds_to_threshold


@dataclass(frozen=True)
class StragglerConfig:
    seconds_per_example: float = 1.0  # deterministic part (alpha)
    straggler_scale: float = 0.0  # exponential mean per example (lambda)

    def __post_init__(self):
        if self.seconds_per_example < 0 or self.straggler_scale < 0:
            raise ValueError("straggler parameters must be >= 0")


def client_runtime(num_examples: int, cfg: StragglerConfig, stream: np.random.Generator) -> float:
    """Simulated seconds for one client's local training.

    With straggler_scale == 0 the draw is skipped and the runtime is exactly
    seconds_per_example * num_examples.
    """
    if num_examples < 0:
        raise ValueError("num_examples must be >= 0")
    base = cfg.seconds_per_example * num_examples
    if cfg.straggler_scale == 0.0 or num_examples == 0:
        return base
    return base + float(stream.exponential(cfg.straggler_scale * num_examples))


def round_runtime(cohort_runtimes: list[float]) -> float:
    """Synchronous-round runtime: the slowest cohort member."""
    if not cohort_runtimes:
        raise ValueError("round_runtime requires a nonempty cohort")
    return max(cohort_runtimes)


def relative_time_to_accuracy(metrics_a: list[RoundMetrics], metrics_b: list[RoundMetrics],
                              threshold: float, field: str = "test_acc") -> float | None:
    """Ratio of cumulative runtime at the first threshold crossing, a over b.

    None when either run never crosses the threshold.
    """
    ratio = []
    for metrics in (metrics_a, metrics_b):
        t = rounds_to_threshold(metrics, field, threshold)
        if t is None:
            return None
        row = next(m for m in metrics if m.round == t)
        ratio.append(row.runtime_cum)
    if ratio[1] == 0:
        return None
    return ratio[0] / ratio[1]
