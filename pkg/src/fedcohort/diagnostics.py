"""Measurement instruments: norms, cosine similarity, failures, percentiles.

RoundMetrics is the one-row-per-round record; its field order is the CSV
column order. Optional fields are None when undefined for a round (not
evaluated, clipping disabled, cosine undefined) and serialize to empty CSV
fields.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, fields

import numpy as np

from .params import LayeredParams, dot, l2_norm


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    cohort_size: int
    train_loss: float | None
    train_acc: float | None
    test_loss: float | None
    test_acc: float | None
    pg_norm: float | None
    pg_norm_predicted: float | None
    cosine_avg: float | None
    clip_fraction: float | None
    clip_level: float | None
    lr_server: float | None
    examples_round: int
    examples_cum: int
    runtime_round: float | None
    runtime_cum: float
    failure: int


METRIC_FIELDS = tuple(f.name for f in fields(RoundMetrics))
INT_FIELDS = ("round", "cohort_size", "examples_round", "examples_cum", "failure")


def predicted_norm(norm_ref: float, cohort_ref: int, cohort: int) -> float:
    """Inverse-square-root prediction: the norm expected at a different
    cohort size given a reference measurement."""
    if norm_ref <= 0 or cohort_ref < 1 or cohort < 1:
        raise ValueError("predicted_norm requires positive arguments")
    return norm_ref * math.sqrt(cohort_ref / cohort)


def avg_cosine_similarity(updates: list[LayeredParams], cap: int | None = None) -> float | None:
    """Mean cosine similarity over all unordered pairs of updates.

    Returns None (undefined, recorded as missing) when fewer than two updates
    are given or any update has zero norm. ``cap`` limits the computation to
    the first cap updates (pair count is quadratic).
    """
    if cap is not None:
        updates = updates[:cap]
    if len(updates) < 2:
        return None
    norms = [l2_norm(u) for u in updates]
    if any(n == 0.0 for n in norms):
        return None
    total = 0.0
    count = 0
    for (i, u), (j, w) in itertools.combinations(enumerate(updates), 2):
        total += dot(u, w) / (norms[i] * norms[j])
        count += 1
    return total / count


def detect_catastrophic(acc_prev: float, acc_curr: float) -> bool:
    """True iff training accuracy at least halved since the last evaluation."""
    return acc_prev > 0 and acc_curr <= acc_prev / 2


DEFAULT_PERCENTILES = (5, 25, 50, 75, 95)


def accuracy_percentiles(per_client_acc: list[float],
                         percentiles: tuple[int, ...] = DEFAULT_PERCENTILES) -> dict[int, float]:
    """Linear-interpolation percentiles of the per-client accuracy list."""
    if not per_client_acc:
        raise ValueError("need at least one per-client accuracy")
    arr = np.sort(np.asarray(per_client_acc, dtype=np.float64))
    return {p: float(np.percentile(arr, p, method="linear")) for p in percentiles}


def rounds_to_threshold(metrics: list[RoundMetrics], field: str, threshold: float) -> int | None:
    """First round whose field value reaches the threshold, or None.

    Rounds where the field is missing (e.g. not an evaluation round) are
    skipped; later dips after the first crossing are ignored.
    """
    if field not in METRIC_FIELDS:
        raise ValueError(f"unknown metrics field '{field}'")
    for row in metrics:
        value = getattr(row, field)
        if value is not None and value >= threshold:
            return row.round
    return None
