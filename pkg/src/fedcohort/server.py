"""Server-side aggregation, the seven server optimizers, and rate scaling.

The aggregated client update (pseudo-gradient) is handed to a first-order
optimizer as if it were a gradient estimate. Adaptive optimizers start from
zero accumulators; Adam-style bias correction is off by default and exposed
as a flag. Conventions committed here:

* momentum for sgdm/lars is heavy-ball (m <- beta1*m + g, no damping);
  adam/lamb moments use (1-beta) damping
* epsilon is added outside the square root for all adaptive kinds
* lars/lamb trust ratios degrade to 1 when either norm in the ratio is zero
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .client import ClientUpdate
from .params import LayeredParams, assert_compatible, zeros_like

OPTIMIZER_KINDS = ("sgd", "sgdm", "adagrad", "adam", "lars", "lamb", "normalized_sgd")


@dataclass(frozen=True)
class ServerOptConfig:
    kind: str
    lr: float  # reference server learning rate
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 0.001
    weight_decay: float = 0.0
    bias_correction: bool = False

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer kind '{self.kind}' (expected one of {OPTIMIZER_KINDS})")
        if not self.lr > 0:
            raise ValueError("server learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must be in [0, 1)")
        # eps == 0 is allowed so the exact epsilon-free limit of the layer-wise
        # trust ratios can be exercised; normal configurations keep it positive
        if self.eps < 0:
            raise ValueError("eps must be >= 0")


@dataclass(frozen=True)
class OptimizerSlots:
    first_moment: LayeredParams
    second_moment: LayeredParams
    step_count: int = 0

    @classmethod
    def zeros(cls, model: LayeredParams) -> "OptimizerSlots":
        return cls(first_moment=zeros_like(model), second_moment=zeros_like(model), step_count=0)


@dataclass(frozen=True)
class LrScalingConfig:
    rule: str = "none"  # "none" | "sqrt" | "linear"
    reference_cohort: int | None = None  # default: cohort size at round 1
    warmup_rounds: int = 0
    warmup_start: str = "reference"  # "reference" | "zero"

    def __post_init__(self):
        if self.rule not in ("none", "sqrt", "linear"):
            raise ValueError(f"unknown scaling rule '{self.rule}'")
        if self.warmup_start not in ("reference", "zero"):
            raise ValueError(f"warmup_start must be 'reference' or 'zero', got '{self.warmup_start}'")
        if self.warmup_rounds < 0:
            raise ValueError("warmup_rounds must be >= 0")
        if self.reference_cohort is not None and self.reference_cohort < 1:
            raise ValueError("reference_cohort must be >= 1")


def aggregate(updates: list[ClientUpdate]) -> tuple[LayeredParams, float | None]:
    """Weighted mean of client deltas and the unweighted mean clip indicator.

    Reduction runs in ascending client_id order regardless of input order, so
    the result is independent of scheduling. The indicator mean is None when
    clipping was disabled (no indicators attached).
    """
    if not updates:
        raise ValueError("cannot aggregate an empty cohort")
    ordered = sorted(updates, key=lambda u: u.client_id)
    weight_sum = float(sum(u.weight for u in ordered))
    if not weight_sum > 0:
        raise ValueError(f"client weights must sum to a positive value, got {weight_sum}")
    first = ordered[0].delta
    acc = [ordered[0].weight * v for v in first.values]
    for u in ordered[1:]:
        assert_compatible(first, u.delta)
        for a, v in zip(acc, u.delta.values):
            a += u.weight * v
    delta = first.like([a / weight_sum for a in acc])
    if any(u.clip_indicator is None for u in ordered):
        return delta, None
    clipped_share = sum(u.clip_indicator for u in ordered) / len(ordered)
    return delta, float(clipped_share)


def _layer_norm(v: np.ndarray) -> float:
    return float(np.linalg.norm(v.ravel()))


def server_step(cfg: ServerOptConfig, slots: OptimizerSlots, x: LayeredParams, lr_eff: float,
                delta: LayeredParams) -> tuple[LayeredParams, OptimizerSlots]:
    """Apply one optimizer step, treating delta as the gradient estimate.

    Returns the new model and slots; inputs are unmodified. A zero-norm delta
    under normalized_sgd returns the inputs unchanged (the step is skipped;
    callers flag it).
    """
    assert_compatible(x, delta)
    if not lr_eff > 0:
        raise ValueError("effective learning rate must be positive")
    g = delta.values
    xs = x.values
    m = slots.first_moment.values
    v = slots.second_moment.values
    t = slots.step_count + 1

    if cfg.kind == "sgd":
        new_x = [xv - lr_eff * gv for xv, gv in zip(xs, g)]
        return x.like(new_x), replace(slots, step_count=t)

    if cfg.kind == "sgdm":
        new_m = [cfg.beta1 * mv + gv for mv, gv in zip(m, g)]
        new_x = [xv - lr_eff * mv for xv, mv in zip(xs, new_m)]
        return x.like(new_x), OptimizerSlots(x.like(new_m), slots.second_moment, t)

    if cfg.kind == "adagrad":
        new_v = [vv + gv * gv for vv, gv in zip(v, g)]
        new_x = [xv - lr_eff * gv / (np.sqrt(vv) + cfg.eps) for xv, gv, vv in zip(xs, g, new_v)]
        return x.like(new_x), OptimizerSlots(slots.first_moment, x.like(new_v), t)

    if cfg.kind == "adam":
        new_m = [cfg.beta1 * mv + (1 - cfg.beta1) * gv for mv, gv in zip(m, g)]
        new_v = [cfg.beta2 * vv + (1 - cfg.beta2) * gv * gv for vv, gv in zip(v, g)]
        m_hat, v_hat = _bias_corrected(cfg, new_m, new_v, t)
        new_x = [xv - lr_eff * mh / (np.sqrt(vh) + cfg.eps) for xv, mh, vh in zip(xs, m_hat, v_hat)]
        return x.like(new_x), OptimizerSlots(x.like(new_m), x.like(new_v), t)

    if cfg.kind == "lars":
        new_m = [cfg.beta1 * mv + (gv + cfg.weight_decay * xv) for mv, gv, xv in zip(m, g, xs)]
        new_x = []
        for xv, mv in zip(xs, new_m):
            nx, nm = _layer_norm(xv), _layer_norm(mv)
            ratio = 1.0 if (nx == 0.0 or nm == 0.0) else nx / (nm + cfg.eps)
            new_x.append(xv - lr_eff * ratio * mv)
        return x.like(new_x), OptimizerSlots(x.like(new_m), slots.second_moment, t)

    if cfg.kind == "lamb":
        new_m = [cfg.beta1 * mv + (1 - cfg.beta1) * gv for mv, gv in zip(m, g)]
        new_v = [cfg.beta2 * vv + (1 - cfg.beta2) * gv * gv for vv, gv in zip(v, g)]
        m_hat, v_hat = _bias_corrected(cfg, new_m, new_v, t)
        new_x = []
        for xv, mh, vh in zip(xs, m_hat, v_hat):
            direction = mh / (np.sqrt(vh) + cfg.eps) + cfg.weight_decay * xv
            nx, nu = _layer_norm(xv), _layer_norm(direction)
            ratio = 1.0 if (nx == 0.0 or nu == 0.0) else nx / nu
            new_x.append(xv - lr_eff * ratio * direction)
        return x.like(new_x), OptimizerSlots(x.like(new_m), x.like(new_v), t)

    # normalized_sgd
    norm = math.sqrt(sum(float(np.dot(gv.ravel(), gv.ravel())) for gv in g))
    if norm == 0.0:
        return x, slots
    k = lr_eff / norm
    new_x = [xv - k * gv for xv, gv in zip(xs, g)]
    return x.like(new_x), replace(slots, step_count=t)


def _bias_corrected(cfg, new_m, new_v, t):
    if not cfg.bias_correction:
        return new_m, new_v
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    return [mv / c1 for mv in new_m], [vv / c2 for vv in new_v]


def scaled_server_lr(lr_ref: float, cohort_ref: int, cohort_now: int, rule: str,
                     warmup_rounds: int, warmup_start: str, t: int) -> float:
    """Effective server rate for round t under a scaling rule with warmup.

    The target rate is lr_ref times sqrt(M'/M) (sqrt rule) or M'/M (linear
    rule). During the first warmup_rounds rounds the rate ramps linearly from
    the start value (lr_ref or 0) to the target, reaching it at t == W.
    """
    if cohort_ref < 1 or cohort_now < 1:
        raise ValueError("cohort sizes must be >= 1")
    if t < 1:
        raise ValueError("round index must be >= 1")
    if rule == "none":
        target = lr_ref
    elif rule == "sqrt":
        target = lr_ref * math.sqrt(cohort_now / cohort_ref)
    elif rule == "linear":
        target = lr_ref * (cohort_now / cohort_ref)
    else:
        raise ValueError(f"unknown scaling rule '{rule}'")
    if warmup_rounds > 0 and t <= warmup_rounds:
        start = lr_ref if warmup_start == "reference" else 0.0
        return start + (target - start) * (t / warmup_rounds)
    return target
