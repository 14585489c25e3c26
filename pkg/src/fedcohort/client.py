"""Client-side work: local mini-batch SGD, update computation, and clipping.

Local training visits data in a fresh seeded permutation per epoch; batches
are consecutive slices with the final short batch included, so E epochs
consume exactly E*N_k examples. Step-budgeted training stops after exactly S
batch steps, wrapping into a reshuffled epoch when one runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .data import ClientDataset
from .models import ModelSpec
from .params import LayeredParams, NonFiniteError, l2_norm, scale, subtract


@dataclass(frozen=True)
class LocalBudget:
    mode: str  # "epochs" | "steps"
    value: int
    batch_size: int

    def __post_init__(self):
        if self.mode not in ("epochs", "steps"):
            raise ValueError(f"budget mode must be 'epochs' or 'steps', got '{self.mode}'")
        if self.value < 1:
            raise ValueError("budget value must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class ClientUpdate:
    """One client's contribution to a round.

    ``clip_indicator`` is 1 when the pre-clip update norm was within the clip
    level, 0 when it was clipped, and None when clipping is disabled.
    """

    client_id: str
    delta: LayeredParams
    weight: float
    clip_indicator: int | None
    examples_processed: int
    runtime: float


class TrainingDivergedError(RuntimeError):
    """Local training hit a non-finite loss; carries client and step index."""

    def __init__(self, client_id: str, step: int):
        self.client_id = client_id
        self.step = step
        super().__init__(f"client '{client_id}' diverged at local step {step}")


def _batch_plan(n: int, budget: LocalBudget,
                stream: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concatenated epoch permutations plus per-step slice bounds."""
    b = budget.batch_size
    per_epoch = math.ceil(n / b)
    if budget.mode == "epochs":
        num_epochs, num_steps = budget.value, budget.value * per_epoch
    else:
        num_steps = budget.value
        num_epochs = math.ceil(num_steps / per_epoch)
    order = np.concatenate([stream.permutation(n) for _ in range(num_epochs)]).astype(np.int64)
    starts = np.empty(num_steps, dtype=np.int64)
    ends = np.empty(num_steps, dtype=np.int64)
    s = 0
    for e in range(num_epochs):
        base = e * n
        for lo in range(0, n, b):
            if s == num_steps:
                break
            starts[s] = base + lo
            ends[s] = base + min(lo + b, n)
            s += 1
    return order, starts, ends


def local_train(spec: ModelSpec, x: LayeredParams, client: ClientDataset, client_lr: float,
                budget: LocalBudget, stream: np.random.Generator) -> LayeredParams:
    """Run the local SGD budget from x and return the client's final model."""
    if client_lr < 0:
        raise ValueError("client learning rate must be >= 0")
    if client.features.shape[1] != spec.input_dim:
        raise ValueError(f"client '{client.client_id}' feature dim {client.features.shape[1]} != model input_dim {spec.input_dim}")
    order, starts, ends = _batch_plan(client.num_examples, budget, stream)
    features = np.ascontiguousarray(client.features)

    arrays = [np.array(v, copy=True) for v in x.values]
    if spec.kind == "linear":
        labels = np.ascontiguousarray(client.labels, dtype=np.float64)
        bad = kernels.sgd_linear(arrays[0], arrays[1], features, labels, client_lr, order, starts, ends)
    elif spec.kind == "softmax":
        labels = np.ascontiguousarray(client.labels, dtype=np.int64)
        bad = kernels.sgd_softmax(arrays[0], arrays[1], features, labels, client_lr, order, starts, ends)
    else:
        labels = np.ascontiguousarray(client.labels, dtype=np.float64)
        bad = kernels.sgd_mlp(arrays[0], arrays[1], arrays[2], arrays[3], features, labels,
                              client_lr, order, starts, ends, spec.classification)
    if bad >= 0:
        raise TrainingDivergedError(client.client_id, int(bad))
    try:
        return x.like(arrays)
    except NonFiniteError:
        # params overflowed on the last applied update, after the loss check
        raise TrainingDivergedError(client.client_id, int(starts.shape[0]) - 1) from None


def compute_update(x: LayeredParams, x_k: LayeredParams) -> LayeredParams:
    """Client update: initial model minus locally trained model.

    The server subtracts the aggregate, so a plain SGD server with rate 1 and
    full participation recovers exact model averaging.
    """
    return subtract(x, x_k)


def clip_update(delta: LayeredParams, clip_level: float) -> tuple[LayeredParams, int]:
    """Whole-vector norm clipping; indicator 1 iff the norm was within level."""
    if not clip_level > 0:
        raise ValueError("clip level must be positive")
    norm = l2_norm(delta)
    if norm <= clip_level:
        return delta, 1
    return scale(clip_level / norm, delta), 0


def examples_this_client(budget: LocalBudget, num_examples: int) -> int:
    """Examples consumed by the budget on a client with num_examples points."""
    if num_examples < 1:
        raise ValueError("num_examples must be >= 1")
    n, b = num_examples, budget.batch_size
    if budget.mode == "epochs":
        return budget.value * n
    per_epoch = math.ceil(n / b)
    full_epochs, extra_steps = divmod(budget.value, per_epoch)
    # The first extra_steps batches of an epoch are always full-size slices.
    return full_epochs * n + extra_steps * min(b, n)


__all__ = [
    "LocalBudget",
    "ClientUpdate",
    "TrainingDivergedError",
    "local_train",
    "compute_update",
    "clip_update",
    "examples_this_client",
]
