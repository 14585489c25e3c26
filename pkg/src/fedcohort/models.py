"""Built-in differentiable models and the weighted global objective.

Three desk-scale model families:

* ``linear``  - single-output linear regression, squared-error loss.
  Layers: ``weight`` (d,), ``bias`` (1,).
* ``softmax`` - linear classifier, cross-entropy loss.
  Layers: ``weight`` (d, C), ``bias`` (C,).
* ``mlp``     - one tanh hidden layer. ``num_classes == 1`` gives a
  regression head (squared error), ``>= 2`` a softmax head (cross-entropy).
  Layers: ``hidden_weight`` (d, H), ``hidden_bias`` (H,),
  ``output_weight`` (H, O), ``output_bias`` (O,).

Losses are means over the batch; gradients are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ClientDataset, FederatedDataset
from .params import LayeredParams

REGRESSION_HIT_TOLERANCE = 0.5  # |prediction - label| below this counts as correct


@dataclass(frozen=True)
class ModelSpec:
    kind: str  # "linear" | "softmax" | "mlp"
    input_dim: int
    num_classes: int = 1
    hidden_dim: int = 16
    init_scale: float = 0.1

    def __post_init__(self):
        if self.kind not in ("linear", "softmax", "mlp"):
            raise ValueError(f"unknown model kind '{self.kind}'")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.kind == "linear" and self.num_classes != 1:
            raise ValueError("linear model is single-output (num_classes must be 1)")
        if self.kind == "softmax" and self.num_classes < 2:
            raise ValueError("softmax model requires num_classes >= 2")
        if self.kind == "mlp" and self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.init_scale < 0:
            raise ValueError("init_scale must be >= 0")

    @property
    def classification(self) -> bool:
        return self.num_classes >= 2

    @property
    def output_dim(self) -> int:
        return self.num_classes


def init_params(spec: ModelSpec, stream: np.random.Generator) -> LayeredParams:
    """Uniform[-init_scale, init_scale] weights, zero biases.

    Weight layers are drawn in layer order from the given stream, so the
    result is a pure function of (spec, stream state).
    """
    s = spec.init_scale
    if spec.kind == "linear":
        return LayeredParams([
            ("weight", stream.uniform(-s, s, size=spec.input_dim)),
            ("bias", np.zeros(1)),
        ])
    if spec.kind == "softmax":
        return LayeredParams([
            ("weight", stream.uniform(-s, s, size=(spec.input_dim, spec.num_classes))),
            ("bias", np.zeros(spec.num_classes)),
        ])
    return LayeredParams([
        ("hidden_weight", stream.uniform(-s, s, size=(spec.input_dim, spec.hidden_dim))),
        ("hidden_bias", np.zeros(spec.hidden_dim)),
        ("output_weight", stream.uniform(-s, s, size=(spec.hidden_dim, spec.num_classes))),
        ("output_bias", np.zeros(spec.num_classes)),
    ])


def _check_batch(spec: ModelSpec, features: np.ndarray) -> None:
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError("batch must be a nonempty N x d matrix")
    if features.shape[1] != spec.input_dim:
        raise ValueError(f"feature dimension {features.shape[1]} != model input_dim {spec.input_dim}")
    if not np.isfinite(features).all():
        raise ValueError("non-finite input features")


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def predict_scores(spec: ModelSpec, params: LayeredParams, features: np.ndarray) -> np.ndarray:
    """Raw model outputs: (N,) predictions or (N, C) logits."""
    if spec.kind == "linear":
        w, b = params.values
        return features @ w + b[0]
    if spec.kind == "softmax":
        w, b = params.values
        return features @ w + b
    w1, b1, w2, b2 = params.values
    hidden = np.tanh(features @ w1 + b1)
    out = hidden @ w2 + b2
    return out if spec.classification else out[:, 0]


def loss_and_grad(spec: ModelSpec, params: LayeredParams, features: np.ndarray,
                  labels: np.ndarray) -> tuple[float, LayeredParams]:
    """Mean loss over the batch and its exact gradient."""
    _check_batch(spec, features)
    n = features.shape[0]

    if spec.kind == "linear":
        w, b = params.values
        residual = features @ w + b[0] - labels
        loss = float(np.mean(residual**2))
        coef = 2.0 * residual / n
        return loss, params.like([features.T @ coef, np.array([coef.sum()])])

    if spec.kind == "softmax":
        w, b = params.values
        logits = features @ w + b
        return _softmax_loss_grad(params, features, labels, logits, n, lambda gl: (features.T @ gl, gl.sum(axis=0)))

    w1, b1, w2, b2 = params.values
    pre = features @ w1 + b1
    hidden = np.tanh(pre)
    logits = hidden @ w2 + b2

    if spec.classification:
        def assemble(grad_logits: np.ndarray):
            grad_hidden = grad_logits @ w2.T * (1.0 - hidden**2)
            return (features.T @ grad_hidden, grad_hidden.sum(axis=0),
                    hidden.T @ grad_logits, grad_logits.sum(axis=0))
        return _softmax_loss_grad(params, features, labels, logits, n, assemble)

    residual = logits[:, 0] - labels
    loss = float(np.mean(residual**2))
    grad_logits = (2.0 * residual / n)[:, None]
    grad_hidden = grad_logits @ w2.T * (1.0 - hidden**2)
    return loss, params.like([features.T @ grad_hidden, grad_hidden.sum(axis=0),
                              hidden.T @ grad_logits, grad_logits.sum(axis=0)])


def _softmax_loss_grad(params, features, labels, logits, n, assemble):
    idx = labels.astype(np.int64)
    log_probs = _log_softmax(logits)
    loss = float(-log_probs[np.arange(n), idx].mean())
    grad_logits = np.exp(log_probs)
    grad_logits[np.arange(n), idx] -= 1.0
    grad_logits /= n
    return loss, params.like(list(assemble(grad_logits)))


def _client_loss_hits(spec: ModelSpec, params: LayeredParams, client: ClientDataset) -> tuple[float, int]:
    with np.errstate(over="ignore", invalid="ignore"):
        return _client_loss_hits_inner(spec, params, client)


def _client_loss_hits_inner(spec, params, client):
    scores = predict_scores(spec, params, client.features)
    if spec.classification:
        idx = client.labels.astype(np.int64)
        log_probs = _log_softmax(scores)
        loss = float(-log_probs[np.arange(client.num_examples), idx].mean())
        hits = int((np.argmax(scores, axis=1) == idx).sum())
    else:
        residual = scores - client.labels
        loss = float(np.mean(residual**2))
        hits = int((np.abs(residual) < REGRESSION_HIT_TOLERANCE).sum())
    return loss, hits


def evaluate(spec: ModelSpec, params: LayeredParams,
             clients: list[ClientDataset]) -> tuple[float, float, list[float]]:
    """Example-weighted (loss, accuracy) plus each client's own accuracy.

    Regression counts an example as correct when the prediction is within
    0.5 of the label, so the threshold/percentile machinery applies to both
    task kinds.
    """
    if not clients:
        raise ValueError("evaluate requires at least one client")
    total_examples = 0
    total_loss = 0.0
    total_hits = 0
    per_client = []
    for c in clients:
        loss, hits = _client_loss_hits(spec, params, c)
        total_examples += c.num_examples
        total_loss += loss * c.num_examples
        total_hits += hits
        per_client.append(hits / c.num_examples)
    return total_loss / total_examples, total_hits / total_examples, per_client


def global_objective(spec: ModelSpec, params: LayeredParams, fed: FederatedDataset) -> float:
    """Weighted average of client mean losses: sum(p_k f_k) / sum(p_k)."""
    weight_sum = 0.0
    acc = 0.0
    for c in fed.train_clients:
        loss, _ = _client_loss_hits(spec, params, c)
        acc += c.weight * loss
        weight_sum += c.weight
    return acc / weight_sum


def default_model_for(fed_task_kind: str, input_dim: int, num_classes: int) -> ModelSpec:
    """Model used when a config supplies data but no model section."""
    if fed_task_kind == "classification":
        return ModelSpec(kind="softmax", input_dim=input_dim, num_classes=num_classes)
    return ModelSpec(kind="linear", input_dim=input_dim, num_classes=1)
