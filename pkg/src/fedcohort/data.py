"""Federated datasets: per-client example stores and a synthetic generator.

The generator draws a global weight vector (or class-score matrix) once, then
per-client weights ``w_k = w* + sigma_het * u_k``, per-client feature shifts of
magnitude proportional to ``sigma_het``, and labels from the client's own
weights plus label noise. Test clients are fresh draws from the same law, so
train and test populations are exchangeable.

Datasets round-trip through a line-oriented text format (17 significant
digits, bit-exact for float64).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .rng import PATH_DATA, derive_stream

FORMAT_MAGIC = "fedcohort-dataset v1"


@dataclass(frozen=True)
class ClientDataset:
    """One client's local examples.

    ``labels`` holds real values for regression and class indices for
    classification. ``weight`` is the aggregation weight p_k and defaults to
    the number of local examples.
    """

    client_id: str
    features: np.ndarray  # (N_k, d) float64
    labels: np.ndarray  # (N_k,) float64 or int64
    weight: float

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"client '{self.client_id}': features must be a nonempty N x d matrix")
        if self.labels.shape[0] != self.features.shape[0]:
            raise ValueError(f"client '{self.client_id}': {self.labels.shape[0]} labels for {self.features.shape[0]} examples")
        if not self.weight > 0:
            raise ValueError(f"client '{self.client_id}': weight must be positive")
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def num_examples(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class FederatedDataset:
    train_clients: list[ClientDataset]
    test_clients: list[ClientDataset]
    task_kind: str  # "regression" | "classification"
    num_classes: int
    input_dim: int

    def __post_init__(self):
        if self.task_kind not in ("regression", "classification"):
            raise ValueError(f"unknown task_kind '{self.task_kind}'")
        if not self.train_clients:
            raise ValueError("at least one train client is required")
        for split_name, split in (("train", self.train_clients), ("test", self.test_clients)):
            ids = [c.client_id for c in split]
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate client ids in {split_name} split")
            for c in split:
                if c.features.shape[1] != self.input_dim:
                    raise ValueError(f"client '{c.client_id}': feature dimension {c.features.shape[1]} != {self.input_dim}")

    @property
    def num_train_clients(self) -> int:
        return len(self.train_clients)

    def train_ids(self) -> list[str]:
        return sorted(c.client_id for c in self.train_clients)

    def client(self, client_id: str) -> ClientDataset:
        for c in self.train_clients:
            if c.client_id == client_id:
                return c
        raise KeyError(client_id)


@dataclass(frozen=True)
class SyntheticDataSpec:
    """Generator knobs for the built-in heterogeneous federation."""

    task_kind: str = "regression"
    num_train_clients: int = 10
    num_test_clients: int = 4
    input_dim: int = 8
    num_classes: int = 1
    heterogeneity: float = 0.5  # client weight / feature-shift spread
    label_noise: float = 0.1
    size_law: str = "fixed"  # "fixed" | "log_uniform"
    examples_per_client: int = 20  # N for fixed
    min_examples: int = 4  # log_uniform lower bound
    max_examples: int = 64  # log_uniform upper bound

    def __post_init__(self):
        if self.task_kind not in ("regression", "classification"):
            raise ValueError(f"unknown task_kind '{self.task_kind}'")
        if self.num_train_clients < 1 or self.input_dim < 1:
            raise ValueError("num_train_clients and input_dim must be >= 1")
        if self.num_test_clients < 0:
            raise ValueError("num_test_clients must be >= 0")
        if self.heterogeneity < 0 or self.label_noise < 0:
            raise ValueError("heterogeneity and label_noise must be >= 0")
        if self.task_kind == "classification" and self.num_classes < 2:
            raise ValueError("classification requires num_classes >= 2")
        if self.size_law == "fixed":
            if self.examples_per_client < 1:
                raise ValueError("examples_per_client must be >= 1")
        elif self.size_law == "log_uniform":
            if not (1 <= self.min_examples <= self.max_examples):
                raise ValueError("need 1 <= min_examples <= max_examples")
        else:
            raise ValueError(f"unknown size_law '{self.size_law}'")

    @property
    def output_dim(self) -> int:
        return self.num_classes if self.task_kind == "classification" else 1


def _client_size(spec: SyntheticDataSpec, stream: np.random.Generator) -> int:
    if spec.size_law == "fixed":
        return spec.examples_per_client
    u = stream.uniform(math.log(spec.min_examples), math.log(spec.max_examples))
    return int(min(max(round(math.exp(u)), spec.min_examples), spec.max_examples))


def _make_client(spec: SyntheticDataSpec, global_w: np.ndarray, client_id: str,
                 stream: np.random.Generator) -> ClientDataset:
    n = _client_size(spec, stream)
    d, out = spec.input_dim, spec.output_dim
    w_k = global_w + spec.heterogeneity * stream.standard_normal((d, out))
    shift = spec.heterogeneity * stream.standard_normal(d)
    x = stream.standard_normal((n, d)) + shift
    scores = x @ w_k + spec.label_noise * stream.standard_normal((n, out))
    if spec.task_kind == "classification":
        labels = np.argmax(scores, axis=1).astype(np.int64)
    else:
        labels = scores[:, 0]
    return ClientDataset(client_id=client_id, features=x, labels=labels, weight=float(n))


def generate_synthetic(spec: SyntheticDataSpec, master_seed: int) -> FederatedDataset:
    """Deterministically generate a federation from (spec, master_seed)."""
    global_w = derive_stream(master_seed, (PATH_DATA, 0)).standard_normal((spec.input_dim, spec.output_dim))
    train = [
        _make_client(spec, global_w, f"c{i:05d}", derive_stream(master_seed, (PATH_DATA, 1, i)))
        for i in range(spec.num_train_clients)
    ]
    test = [
        _make_client(spec, global_w, f"t{i:05d}", derive_stream(master_seed, (PATH_DATA, 2, i)))
        for i in range(spec.num_test_clients)
    ]
    return FederatedDataset(
        train_clients=train,
        test_clients=test,
        task_kind=spec.task_kind,
        num_classes=spec.num_classes if spec.task_kind == "classification" else 1,
        input_dim=spec.input_dim,
    )


class DatasetFormatError(ValueError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_dataset(fed: FederatedDataset, path: str, *, generator: SyntheticDataSpec | None = None,
                 seed: int | None = None) -> None:
    """Write the portable line-oriented dataset file."""
    header = {
        "task_kind": fed.task_kind,
        "input_dim": fed.input_dim,
        "num_classes": fed.num_classes,
        "generator": None if generator is None else generator.__dict__,
        "seed": seed,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(FORMAT_MAGIC + "\n")
        f.write("header\t" + json.dumps(header, sort_keys=True) + "\n")
        for split, clients in (("train", fed.train_clients), ("test", fed.test_clients)):
            for c in clients:
                _write_client(f, split, c, fed.task_kind)


def _write_client(f: TextIO, split: str, c: ClientDataset, task_kind: str) -> None:
    f.write(f"client\t{split}\t{c.client_id}\t{c.num_examples}\t{_fmt(c.weight)}\n")
    f.write("features\t" + " ".join(_fmt(v) for v in c.features.ravel()) + "\n")
    if task_kind == "classification":
        f.write("labels\t" + " ".join(str(int(v)) for v in c.labels) + "\n")
    else:
        f.write("labels\t" + " ".join(_fmt(v) for v in c.labels) + "\n")


def load_dataset(path: str) -> FederatedDataset:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != FORMAT_MAGIC:
        raise DatasetFormatError(1, f"expected magic '{FORMAT_MAGIC}'")
    if len(lines) < 2 or not lines[1].startswith("header\t"):
        raise DatasetFormatError(2, "expected header record")
    try:
        header = json.loads(lines[1].split("\t", 1)[1])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(2, f"malformed header JSON: {exc}") from None
    for key in ("task_kind", "input_dim", "num_classes"):
        if key not in header:
            raise DatasetFormatError(2, f"header missing '{key}'")
    task_kind = header["task_kind"]
    input_dim = int(header["input_dim"])

    splits: dict[str, list[ClientDataset]] = {"train": [], "test": []}
    i = 2
    while i < len(lines):
        if lines[i] == "":
            i += 1
            continue
        parts = lines[i].split("\t")
        if parts[0] != "client" or len(parts) != 5:
            raise DatasetFormatError(i + 1, "expected 'client' record with 5 fields")
        _, split, client_id, n_str, w_str = parts
        if split not in splits:
            raise DatasetFormatError(i + 1, f"unknown split '{split}'")
        try:
            n = int(n_str)
            weight = float(w_str)
        except ValueError:
            raise DatasetFormatError(i + 1, "malformed client size/weight") from None
        if i + 2 >= len(lines):
            raise DatasetFormatError(i + 1, "truncated client record")
        feat_line, label_line = lines[i + 1], lines[i + 2]
        if not feat_line.startswith("features\t"):
            raise DatasetFormatError(i + 2, "expected 'features' record")
        if not label_line.startswith("labels\t"):
            raise DatasetFormatError(i + 3, "expected 'labels' record")
        try:
            feats = np.array([float(t) for t in feat_line.split("\t", 1)[1].split()], dtype=np.float64)
        except ValueError:
            raise DatasetFormatError(i + 2, "malformed feature values") from None
        if feats.size != n * input_dim:
            raise DatasetFormatError(i + 2, f"expected {n * input_dim} feature values, got {feats.size}")
        label_text = label_line.split("\t", 1)[1]
        try:
            if task_kind == "classification":
                labels = np.array([int(t) for t in label_text.split()], dtype=np.int64)
            else:
                labels = np.array([float(t) for t in label_text.split()], dtype=np.float64)
        except ValueError:
            raise DatasetFormatError(i + 3, "malformed label values") from None
        if labels.shape[0] != n:
            raise DatasetFormatError(i + 3, f"expected {n} labels, got {labels.shape[0]}")
        splits[split].append(ClientDataset(client_id=client_id, features=feats.reshape(n, input_dim),
                                           labels=labels, weight=weight))
        i += 3

    return FederatedDataset(
        train_clients=splits["train"],
        test_clients=splits["test"],
        task_kind=task_kind,
        num_classes=int(header["num_classes"]),
        input_dim=input_dim,
    )
