"""Layered parameter containers and the arithmetic shared by every module.

Model state, client updates, pseudo-gradients, and optimizer accumulators are
all ``LayeredParams``: an ordered list of named float64 arrays. Instances are
immutable after construction, so they can be shared freely across worker
threads; every operation returns a new instance.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Sequence

import numpy as np


class ShapeMismatchError(ValueError):
    """Two LayeredParams disagree in layer names, order, or shape."""


class NonFiniteError(ArithmeticError):
    """A layer contains NaN or Inf. Carries the offending layer name."""

    def __init__(self, layer: str, context: str = ""):
        self.layer = layer
        self.context = context
        suffix = f" ({context})" if context else ""
        super().__init__(f"non-finite values in layer '{layer}'{suffix}")


class LayeredParams:
    """Ordered, named, immutable float64 layers.

    Layer names must be unique and nonempty and the total element count must
    be positive. Values are copied in and marked read-only. Arrays may have
    any shape (vectors for biases, matrices for weights); two instances are
    compatible iff names, order, and shapes all match.
    """

    __slots__ = ("_names", "_values")

    def __init__(self, layers: Iterable[tuple[str, np.ndarray]], *, check_finite: bool = True):
        names: list[str] = []
        values: list[np.ndarray] = []
        for name, arr in layers:
            if not name:
                raise ValueError("layer names must be nonempty")
            a = np.array(arr, dtype=np.float64, copy=True)
            a.setflags(write=False)
            names.append(name)
            values.append(a)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate layer names: {names}")
        if sum(v.size for v in values) == 0:
            raise ValueError("LayeredParams must contain at least one element")
        self._names = tuple(names)
        self._values = tuple(values)
        if check_finite:
            for name, v in zip(self._names, self._values):
                if not np.isfinite(v).all():
                    raise NonFiniteError(name)

    @classmethod
    def _wrap(cls, names: tuple[str, ...], values: Sequence[np.ndarray]) -> "LayeredParams":
        # Internal fast path: takes ownership of freshly computed arrays and
        # still enforces the finiteness invariant.
        out = object.__new__(cls)
        vals = []
        for name, v in zip(names, values):
            if not np.isfinite(v).all():
                raise NonFiniteError(name)
            v.setflags(write=False)
            vals.append(v)
        out._names = names
        out._values = tuple(vals)
        return out

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def values(self) -> tuple[np.ndarray, ...]:
        return self._values

    def layer(self, name: str) -> np.ndarray:
        try:
            return self._values[self._names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    @property
    def num_elements(self) -> int:
        return sum(v.size for v in self._values)

    def __iter__(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(zip(self._names, self._values))

    def __len__(self) -> int:
        return len(self._names)

    def __repr__(self) -> str:
        spec = ", ".join(f"{n}{list(v.shape)}" for n, v in self)
        return f"LayeredParams({spec})"

    def like(self, arrays: Sequence[np.ndarray]) -> "LayeredParams":
        """New instance with this one's layer names and the given values."""
        if len(arrays) != len(self._names):
            raise ShapeMismatchError(f"expected {len(self._names)} layers, got {len(arrays)}")
        return LayeredParams._wrap(self._names, [np.asarray(a, dtype=np.float64) for a in arrays])

    def allclose(self, other: "LayeredParams", rtol: float = 0.0, atol: float = 0.0) -> bool:
        assert_compatible(self, other)
        return all(np.allclose(a, b, rtol=rtol, atol=atol) for a, b in zip(self._values, other._values))


def zeros_like(p: LayeredParams) -> LayeredParams:
    return LayeredParams._wrap(p.names, [np.zeros_like(v) for v in p.values])


def assert_compatible(p: LayeredParams, q: LayeredParams) -> None:
    """Raise ShapeMismatchError naming the first offending layer."""
    if len(p) != len(q):
        raise ShapeMismatchError(f"layer count mismatch: {len(p)} vs {len(q)}")
    for (pn, pv), (qn, qv) in zip(p, q):
        if pn != qn:
            raise ShapeMismatchError(f"layer name mismatch: '{pn}' vs '{qn}'")
        if pv.shape != qv.shape:
            raise ShapeMismatchError(f"layer '{pn}' shape mismatch: {pv.shape} vs {qv.shape}")


def axpy(a: float, p: LayeredParams, q: LayeredParams) -> LayeredParams:
    """Layerwise a*p + q."""
    assert_compatible(p, q)
    return LayeredParams._wrap(p.names, [a * pv + qv for pv, qv in zip(p.values, q.values)])


def scale(a: float, p: LayeredParams) -> LayeredParams:
    return LayeredParams._wrap(p.names, [a * v for v in p.values])


def subtract(p: LayeredParams, q: LayeredParams) -> LayeredParams:
    """Layerwise p - q."""
    assert_compatible(p, q)
    return LayeredParams._wrap(p.names, [pv - qv for pv, qv in zip(p.values, q.values)])


def dot(p: LayeredParams, q: LayeredParams) -> float:
    assert_compatible(p, q)
    return float(sum(np.dot(pv.ravel(), qv.ravel()) for pv, qv in zip(p.values, q.values)))


def layer_norms(p: LayeredParams) -> dict[str, float]:
    """Per-layer l2 norms, used by the layer-wise server optimizers."""
    return {name: float(np.linalg.norm(v.ravel())) for name, v in p}


def l2_norm(p: LayeredParams) -> float:
    """Whole-vector l2 norm: sqrt of the sum of squares over all layers."""
    return math.sqrt(sum(float(np.dot(v.ravel(), v.ravel())) for v in p.values))


def check_finite(p: LayeredParams, context: str = "") -> LayeredParams:
    """Re-validate finiteness, attaching context (e.g. round number) on failure."""
    for name, v in p:
        if not np.isfinite(v).all():
            raise NonFiniteError(name, context)
    return p
