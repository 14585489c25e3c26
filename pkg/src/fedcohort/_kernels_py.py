"""Pure-numpy mini-batch SGD kernels (fallback backend).

Each function advances model arrays in place through a precomputed visit
order. ``order`` holds concatenated per-epoch permutations; ``starts``/``ends``
bound each batch step inside ``order``. Returns the index of the first step
whose batch loss is non-finite, or -1 if all steps completed.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def sgd_linear(w, b, x, y, lr, order, starts, ends):
    # divergence is reported through the return code, not warnings
    with np.errstate(over="ignore", invalid="ignore"):
        return _sgd_linear(w, b, x, y, lr, order, starts, ends)


def _sgd_linear(w, b, x, y, lr, order, starts, ends):
    for s in range(starts.shape[0]):
        idx = order[starts[s]:ends[s]]
        xb = x[idx]
        r = xb @ w + b[0] - y[idx]
        loss = float(np.mean(r * r))
        if not np.isfinite(loss):
            return s
        k = 2.0 * lr / idx.shape[0]
        w -= k * (xb.T @ r)
        b[0] -= k * r.sum()
    return -1


def sgd_softmax(w, b, x, y, lr, order, starts, ends):
    with np.errstate(over="ignore", invalid="ignore"):
        return _sgd_softmax(w, b, x, y, lr, order, starts, ends)


def _sgd_softmax(w, b, x, y, lr, order, starts, ends):
    for s in range(starts.shape[0]):
        idx = order[starts[s]:ends[s]]
        xb = x[idx]
        yb = y[idx]
        n = idx.shape[0]
        logits = xb @ w + b
        g, loss = _softmax_grad_logits(logits, yb, n)
        if not np.isfinite(loss):
            return s
        w -= lr * (xb.T @ g)
        b -= lr * g.sum(axis=0)
    return -1


def sgd_mlp(w1, b1, w2, b2, x, y, lr, order, starts, ends, classification):
    with np.errstate(over="ignore", invalid="ignore"):
        return _sgd_mlp(w1, b1, w2, b2, x, y, lr, order, starts, ends, classification)


def _sgd_mlp(w1, b1, w2, b2, x, y, lr, order, starts, ends, classification):
    for s in range(starts.shape[0]):
        idx = order[starts[s]:ends[s]]
        xb = x[idx]
        n = idx.shape[0]
        hidden = np.tanh(xb @ w1 + b1)
        logits = hidden @ w2 + b2
        if classification:
            g, loss = _softmax_grad_logits(logits, y[idx].astype(np.int64), n)
        else:
            r = logits[:, 0] - y[idx]
            loss = float(np.mean(r * r))
            g = (2.0 / n) * r[:, None]
        if not np.isfinite(loss):
            return s
        gh = (g @ w2.T) * (1.0 - hidden * hidden)
        w2 -= lr * (hidden.T @ g)
        b2 -= lr * g.sum(axis=0)
        w1 -= lr * (xb.T @ gh)
        b1 -= lr * gh.sum(axis=0)
    return -1


def _softmax_grad_logits(logits, yb, n):
    rows = np.arange(n)
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    z = e.sum(axis=1, keepdims=True)
    loss = float(np.mean(np.log(z[:, 0]) + m[:, 0] - logits[rows, yb]))
    g = e / z
    g[rows, yb] -= 1.0
    g /= n
    return g, loss
