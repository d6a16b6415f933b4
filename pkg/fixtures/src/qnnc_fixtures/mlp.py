"""Bias-free multilayer perceptron trained with minibatch SGD.

The container format carries weight matrices only, so the model has no
bias terms; inputs are standardized upstream to compensate.  Weight
matrices are stored (fan_out, fan_in): row j holds the input weights of
output node j.
"""

from __future__ import annotations

import numpy as np


class TrainingDiverged(RuntimeError):
    pass


def init_weights(dims, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [
        rng.normal(0.0, np.sqrt(2.0 / dims[i]), size=(dims[i + 1], dims[i]))
        for i in range(len(dims) - 1)
    ]


def forward(weights, x: np.ndarray) -> np.ndarray:
    """Dense pass: ReLU on hidden layers, raw logits at the output.

    ``x`` may be a single vector or a (batch, features) matrix.
    """
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    for w in weights[:-1]:
        a = np.maximum(a @ w.T, 0.0)
    logits = a @ weights[-1].T
    return logits[0] if np.asarray(x).ndim == 1 else logits


def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def accuracy(weights, x, y) -> float:
    return float((forward(weights, x).argmax(axis=1) == y).mean())


def train(
    dims,
    x,
    y,
    seed: int = 0,
    epochs: int = 60,
    batch_size: int = 32,
    lr: float = 0.05,
    weight_range: float | None = None,
) -> list[np.ndarray]:
    """Cross-entropy SGD; raises TrainingDiverged on non-finite loss.

    With ``weight_range`` set, every update is projected back into
    [-weight_range, weight_range], so the trained model is natively
    quantizable over that interval instead of being damaged by clipping
    at export time.
    """
    n_classes = dims[-1]
    weights = init_weights(dims, seed)
    if weight_range is not None:
        for w in weights:
            np.clip(w, -weight_range, weight_range, out=w)
    rng = np.random.default_rng(seed + 1)
    onehot = np.eye(n_classes)[y]
    for _ in range(epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), batch_size):
            idx = order[start : start + batch_size]
            xb, tb = x[idx], onehot[idx]
            # forward, keeping activations
            acts = [xb]
            for w in weights[:-1]:
                acts.append(np.maximum(acts[-1] @ w.T, 0.0))
            logits = acts[-1] @ weights[-1].T
            probs = _softmax_rows(logits)
            if not np.isfinite(probs).all():
                raise TrainingDiverged("softmax produced non-finite values")
            # backward
            delta = (probs - tb) / len(idx)
            grads = [None] * len(weights)
            grads[-1] = delta.T @ acts[-1]
            for layer in range(len(weights) - 2, -1, -1):
                delta = (delta @ weights[layer + 1]) * (acts[layer + 1] > 0)
                grads[layer] = delta.T @ acts[layer]
            for w, g in zip(weights, grads):
                w -= lr * g
                if weight_range is not None:
                    np.clip(w, -weight_range, weight_range, out=w)
    for w in weights:
        if not np.isfinite(w).all():
            raise TrainingDiverged("weights left the finite range")
    return weights
