"""Linear softmax classification head trained with cross-entropy + AdamW."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import optim, seeds


class ClassifierError(ValueError):
    """Raised for invalid training inputs."""


@dataclass(frozen=True)
class LinearHead:
    """One linear layer: logits = X @ weights.T + bias."""

    weights: np.ndarray  # (n_classes, dim)
    bias: np.ndarray  # (n_classes,)
    classes: tuple[int, ...]  # logit column -> label value

    def logits(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights.T + self.bias

    def probabilities(self, X: np.ndarray) -> np.ndarray:
        z = self.logits(X)
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.argmax(self.logits(X), axis=1)
        return np.asarray(self.classes)[idx]


def train_classifier(
    features: np.ndarray,
    labels: np.ndarray,
    epochs: int = 200,
    lr: float = 0.05,
    seed: int = 0,
    weight_decay: float = 0.0,
) -> LinearHead:
    """Full-batch softmax cross-entropy training, deterministic per seed.

    Any upstream remapping must be applied to `features` beforehand; the head
    never touches remap parameters, which keeps them frozen by construction.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or len(X) != len(y):
        raise ClassifierError("features must be (n, dim) aligned with labels")
    if not np.isfinite(X).all():
        raise ClassifierError("non-finite feature values")
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise ClassifierError(f"need at least 2 labels in training data, got {classes}")
    targets = np.searchsorted(classes, y)
    onehot = np.eye(len(classes))[targets]

    rng = np.random.default_rng(seeds.derive(seed, "head-init"))
    bound = 1.0 / np.sqrt(X.shape[1])
    tensors = {
        "weights": rng.uniform(-bound, bound, size=(len(classes), X.shape[1])),
        "bias": np.zeros(len(classes)),
    }
    state = optim.init_state(tensors)
    n = len(X)
    for _ in range(epochs):
        logits = X @ tensors["weights"].T + tensors["bias"]
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs = e / e.sum(axis=1, keepdims=True)
        delta = (probs - onehot) / n
        grads = {"weights": delta.T @ X, "bias": delta.sum(axis=0)}
        tensors, state = optim.adamw_step(
            tensors, grads, state, lr=lr, weight_decay=weight_decay
        )
    return LinearHead(tensors["weights"], tensors["bias"], classes)


def cross_entropy(head: LinearHead, X: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood under the head."""
    probs = head.probabilities(X)
    targets = np.searchsorted(head.classes, np.asarray(y))
    return float(-np.mean(np.log(probs[np.arange(len(y)), targets] + 1e-300)))
