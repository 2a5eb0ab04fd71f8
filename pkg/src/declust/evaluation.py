"""Classifier evaluation: accuracy, macro-F1, PR curves, AUC, and PCA."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .classifier import LinearHead
from .data import DatasetSplit, EmbeddingDataset
from .remap import RemapParams, remap_all


class EvalError(ValueError):
    """Raised for empty test sets or malformed split references."""


def accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    return float(np.mean(np.asarray(y_true) == np.asarray(y_pred)))


def macro_f1(y_true: np.ndarray, y_pred: np.ndarray, classes) -> float:
    """Unweighted mean of per-class F1; a class with no support and no
    predictions contributes 0."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    scores = []
    for c in classes:
        tp = np.sum((y_pred == c) & (y_true == c))
        fp = np.sum((y_pred == c) & (y_true != c))
        fn = np.sum((y_pred != c) & (y_true == c))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def pr_curve(y_true: np.ndarray, scores: np.ndarray, positive) -> list[tuple[float, float]]:
    """(recall, precision) points from a descending score sweep.

    Ties share one threshold.  The curve is anchored at recall 0 with the
    precision of the top-scoring group, avoiding the optimistic (0, 1) anchor
    for predictors that cannot rank at all.
    """
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    pos = y_true == positive
    total_pos = int(pos.sum())
    if total_pos == 0 or total_pos == len(y_true):
        raise EvalError("PR curve needs both classes present in the test set")

    order = np.argsort(-scores, kind="stable")
    sorted_pos = pos[order]
    sorted_scores = scores[order]
    tp = np.cumsum(sorted_pos)
    ranks = np.arange(1, len(y_true) + 1)
    # keep only the last index of each tied-score group
    boundary = np.append(sorted_scores[1:] != sorted_scores[:-1], True)
    recall = tp[boundary] / total_pos
    precision = tp[boundary] / ranks[boundary]
    points = [(0.0, float(precision[0]))]
    points += [(float(r), float(p)) for r, p in zip(recall, precision)]
    return points


def pr_auc(points: list[tuple[float, float]]) -> float:
    """Trapezoidal area under a PR curve given in sweep order.

    Points must be non-decreasing in recall (as pr_curve emits them); equal
    recall values form vertical precision drops and contribute no area.
    """
    area = 0.0
    for (r0, p0), (r1, p1) in zip(points[:-1], points[1:]):
        if r1 < r0:
            raise EvalError("PR points must be sorted by recall")
        area += (r1 - r0) * (p0 + p1) / 2.0
    return float(area)


@dataclass(frozen=True)
class TestSetReport:
    accuracy: float
    macro_f1: float
    pr_auc: float
    pr_curves: dict[int, list[tuple[float, float]]]
    size: int

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "pr_auc": self.pr_auc,
            "pr_curves": {str(k): [[r, p] for r, p in v] for k, v in self.pr_curves.items()},
            "size": self.size,
        }


@dataclass(frozen=True)
class EvalReport:
    id_test: TestSetReport
    ood_test: TestSetReport
    gap: float  # ID accuracy - OOD accuracy
    split_hash: str

    def to_json(self) -> dict:
        return {
            "id_test": self.id_test.to_json(),
            "ood_test": self.ood_test.to_json(),
            "gap": self.gap,
            "split_hash": self.split_hash,
        }


def split_hash(split: DatasetSplit) -> str:
    blob = "|".join(
        [",".join(split.train_ids), ",".join(split.id_test_ids), ",".join(split.ood_test_ids)]
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _score_test_set(head: LinearHead, X: np.ndarray, y: np.ndarray) -> TestSetReport:
    probs = head.probabilities(X)
    pred = np.asarray(head.classes)[np.argmax(probs, axis=1)]
    acc = accuracy(y, pred)
    f1 = macro_f1(y, pred, head.classes)

    curves: dict[int, list[tuple[float, float]]] = {}
    aucs = []
    if len(head.classes) == 2:
        positive = head.classes[1]
        col = head.classes.index(positive)
        curves[positive] = pr_curve(y, probs[:, col], positive)
        aucs.append(pr_auc(curves[positive]))
    else:
        for col, c in enumerate(head.classes):
            if 0 < np.sum(y == c) < len(y):
                curves[c] = pr_curve(y, probs[:, col], c)
                aucs.append(pr_auc(curves[c]))
    return TestSetReport(acc, f1, float(np.mean(aucs)), curves, len(y))


def evaluate(
    head: LinearHead,
    dataset: EmbeddingDataset,
    split: DatasetSplit,
    remap_params: RemapParams | None = None,
) -> EvalReport:
    """Score ID and OOD test sets; the optional remap runs before the head."""
    index = {rid: i for i, rid in enumerate(dataset.ids)}
    missing = [rid for rid in split.id_test_ids + split.ood_test_ids if rid not in index]
    if missing:
        raise EvalError(f"split references unknown ids, e.g. {missing[0]!r}")
    if not split.id_test_ids or not split.ood_test_ids:
        raise EvalError("both test sets must be non-empty")

    reports = []
    for ids in (split.id_test_ids, split.ood_test_ids):
        rows = np.array([index[rid] for rid in ids])
        X = dataset.vectors[rows].astype(np.float64)
        if remap_params is not None:
            X = remap_all(remap_params, X)
        reports.append(_score_test_set(head, X, dataset.label_of[rows]))
    id_rep, ood_rep = reports
    return EvalReport(id_rep, ood_rep, id_rep.accuracy - ood_rep.accuracy, split_hash(split))


def pca_project(X: np.ndarray, k: int):
    """Top-k principal components via eigendecomposition of the covariance.

    Returns (coords (n, k), explained_variance_ratio (k,)).  Components are
    orthonormal with a deterministic sign convention; ratios are
    non-increasing, and directions beyond the covariance rank get ratio 0.
    """
    X = np.asarray(X, dtype=np.float64)
    n, u = X.shape
    if n < 2:
        raise EvalError("PCA needs at least 2 samples")
    if not 1 <= k <= u:
        raise EvalError(f"k must lie in [1, {u}], got {k}")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    components = eigvecs[:, order]
    # sign convention: largest-magnitude entry of each component is positive
    flip = np.sign(components[np.abs(components).argmax(axis=0), np.arange(k)])
    flip[flip == 0] = 1.0
    components *= flip
    top = np.clip(eigvals[order], 0.0, None)
    total = float(np.clip(eigvals, 0.0, None).sum())
    ratios = top / total if total > 0 else np.zeros(k)
    return centered @ components, ratios
