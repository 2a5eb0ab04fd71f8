"""Cluster-tendency and similarity measurements.

Note the Hopkins orientation used throughout this library: values near 0 mean
strongly clustered data and values near 0.5 mean spatial randomness.  This
mirrors the textbook statistic (real nearest-neighbor mass in the numerator
instead of probe mass) so that "low = clustered" holds, which is the
convention all reports and the remap stopping rule rely on.
"""

from __future__ import annotations

import numpy as np

from . import seeds
from .clustering import ClusterAssignment


class MetricError(ValueError):
    """Raised for invalid metric inputs."""


def default_probe_count(n: int) -> int:
    return max(1, min(100, n // 10))


def hopkins(X: np.ndarray, probes: int | None = None, seed: int = 0) -> float:
    """Hopkins statistic in the low-means-clustered orientation.

    Samples `probes` real points (without replacement) and `probes` synthetic
    points uniform in the axis-aligned bounding box of X.  With w_i the
    distance from each sampled real point to its nearest *other* real point
    and u_i the distance from each synthetic point to its nearest real point,

        H = sum(w) / (sum(u) + sum(w))

    Tight clusters push H toward 0; uniform data gives H near 0.5.  All
    points identical is defined as H = 0.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise MetricError("X must be an (n, dim) matrix")
    n = X.shape[0]
    m = default_probe_count(n) if probes is None else int(probes)
    if m < 1:
        raise MetricError("probe count must be >= 1")
    if n < 2 * m:
        raise MetricError(f"need n >= 2*probes, got n={n}, probes={m}")

    rng = np.random.default_rng(seeds.derive(seed, "hopkins"))
    lo, hi = X.min(axis=0), X.max(axis=0)
    sample_idx = rng.choice(n, size=m, replace=False)
    synthetic = rng.uniform(lo, hi, size=(m, X.shape[1]))

    d_real = np.sqrt(((X[sample_idx, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    d_real[np.arange(m), sample_idx] = np.inf  # exclude each point itself
    w = d_real.min(axis=1)
    u = np.sqrt(((synthetic[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)).min(axis=1)

    denom = float(u.sum() + w.sum())
    if denom == 0.0:
        return 0.0
    return float(w.sum() / denom)


def ari(a: ClusterAssignment, b: ClusterAssignment) -> float:
    """Adjusted Rand index between two partitions of the same records.

    1.0 for identical partitions, expectation 0 for independent random ones.
    """
    if len(a.cluster_of) != len(b.cluster_of):
        raise MetricError("assignments must cover the same record set")
    n = len(a.cluster_of)
    table = np.zeros((a.cluster_count, b.cluster_count), dtype=np.int64)
    np.add.at(table, (a.cluster_of, b.cluster_of), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    index = comb2(table).sum()
    row_sum = comb2(table.sum(axis=1)).sum()
    col_sum = comb2(table.sum(axis=0)).sum()
    expected = row_sum * col_sum / comb2(n)
    max_index = (row_sum + col_sum) / 2.0
    if max_index == expected:
        return 1.0  # both partitions degenerate and identical in pair structure
    return float((index - expected) / (max_index - expected))


def centroid_cos_separation(X: np.ndarray, labels: np.ndarray) -> float:
    """Mean cosine similarity between class centroids over unordered pairs.

    High values mean class regions overlap in angle; 1.0 means all centroids
    point the same way.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise MetricError("need at least 2 labels")
    centroids = np.stack([X[labels == y].mean(axis=0) for y in classes])
    norms = np.linalg.norm(centroids, axis=1)
    if (norms == 0).any():
        bad = classes[int(np.flatnonzero(norms == 0)[0])]
        raise MetricError(f"class {int(bad)} has a zero centroid")
    unit = centroids / norms[:, None]
    cos = unit @ unit.T
    iu = np.triu_indices(len(classes), k=1)
    return float(cos[iu].mean())


def delta_theta(X_before: np.ndarray, X_after: np.ndarray, labels: np.ndarray) -> float:
    """Drop in mean centroid cosine from the original to the remapped space.

    Positive values mean class centroids moved apart in angle after remapping.
    """
    return centroid_cos_separation(X_before, labels) - centroid_cos_separation(X_after, labels)


def jaccard_tokens(a, b) -> float:
    """Jaccard similarity of the two token sets; both empty counts as 1.0."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def levenshtein_similarity(a, b) -> float:
    """1 - edit_distance / max length, with unit token edit costs.

    Both sequences empty gives 1.0; one empty sequence gives 0.0.
    """
    a, b = list(a), list(b)
    if not a and not b:
        return 1.0
    return 1.0 - _edit_distance(a, b) / max(len(a), len(b))


def _edit_distance(a: list, b: list) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ai in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, bj in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ai != bj))
        prev = cur
    return prev[-1]


def group_pair_sampler(
    tokens: list[list[str]],
    assignment: ClusterAssignment,
    trials: int = 10_000,
    seed: int = 0,
    metric: str = "jaccard",
    permutations: int = 10_000,
) -> dict:
    """Compare token similarity of intra- vs inter-cluster record pairs.

    Draws `trials` random pairs of each kind, reports the group means and a
    permutation-test p-value for the difference of means (two-sided).  The
    distributions are bounded and skewed, so a permutation test is used
    instead of a t-test.
    """
    if metric == "jaccard":
        score = jaccard_tokens
    elif metric == "levenshtein":
        score = levenshtein_similarity
    else:
        raise MetricError(f"unknown metric {metric!r}")
    if tokens is None or any(t is None for t in tokens):
        raise MetricError("all records need token lists")
    if assignment.cluster_count < 2:
        raise MetricError("need at least 2 clusters")

    rng = np.random.default_rng(seeds.derive(seed, "pair-sampler", metric))
    clusters = [assignment.members(c) for c in range(assignment.cluster_count)]
    rich = [c for c in clusters if len(c) >= 2]
    if not rich:
        raise MetricError("no cluster has 2 or more members; no intra pairs exist")

    pair_weights = np.array([len(c) * (len(c) - 1) for c in rich], dtype=np.float64)
    pair_weights /= pair_weights.sum()
    intra = np.empty(trials)
    for t in range(trials):
        members = rich[rng.choice(len(rich), p=pair_weights)]
        i, j = rng.choice(len(members), size=2, replace=False)
        intra[t] = score(tokens[members[i]], tokens[members[j]])

    n = len(assignment.cluster_of)
    inter = np.empty(trials)
    for t in range(trials):
        while True:
            i, j = rng.integers(0, n, size=2)
            if assignment.cluster_of[i] != assignment.cluster_of[j]:
                break
        inter[t] = score(tokens[i], tokens[j])

    observed = intra.mean() - inter.mean()
    pooled = np.concatenate([intra, inter])
    count = 0
    for _ in range(permutations):
        rng.shuffle(pooled)
        diff = pooled[:trials].mean() - pooled[trials:].mean()
        if abs(diff) >= abs(observed) - 1e-15:
            count += 1
    p_value = (count + 1) / (permutations + 1)

    return {
        "metric": metric,
        "intra_mean": float(intra.mean()),
        "inter_mean": float(inter.mean()),
        "p_value": float(p_value),
        "trials": trials,
        "seed": seed,
    }
