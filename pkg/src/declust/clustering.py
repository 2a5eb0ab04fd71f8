"""Similarity graphs, Markov clustering, k-means, and group labeling.

The Markov-clustering path builds a column-stochastic transition matrix from
clamped cosine similarities, alternates expansion (matrix squaring) with
inflation (entrywise powering + renormalization) until the matrix settles
into a near block-diagonal fixed point, then reads clusters off the attractor
structure.  Clusters are flagged balanced/imbalanced by their majority-label
fraction, and the two groups are downsampled to equal, label-balanced sizes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import seeds


class ClusteringError(ValueError):
    """Raised for invalid clustering inputs."""


@dataclass(frozen=True)
class ClusterAssignment:
    """Record-index -> cluster-id map with a dense cluster-id range."""

    cluster_of: np.ndarray
    cluster_count: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "cluster_of", np.asarray(self.cluster_of, dtype=np.int64))
        if self.cluster_of.ndim != 1:
            raise ClusteringError("cluster_of must be a flat index array")
        if len(self.cluster_of) and (
            self.cluster_of.min() < 0 or self.cluster_of.max() >= self.cluster_count
        ):
            raise ClusteringError("cluster ids must lie in [0, cluster_count)")
        present = np.unique(self.cluster_of)
        if len(present) != self.cluster_count:
            raise ClusteringError("every cluster id in range must be non-empty")

    def __len__(self) -> int:
        return len(self.cluster_of)

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.cluster_of == cluster_id)


@dataclass(frozen=True)
class ClusterGrouping:
    """Balanced/imbalanced flags per cluster, plus downsampled member lists.

    `imbalanced[c]` is True when cluster c is large enough and label-skewed
    enough to count as a shortcut risk.  `imbalanced_members` and
    `balanced_members` are filled by `downsample_groups` and are equal-sized,
    label-balanced index arrays.  `mode` records how the two groups were
    formed: "imbalance" (per-cluster skew flags) or "random_control" (an
    arbitrary cluster split, used when no cluster is imbalanced so the ID/OOD
    protocol can still run as a control).
    """

    imbalanced: np.ndarray
    majority_fraction: np.ndarray
    imbalanced_members: np.ndarray | None = None
    balanced_members: np.ndarray | None = None
    mode: str = "imbalance"

    @property
    def has_imbalanced(self) -> bool:
        return bool(np.any(self.imbalanced))


@dataclass(frozen=True)
class MclResult:
    assignment: ClusterAssignment
    converged: bool
    iterations: int


@dataclass(frozen=True)
class KmeansResult:
    assignment: ClusterAssignment
    centers: np.ndarray
    inertia: float
    iterations: int
    # (centers, labels, inertia) after each Lloyd update, when recorded
    history: tuple[tuple[np.ndarray, np.ndarray, float], ...] | None = None


def is_column_stochastic(M: np.ndarray, tol: float = 1e-9) -> bool:
    """True when all entries are non-negative and every column sums to 1."""
    return bool((M >= 0).all() and np.abs(M.sum(axis=0) - 1.0).max() <= tol)


def build_markov_matrix(
    X: np.ndarray,
    sparsify_top_k: int | None = None,
    self_loop: float = 1.0,
) -> np.ndarray:
    """Column-stochastic transition matrix from clamped cosine similarities.

    Off-diagonal entries are max(0, cosine(x_i, x_j)); the diagonal carries
    only the explicit self-loop weight (the trivial self-similarity of 1 is
    not counted, so ``self_loop=1.0`` reproduces standard practice of adding
    unit self-loops to a loop-free similarity graph).  When sparsify_top_k is
    given, only the k largest entries of each column survive before
    normalization.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ClusteringError("need at least 2 vectors")
    if self_loop < 0:
        raise ClusteringError("self_loop must be >= 0")
    norms = np.linalg.norm(X, axis=1)
    if (norms == 0).any():
        bad = int(np.flatnonzero(norms == 0)[0])
        raise ClusteringError(f"zero vector at index {bad}: cosine similarity undefined")

    S = (X / norms[:, None]) @ (X / norms[:, None]).T
    np.maximum(S, 0.0, out=S)
    np.fill_diagonal(S, self_loop)

    if sparsify_top_k is not None:
        k = int(sparsify_top_k)
        if k < 1:
            raise ClusteringError("sparsify_top_k must be >= 1")
        if k < n:
            cutoff_idx = np.argpartition(S, n - k, axis=0)[: n - k]
            S[cutoff_idx, np.arange(n)[None, :]] = 0.0

    sums = S.sum(axis=0)
    if (sums == 0).any():
        bad = int(np.flatnonzero(sums == 0)[0])
        raise ClusteringError(
            f"column {bad} is all-zero after clamping; add a self-loop to make it stochastic"
        )
    return S / sums


def mcl_step(M: np.ndarray, inflation: float) -> np.ndarray:
    """One expansion + inflation round: M <- renorm((M @ M) ** inflation)."""
    E = M @ M
    np.power(E, inflation, out=E)
    return E / E.sum(axis=0)


def mcl(
    M: np.ndarray,
    inflation: float = 2.0,
    max_iter: int = 200,
    tol: float = 1e-6,
) -> MclResult:
    """Markov clustering of a column-stochastic matrix.

    Expansion squares the matrix to simulate two-step random walks; inflation
    raises entries to `inflation` and renormalizes columns, boosting strong
    transitions and starving weak ones.  Iteration stops when the max-norm
    change drops below `tol` (or at max_iter, in which case ``converged`` is
    False and the assignment is best-effort).

    Clusters come from the converged support: rows with positive diagonal act
    as attractors, each column joins the attractors it flows to, and attractor
    rows with overlapping support are merged (union-find), so a column pulled
    toward several attractors deterministically joins their union.
    """
    if inflation <= 1.0:
        raise ClusteringError("inflation exponent must be > 1")
    M = np.asarray(M, dtype=np.float64)
    if not is_column_stochastic(M, tol=1e-6):
        raise ClusteringError("input must be a column-stochastic matrix")

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        nxt = mcl_step(M, inflation)
        delta = float(np.abs(nxt - M).max())
        M = nxt
        if delta < tol:
            converged = True
            break

    return MclResult(_clusters_from_support(M), converged, iterations)


_SUPPORT_EPS = 1e-6


def _clusters_from_support(M: np.ndarray) -> ClusterAssignment:
    n = M.shape[0]
    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    attractors = np.flatnonzero(np.diagonal(M) > _SUPPORT_EPS)
    attractor_mask = np.zeros(n, dtype=bool)
    attractor_mask[attractors] = True
    for i in attractors:
        for j in np.flatnonzero(M[i] > _SUPPORT_EPS):
            union(i, int(j))
    # Columns that never crossed the support threshold attach to the row
    # holding their largest mass (numerical safety net; converged matrices
    # put every column squarely on an attractor).
    for j in range(n):
        if find(j) == j and not attractor_mask[j]:
            union(int(np.argmax(M[:, j])), j)

    roots = np.array([find(i) for i in range(n)])
    _, labels = np.unique(roots, return_inverse=True)
    # relabel in order of first appearance so ids are stable per input order
    order = {}
    canonical = np.empty(n, dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab not in order:
            order[lab] = len(order)
        canonical[i] = order[lab]
    return ClusterAssignment(canonical, len(order))


def kmeans(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
    record_history: bool = False,
) -> KmeansResult:
    """Seeded k-means++ initialization followed by Lloyd iterations.

    Stops when every center moves less than `tol`.  Clusters that empty out
    are re-seeded from the point farthest from its assigned center, which
    never increases the objective.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if not 2 <= k <= n:
        raise ClusteringError(f"k must satisfy 2 <= k <= n, got k={k}, n={n}")
    if max_iter < 1:
        raise ClusteringError("max_iter must be >= 1")
    rng = np.random.default_rng(seeds.derive(seed, "kmeans"))

    centers = _kmeanspp_init(X, k, rng)
    history: list[tuple[np.ndarray, np.ndarray, float]] = []
    labels = np.zeros(n, dtype=np.int64)
    for iteration in range(1, max_iter + 1):
        d2 = _sq_dists(X, centers)
        labels = np.argmin(d2, axis=1)
        for c in range(k):
            if not (labels == c).any():
                far = int(np.argmax(d2[np.arange(n), labels]))
                centers[c] = X[far]
                labels[far] = c
        new_centers = np.stack([X[labels == c].mean(axis=0) for c in range(k)])
        shift = float(np.linalg.norm(new_centers - centers, axis=1).max())
        centers = new_centers
        inertia = float(np.sum((X - centers[labels]) ** 2))
        if record_history:
            history.append((centers.copy(), labels.copy(), inertia))
        if shift < tol:
            break

    labels = np.argmin(_sq_dists(X, centers), axis=1)
    inertia = float(np.sum((X - centers[labels]) ** 2))
    compact, count = _compact_labels(labels)
    return KmeansResult(
        ClusterAssignment(compact, count),
        centers,
        inertia,
        iteration,
        tuple(history) if record_history else None,
    )


def _sq_dists(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[c] = X[rng.integers(n)]
        else:
            centers[c] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


def _compact_labels(labels: np.ndarray) -> tuple[np.ndarray, int]:
    order = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab not in order:
            order[lab] = len(order)
        out[i] = order[lab]
    return out, len(order)


def label_imbalance(
    assignment: ClusterAssignment,
    labels: np.ndarray,
    tau: float = 0.8,
    min_size: int = 5,
) -> ClusterGrouping:
    """Flag each cluster imbalanced when it is big and label-skewed enough.

    A cluster is imbalanced iff its size >= min_size and its majority-label
    fraction >= tau; small clusters always land in the balanced group.
    """
    if not 0.5 < tau <= 1.0:
        raise ClusteringError("tau must lie in (0.5, 1]")
    labels = np.asarray(labels)
    if len(labels) != len(assignment.cluster_of):
        raise ClusteringError("assignment must cover all labeled records")
    k = assignment.cluster_count
    imbalanced = np.zeros(k, dtype=bool)
    fraction = np.zeros(k, dtype=np.float64)
    for c in range(k):
        members = assignment.members(c)
        _, counts = np.unique(labels[members], return_counts=True)
        fraction[c] = counts.max() / len(members)
        imbalanced[c] = len(members) >= min_size and fraction[c] >= tau
    return ClusterGrouping(imbalanced, fraction)


def downsample_groups(
    grouping: ClusterGrouping,
    assignment: ClusterAssignment,
    labels: np.ndarray,
    seed: int = 0,
) -> ClusterGrouping:
    """Random subsample so both groups match in size and label balance.

    Each group keeps the same number of samples per label (the minimum count
    across both groups and all labels), making the two groups equal-sized and
    exactly label-balanced.  Deterministic per seed.
    """
    labels = np.asarray(labels)
    in_imbalanced = grouping.imbalanced[assignment.cluster_of]
    kept = balance_member_groups(
        {"imbalanced": np.flatnonzero(in_imbalanced), "balanced": np.flatnonzero(~in_imbalanced)},
        labels,
        seed,
    )
    return replace(
        grouping,
        imbalanced_members=kept["imbalanced"],
        balanced_members=kept["balanced"],
    )


def balance_member_groups(
    groups: dict[str, np.ndarray], labels: np.ndarray, seed: int
) -> dict[str, np.ndarray]:
    """Equal-size, per-label-equal random subsample of each member pool."""
    labels = np.asarray(labels)
    if any(len(v) == 0 for v in groups.values()):
        empty = next(name for name, v in groups.items() if len(v) == 0)
        raise ClusteringError(f"both cluster groups must be non-empty ({empty} group is empty)")

    label_values = np.unique(labels)
    per_label = None
    for name, members in groups.items():
        for y in label_values:
            count = int(np.sum(labels[members] == y))
            if count == 0:
                raise ClusteringError(f"{name} group has no sample of label {int(y)}")
            per_label = count if per_label is None else min(per_label, count)

    rng = np.random.default_rng(seeds.derive(seed, "downsample"))
    kept: dict[str, np.ndarray] = {}
    for name, members in groups.items():
        picks = []
        for y in label_values:
            pool = members[labels[members] == y]
            picks.append(rng.choice(pool, size=per_label, replace=False))
        kept[name] = np.sort(np.concatenate(picks))
    return kept


def write_assignment_csv(
    path: str,
    ids: list[str],
    assignment: ClusterAssignment,
    grouping: ClusterGrouping | None = None,
) -> None:
    """Export (record_id, cluster_id, group_flag) rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "cluster_id", "group_flag"])
        for i, rid in enumerate(ids):
            c = int(assignment.cluster_of[i])
            flag = ""
            if grouping is not None:
                flag = "imbalanced" if grouping.imbalanced[c] else "balanced"
            writer.writerow([rid, c, flag])
