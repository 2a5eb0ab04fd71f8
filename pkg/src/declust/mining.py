"""Quadruplet construction and triplet decomposition.

Every anchor inside an imbalanced cluster is paired with a positive (same
label, different cluster), an intermediate (same label, same cluster) and a
negative (different label).  The intermediate plays a dual role: a negative
against the positive (intra-cluster contrast) and a positive against the
negative (inter-cluster contrast).  Each quadruplet decomposes into exactly
four (anchor, positive, negative) triplets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import seeds
from .clustering import ClusterAssignment, ClusterGrouping

INTER_CLUSTER = "inter_cluster"
INTRA_CLUSTER = "intra_cluster"

_MAX_RESAMPLE = 100  # draws before an anchor is skipped over index collisions


class MiningError(ValueError):
    """Raised when no valid contrastive data can be constructed."""


@dataclass(frozen=True)
class Quadruplet:
    anchor: int
    positive: int
    intermediate: int
    negative: int

    def indices(self) -> tuple[int, int, int, int]:
        return (self.anchor, self.positive, self.intermediate, self.negative)


@dataclass(frozen=True)
class Triplet:
    anchor: int
    positive: int
    negative: int
    kind: str


@dataclass(frozen=True)
class MiningReport:
    anchors_total: int
    anchors_used: int
    anchors_skipped: int
    quadruplets: int


def mine_quadruplets(
    labels: np.ndarray,
    assignment: ClusterAssignment,
    grouping: ClusterGrouping,
    per_anchor: int = 1,
    seed: int = 0,
    anchor_pool: np.ndarray | None = None,
) -> tuple[list[Quadruplet], MiningReport]:
    """Draw quadruplets by uniform random sampling from each role pool.

    Anchors are the members of imbalanced clusters (optionally intersected
    with `anchor_pool`); positives/intermediates/negatives are sampled from
    the whole record set subject to the role constraints, with all four
    indices distinct.  Anchors with an empty pool are skipped and counted;
    mining fails only when every anchor is skipped.  Deterministic per seed,
    with per-anchor sub-seeds so anchors can be mined independently.
    """
    if per_anchor < 1:
        raise MiningError("per_anchor must be >= 1")
    labels = np.asarray(labels)
    if not grouping.has_imbalanced:
        raise MiningError("no imbalanced clusters: nothing to mine")

    cluster_of = assignment.cluster_of
    in_imbalanced = grouping.imbalanced[cluster_of]
    anchors = np.flatnonzero(in_imbalanced)
    if anchor_pool is not None:
        anchors = np.intersect1d(anchors, np.asarray(anchor_pool, dtype=np.int64))

    quadruplets: list[Quadruplet] = []
    used = 0
    for a in anchors:
        a = int(a)
        same_label = labels == labels[a]
        same_cluster = cluster_of == cluster_of[a]
        positives = np.flatnonzero(same_label & ~same_cluster)
        intermediates = np.flatnonzero(same_label & same_cluster)
        intermediates = intermediates[intermediates != a]
        negatives = np.flatnonzero(~same_label)
        if len(positives) == 0 or len(intermediates) == 0 or len(negatives) == 0:
            continue

        rng = np.random.default_rng(seeds.derive(seed, "mining", a))
        drawn = 0
        for _ in range(per_anchor):
            for _ in range(_MAX_RESAMPLE):
                q = Quadruplet(
                    a,
                    int(positives[rng.integers(len(positives))]),
                    int(intermediates[rng.integers(len(intermediates))]),
                    int(negatives[rng.integers(len(negatives))]),
                )
                if len(set(q.indices())) == 4:
                    quadruplets.append(q)
                    drawn += 1
                    break
        if drawn:
            used += 1

    report = MiningReport(
        anchors_total=len(anchors),
        anchors_used=used,
        anchors_skipped=len(anchors) - used,
        quadruplets=len(quadruplets),
    )
    if not quadruplets:
        raise MiningError(
            "no quadruplets minable: every anchor had an empty role pool "
            f"({report.anchors_total} anchors considered)"
        )
    return quadruplets, report


def decompose(q: Quadruplet) -> tuple[Triplet, Triplet, Triplet, Triplet]:
    """The four triplets of a quadruplet.

    Three inter-cluster contrasts split roles by label — (A,P,N), (A,I,N) and
    (I,P,N), the last using the intermediate as anchor — plus one
    intra-cluster contrast (A,P,I) where the intermediate serves as the
    negative.
    """
    return (
        Triplet(q.anchor, q.positive, q.negative, INTER_CLUSTER),
        Triplet(q.anchor, q.intermediate, q.negative, INTER_CLUSTER),
        Triplet(q.intermediate, q.positive, q.negative, INTER_CLUSTER),
        Triplet(q.anchor, q.positive, q.intermediate, INTRA_CLUSTER),
    )


def batch_iter(
    triplets: list[Triplet],
    batch_size: int,
    seed: int = 0,
    epoch: int = 0,
) -> list[list[Triplet]]:
    """Epoch-seeded shuffle followed by fixed-size batches (last may be short)."""
    if batch_size < 1:
        raise MiningError("batch_size must be >= 1")
    if not triplets:
        raise MiningError("empty triplet list")
    rng = np.random.default_rng(seeds.derive(seed, "batching", epoch))
    order = rng.permutation(len(triplets))
    shuffled = [triplets[i] for i in order]
    return [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]


def validate_quadruplet(
    q: Quadruplet,
    labels: np.ndarray,
    assignment: ClusterAssignment,
    grouping: ClusterGrouping,
) -> None:
    """Raise MiningError unless every role constraint holds."""
    labels = np.asarray(labels)
    c = assignment.cluster_of
    if not grouping.imbalanced[c[q.anchor]]:
        raise MiningError(f"anchor {q.anchor} not in an imbalanced cluster")
    if labels[q.positive] != labels[q.anchor] or c[q.positive] == c[q.anchor]:
        raise MiningError(f"positive {q.positive} must share the label but not the cluster")
    if labels[q.intermediate] != labels[q.anchor] or c[q.intermediate] != c[q.anchor]:
        raise MiningError(f"intermediate {q.intermediate} must share label and cluster")
    if labels[q.negative] == labels[q.anchor]:
        raise MiningError(f"negative {q.negative} must have a different label")
    if len(set(q.indices())) != 4:
        raise MiningError("quadruplet indices must be distinct")
