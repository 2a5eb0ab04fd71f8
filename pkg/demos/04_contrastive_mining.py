"""
Quadruplet mining and triplet decomposition
===========================================

Every anchor in an imbalanced cluster gets a positive (same label, different
cluster), an intermediate (same label, same cluster) and a negative
(different label).  Each quadruplet splits into three inter-cluster triplets
and one intra-cluster triplet, where the intermediate switches roles.
"""

import numpy as np

from declust import batch_iter, decompose, generate_synthetic, mine_quadruplets
from declust.benchmarks import planted_bias_spec
from declust.clustering import build_markov_matrix, label_imbalance, mcl

dataset, _ = generate_synthetic(planted_bias_spec(seed=2, points_per_blob=80))
X = dataset.vectors.astype(np.float64)
assignment = mcl(build_markov_matrix(X, sparsify_top_k=60)).assignment
grouping = label_imbalance(assignment, dataset.label_of)

quadruplets, report = mine_quadruplets(dataset.label_of, assignment, grouping, seed=0)
print(f"anchors: {report.anchors_total}, used: {report.anchors_used}, "
      f"skipped: {report.anchors_skipped}, quadruplets: {report.quadruplets}")

# %% One quadruplet and its four triplets (roles shown as cluster/label).
q = quadruplets[0]
c, y = assignment.cluster_of, dataset.label_of
print(f"\nquadruplet a={q.anchor} p={q.positive} i={q.intermediate} n={q.negative}")
for role, idx in zip("apin", q.indices()):
    print(f"  {role}: cluster {c[idx]}, label {y[idx]}")
for t in decompose(q):
    print(f"  triplet ({t.anchor}, {t.positive}, {t.negative})  [{t.kind}]")

# %% Epoch-seeded batching: same (seed, epoch) replays the same order.
triplets = [t for q in quadruplets for t in decompose(q)]
batches = batch_iter(triplets, batch_size=8, seed=0, epoch=0)
print(f"\n{len(triplets)} triplets -> {len(batches)} batches of {[len(b) for b in batches[:3]]}...")
replay = batch_iter(triplets, batch_size=8, seed=0, epoch=0)
print("replay identical:", batches == replay)
