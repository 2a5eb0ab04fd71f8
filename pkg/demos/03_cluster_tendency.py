"""
Cluster-tendency and similarity metrics
=======================================

The Hopkins statistic (in the low-means-clustered orientation), adjusted Rand
index, centroid cosine separation, and the token-level similarity measures
used to interpret what semantic clusters contain.
"""

import numpy as np

from declust import (
    ClusterAssignment,
    ari,
    centroid_cos_separation,
    delta_theta,
    hopkins,
    jaccard_tokens,
    levenshtein_similarity,
)
from declust.metrics import group_pair_sampler

rng = np.random.default_rng(0)

# %% Hopkins across the three canonical regimes.  Near 0 = tightly
# clustered, near 0.5 = spatially random.
identical = np.ones((200, 8))
blobs = np.concatenate([rng.normal(0, 0.01, (100, 8)), rng.normal(1, 0.01, (100, 8))])
uniform = rng.uniform(0, 1, (200, 8))
for name, X in (("identical", identical), ("two tight blobs", blobs), ("uniform", uniform)):
    print(f"hopkins({name:>15}) = {hopkins(X, probes=20, seed=0):.3f}")

# %% ARI compares two partitions, correcting for chance agreement.
a = ClusterAssignment(rng.integers(0, 3, 60), 3)
print("ari(a, a) =", ari(a, a))
b = ClusterAssignment(rng.integers(0, 3, 60), 3)
print("ari(a, random b) =", round(ari(a, b), 3))

# %% Centroid cosine separation: how angularly aligned the class centroids
# are.  delta_theta is the before-minus-after drop; positive means the
# classes moved apart.
X_before = rng.normal(size=(100, 8)) + 3.0
labels = rng.integers(0, 2, 100)
X_after = X_before + 2.0 * (2.0 * labels[:, None] - 1.0) * rng.normal(size=8)
print("cos separation before:", round(centroid_cos_separation(X_before, labels), 3))
print("cos separation after: ", round(centroid_cos_separation(X_after, labels), 3))
print("delta_theta:", round(delta_theta(X_before, X_after, labels), 3))

# %% Token-level measures connect clusters to surface features.
print("jaccard({a,b},{b,c}) =", round(jaccard_tokens(["a", "b"], ["b", "c"]), 3))
print("levenshtein(kitten, sitting) =", round(levenshtein_similarity(list("kitten"), list("sitting")), 3))

# %% Cluster-conditional token similarity with a permutation test: tokens
# constant within clusters and disjoint across them give the extreme case.
tokens = [["food", "tasty"]] * 30 + [["sofa", "wood"]] * 30
assignment = ClusterAssignment(np.array([0] * 30 + [1] * 30), 2)
out = group_pair_sampler(tokens, assignment, trials=500, seed=0, permutations=1000)
print(f"intra {out['intra_mean']:.2f} vs inter {out['inter_mean']:.2f}, p = {out['p_value']:.4f}")
