import numpy as np
import pytest

from declust import metrics
from declust.clustering import ClusterAssignment


def dp_edit_distance(a, b):
    """Independent full-matrix DP oracle."""
    m, n = len(a), len(b)
    D = np.zeros((m + 1, n + 1), dtype=int)
    D[:, 0] = np.arange(m + 1)
    D[0, :] = np.arange(n + 1)
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            D[i, j] = min(
                D[i - 1, j] + 1,
                D[i, j - 1] + 1,
                D[i - 1, j - 1] + (a[i - 1] != b[j - 1]),
            )
    return int(D[m, n])


class TestHopkins:
    def test_identical_points(self):
        assert metrics.hopkins(np.ones((40, 3)), probes=10, seed=0) == 0.0

    def test_uniform_near_half(self):
        rng = np.random.default_rng(0)
        values = []
        for seed in range(20):
            X = np.random.default_rng(seed).uniform(0, 1, size=(1000, 8))
            values.append(metrics.hopkins(X, probes=100, seed=seed))
        assert 0.45 <= np.mean(values) <= 0.55

    def test_two_tight_blobs_strongly_clustered(self):
        rng = np.random.default_rng(2)
        X = np.concatenate(
            [rng.normal(0.0, 0.01, size=(500, 8)), rng.normal(1.0, 0.01, size=(500, 8))]
        )
        assert metrics.hopkins(X, probes=100, seed=1) < 0.1

    def test_regime_ordering(self):
        # identical < clustered < uniform, over 20 seeds
        clustered, uniform = [], []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            blob = np.concatenate(
                [rng.normal(0, 0.01, size=(200, 4)), rng.normal(1, 0.01, size=(200, 4))]
            )
            clustered.append(metrics.hopkins(blob, probes=40, seed=seed))
            uniform.append(metrics.hopkins(rng.uniform(0, 1, (400, 4)), probes=40, seed=seed))
        assert 0.0 < np.mean(clustered) < np.mean(uniform)

    def test_bounds(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            X = rng.normal(size=(50, 3))
            assert 0.0 <= metrics.hopkins(X, probes=10, seed=3) <= 1.0

    def test_too_few_points(self):
        with pytest.raises(metrics.MetricError, match="n >= 2"):
            metrics.hopkins(np.zeros((10, 2)), probes=6, seed=0)

    def test_determinism(self):
        X = np.random.default_rng(1).normal(size=(100, 4))
        assert metrics.hopkins(X, probes=20, seed=9) == metrics.hopkins(X, probes=20, seed=9)


class TestAri:
    def test_identical_partitions(self):
        a = ClusterAssignment(np.array([0, 0, 1, 1, 2]), 3)
        assert metrics.ari(a, a) == pytest.approx(1.0)

    def test_singletons_vs_one_cluster(self):
        # hand contingency: index=0, expected=0, max=3 -> ARI 0
        a = ClusterAssignment(np.arange(4), 4)
        b = ClusterAssignment(np.zeros(4, dtype=int), 1)
        assert metrics.ari(a, b) == pytest.approx(0.0)

    def test_relabel_invariance(self):
        rng = np.random.default_rng(0)
        x = rng.integers(0, 3, size=30)
        y = rng.integers(0, 4, size=30)
        a = ClusterAssignment(x, 3)
        b = ClusterAssignment(y, 4)
        relabel = np.array([3, 0, 2, 1])
        b2 = ClusterAssignment(relabel[y], 4)
        assert metrics.ari(a, b) == pytest.approx(metrics.ari(a, b2))

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a = ClusterAssignment(rng.integers(0, 3, size=50), 3)
        b = ClusterAssignment(rng.integers(0, 5, size=50), 5)
        assert metrics.ari(a, b) == pytest.approx(metrics.ari(b, a))

    def test_mismatched_sizes(self):
        a = ClusterAssignment(np.zeros(3, dtype=int), 1)
        b = ClusterAssignment(np.zeros(4, dtype=int), 1)
        with pytest.raises(metrics.MetricError, match="same record set"):
            metrics.ari(a, b)


class TestCentroidSeparation:
    def test_identical_centroids(self):
        X = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
        labels = np.array([0, 0, 1, 1])
        assert metrics.centroid_cos_separation(X, labels) == pytest.approx(1.0)

    def test_orthogonal_centroids(self):
        X = np.array([[2.0, 0.0], [0.0, 3.0]])
        labels = np.array([0, 1])
        assert metrics.centroid_cos_separation(X, labels) == pytest.approx(0.0)

    def test_three_classes_mean_of_pairwise(self):
        centroids = {0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0]), 2: np.array([1.0, 1.0])}
        X = np.stack([centroids[0], centroids[1], centroids[2]])
        labels = np.array([0, 1, 2])
        # direct enumeration oracle over the 3 unordered pairs
        def cos(u, v):
            return u @ v / (np.linalg.norm(u) * np.linalg.norm(v))
        expected = np.mean(
            [cos(centroids[0], centroids[1]), cos(centroids[0], centroids[2]), cos(centroids[1], centroids[2])]
        )
        assert metrics.centroid_cos_separation(X, labels) == pytest.approx(expected)

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(30, 5)) + 1.0
        labels = rng.integers(0, 3, size=30)
        base = metrics.centroid_cos_separation(X, labels)
        assert metrics.centroid_cos_separation(X * 7.5, labels) == pytest.approx(base)

    def test_zero_centroid_rejected(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
        labels = np.array([0, 0, 1])
        with pytest.raises(metrics.MetricError, match="zero centroid"):
            metrics.centroid_cos_separation(X, labels)


class TestDeltaTheta:
    def test_no_change(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 4)) + 2.0
        labels = rng.integers(0, 2, size=20)
        assert metrics.delta_theta(X, X, labels) == pytest.approx(0.0)

    def test_parallel_to_orthogonal(self):
        before = np.array([[1.0, 0.0], [1.0, 0.0]])
        after = np.array([[1.0, 0.0], [0.0, 1.0]])
        labels = np.array([0, 1])
        assert metrics.delta_theta(before, after, labels) == pytest.approx(1.0)


class TestTokenSimilarity:
    def test_jaccard_identical(self):
        assert metrics.jaccard_tokens(["a", "b"], ["b", "a"]) == 1.0

    def test_jaccard_disjoint(self):
        assert metrics.jaccard_tokens(["a"], ["b"]) == 0.0

    def test_jaccard_partial(self):
        assert metrics.jaccard_tokens(["a", "b"], ["b", "c"]) == pytest.approx(1 / 3)

    def test_jaccard_both_empty(self):
        assert metrics.jaccard_tokens([], []) == 1.0

    def test_levenshtein_identical(self):
        assert metrics.levenshtein_similarity(list("abc"), list("abc")) == 1.0

    def test_levenshtein_kitten_sitting(self):
        a, b = list("kitten"), list("sitting")
        assert dp_edit_distance(a, b) == 3
        assert metrics.levenshtein_similarity(a, b) == pytest.approx(1 - 3 / 7)

    def test_levenshtein_empty_vs_full(self):
        assert metrics.levenshtein_similarity([], list("abcde")) == 0.0
        assert metrics.levenshtein_similarity([], []) == 1.0

    def test_levenshtein_matches_dp_oracle(self):
        rng = np.random.default_rng(4)
        alphabet = list("abcd")
        for _ in range(30):
            a = [alphabet[i] for i in rng.integers(0, 4, size=rng.integers(0, 9))]
            b = [alphabet[i] for i in rng.integers(0, 4, size=rng.integers(0, 9))]
            expected = dp_edit_distance(a, b)
            if not a and not b:
                continue
            got = (1 - metrics.levenshtein_similarity(a, b)) * max(len(a), len(b))
            assert got == pytest.approx(expected)

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(8)
        alphabet = list("xyz")
        for _ in range(20):
            a = [alphabet[i] for i in rng.integers(0, 3, size=rng.integers(1, 7))]
            b = [alphabet[i] for i in rng.integers(0, 3, size=rng.integers(1, 7))]
            for fn in (metrics.jaccard_tokens, metrics.levenshtein_similarity):
                assert fn(a, b) == pytest.approx(fn(b, a))
                assert 0.0 <= fn(a, b) <= 1.0

    def test_triangle_inequality_on_distances(self):
        rng = np.random.default_rng(10)
        alphabet = list("ab")
        for _ in range(25):
            seqs = [
                [alphabet[i] for i in rng.integers(0, 2, size=rng.integers(1, 6))]
                for _ in range(3)
            ]
            d01 = dp_edit_distance(seqs[0], seqs[1])
            d12 = dp_edit_distance(seqs[1], seqs[2])
            d02 = dp_edit_distance(seqs[0], seqs[2])
            assert d02 <= d01 + d12


class TestGroupPairSampler:
    def build(self, tokens_by_cluster):
        tokens, cluster = [], []
        for c, (toks, size) in enumerate(tokens_by_cluster):
            tokens += [list(toks)] * size
            cluster += [c] * size
        return tokens, ClusterAssignment(np.array(cluster), len(tokens_by_cluster))

    def test_identical_tokens_everywhere(self):
        tokens, assignment = self.build([(["a", "b"], 5), (["a", "b"], 5)])
        out = metrics.group_pair_sampler(tokens, assignment, trials=200, seed=0, permutations=200)
        assert out["intra_mean"] == 1.0
        assert out["inter_mean"] == 1.0

    def test_cluster_constant_disjoint_tokens(self):
        tokens, assignment = self.build([(["a"], 6), (["b"], 6)])
        out = metrics.group_pair_sampler(tokens, assignment, trials=200, seed=0, permutations=500)
        assert out["intra_mean"] == 1.0
        assert out["inter_mean"] == 0.0
        assert out["p_value"] < 0.05

    def test_determinism(self):
        tokens, assignment = self.build([(["a", "c"], 4), (["b", "c"], 4)])
        a = metrics.group_pair_sampler(tokens, assignment, trials=100, seed=3, permutations=100)
        b = metrics.group_pair_sampler(tokens, assignment, trials=100, seed=3, permutations=100)
        assert a == b

    def test_levenshtein_metric_supported(self):
        tokens, assignment = self.build([(["a", "b", "c"], 4), (["a", "c"], 4)])
        out = metrics.group_pair_sampler(
            tokens, assignment, trials=50, seed=1, metric="levenshtein", permutations=50
        )
        assert 0.0 <= out["intra_mean"] <= 1.0

    def test_no_intra_pairs(self):
        tokens, assignment = self.build([(["a"], 1), (["b"], 1)])
        with pytest.raises(metrics.MetricError, match="intra pairs"):
            metrics.group_pair_sampler(tokens, assignment, trials=10, seed=0)
