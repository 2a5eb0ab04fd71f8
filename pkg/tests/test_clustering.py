import numpy as np
import pytest

from declust import clustering


def connected_components(support: np.ndarray) -> np.ndarray:
    """Independent BFS oracle over an undirected adjacency support."""
    n = support.shape[0]
    labels = -np.ones(n, dtype=np.int64)
    current = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = current
        while stack:
            node = stack.pop()
            for nbr in np.flatnonzero(support[node] | support[:, node]):
                if labels[nbr] < 0:
                    labels[nbr] = current
                    stack.append(int(nbr))
        current += 1
    return labels


def same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    pairs = {}
    for x, y in zip(a, b):
        if x in pairs and pairs[x] != y:
            return False
        pairs[x] = y
    return len(set(pairs.values())) == len(pairs)


def random_block_markov(rng, n_blocks, max_n=200):
    sizes = rng.integers(5, max(6, max_n // n_blocks), size=n_blocks)
    n = int(sizes.sum())
    S = np.zeros((n, n))
    start = 0
    for size in sizes:
        block = rng.uniform(0.2, 1.0, size=(size, size))
        block = (block + block.T) / 2
        S[start : start + size, start : start + size] = block
        start += size
    np.fill_diagonal(S, 1.0)
    perm = rng.permutation(n)
    S = S[np.ix_(perm, perm)]
    truth = np.concatenate([np.full(s, i) for i, s in enumerate(sizes)])[perm]
    return S / S.sum(axis=0), S > 0, truth


class TestMarkovMatrix:
    def test_identical_vectors_split_mass(self):
        M = clustering.build_markov_matrix(np.array([[1.0, 0.0], [1.0, 0.0]]), self_loop=1.0)
        assert np.allclose(M, [[0.5, 0.5], [0.5, 0.5]])

    def test_orthogonal_vectors_identity(self):
        M = clustering.build_markov_matrix(np.array([[1.0, 0.0], [0.0, 1.0]]), self_loop=1.0)
        assert np.allclose(M, np.eye(2))

    def test_columns_sum_to_one(self):
        rng = np.random.default_rng(0)
        M = clustering.build_markov_matrix(rng.normal(size=(10, 6)))
        assert np.abs(M.sum(axis=0) - 1.0).max() <= 1e-9
        assert (M >= 0).all()

    def test_zero_vector_rejected(self):
        X = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        with pytest.raises(clustering.ClusteringError, match="index 1"):
            clustering.build_markov_matrix(X)

    def test_all_zero_column_without_self_loop(self):
        # opposite vectors: cosine -1 clamps to 0, leaving empty columns
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        with pytest.raises(clustering.ClusteringError, match="all-zero"):
            clustering.build_markov_matrix(X, self_loop=0.0)

    def test_top_k_sparsification(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(12, 5)) + 3.0
        M = clustering.build_markov_matrix(X, sparsify_top_k=4)
        assert ((M > 0).sum(axis=0) <= 4).all()
        assert np.abs(M.sum(axis=0) - 1.0).max() <= 1e-9


class TestMcl:
    def test_block_diagonal_recovers_blocks(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            M, support, truth = random_block_markov(rng, int(rng.integers(2, 6)))
            oracle = connected_components(support)
            assert same_partition(oracle, truth)
            result = clustering.mcl(M)
            assert result.converged
            assert same_partition(result.assignment.cluster_of, oracle)

    def test_identity_gives_singletons(self):
        result = clustering.mcl(np.eye(6))
        assert result.assignment.cluster_count == 6

    def test_converged_matrix_is_fixed_point(self):
        rng = np.random.default_rng(3)
        M, _, _ = random_block_markov(rng, 3)
        first = clustering.mcl(M)
        # re-running on an already-converged configuration keeps the clusters
        converged = M
        for _ in range(first.iterations):
            converged = clustering.mcl_step(converged, 2.0)
        second = clustering.mcl(converged)
        assert same_partition(
            first.assignment.cluster_of, second.assignment.cluster_of
        )

    def test_invariants_hold_each_iteration(self):
        rng = np.random.default_rng(5)
        M, _, _ = random_block_markov(rng, 3)
        for _ in range(30):
            M = clustering.mcl_step(M, 2.0)
            assert clustering.is_column_stochastic(M, tol=1e-9)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(11)
        M, _, _ = random_block_markov(rng, 4)
        base = clustering.mcl(M).assignment.cluster_of
        perm = rng.permutation(M.shape[0])
        permuted = clustering.mcl(M[np.ix_(perm, perm)]).assignment.cluster_of
        assert same_partition(base[perm], permuted)

    def test_non_convergence_flag(self):
        rng = np.random.default_rng(2)
        M, _, _ = random_block_markov(rng, 3)
        result = clustering.mcl(M, max_iter=1, tol=1e-300)
        assert not result.converged

    def test_rejects_non_stochastic(self):
        with pytest.raises(clustering.ClusteringError, match="column-stochastic"):
            clustering.mcl(np.ones((3, 3)))


class TestKmeans:
    def two_blobs(self, rng, per=6):
        a = rng.normal(0, 0.2, size=(per, 3)) + np.array([4.0, 0, 0])
        b = rng.normal(0, 0.2, size=(per, 3)) - np.array([4.0, 0, 0])
        X = np.concatenate([a, b])
        truth = np.array([0] * per + [1] * per)
        return X, truth

    def brute_force_best_2partition(self, X):
        n = len(X)
        best, best_sse = None, np.inf
        for mask_bits in range(1, 2 ** (n - 1)):
            mask = np.array([(mask_bits >> i) & 1 for i in range(n)], dtype=bool)
            if mask.all() or (~mask).all():
                continue
            sse = 0.0
            for part in (X[mask], X[~mask]):
                sse += ((part - part.mean(axis=0)) ** 2).sum()
            if sse < best_sse:
                best_sse, best = sse, mask
        return best.astype(int)

    def test_matches_brute_force_on_two_blobs(self):
        rng = np.random.default_rng(0)
        X, truth = self.two_blobs(rng)
        oracle = self.brute_force_best_2partition(X)
        assert same_partition(oracle, truth)
        result = clustering.kmeans(X, 2, seed=0)
        assert same_partition(result.assignment.cluster_of, oracle)

    def test_k_equals_n(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(8, 2))
        result = clustering.kmeans(X, 8, seed=1)
        assert result.assignment.cluster_count == 8
        assert result.inertia == pytest.approx(0.0, abs=1e-20)

    def test_inertia_non_increasing(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(60, 4))
        result = clustering.kmeans(X, 5, seed=2, record_history=True)
        # oracle: recompute inertia from each recorded (centers, labels) pair
        recomputed = [
            float(((X - centers[labels]) ** 2).sum()) for centers, labels, _ in result.history
        ]
        for stored, oracle in zip([h[2] for h in result.history], recomputed):
            assert stored == pytest.approx(oracle, rel=1e-12)
        assert all(b <= a + 1e-9 for a, b in zip(recomputed, recomputed[1:]))

    def test_k_out_of_range(self):
        X = np.zeros((4, 2)) + np.arange(4)[:, None]
        with pytest.raises(clustering.ClusteringError, match="k must satisfy"):
            clustering.kmeans(X, 1, seed=0)
        with pytest.raises(clustering.ClusteringError, match="k must satisfy"):
            clustering.kmeans(X, 5, seed=0)

    def test_determinism(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(40, 3))
        a = clustering.kmeans(X, 4, seed=3)
        b = clustering.kmeans(X, 4, seed=3)
        assert np.array_equal(a.assignment.cluster_of, b.assignment.cluster_of)


class TestGrouping:
    def test_pure_cluster_flagged(self):
        assignment = clustering.ClusterAssignment(np.array([0, 0, 0, 0, 1, 1, 1, 1]), 2)
        labels = np.array([1, 1, 1, 1, 0, 1, 0, 1])
        g = clustering.label_imbalance(assignment, labels, tau=0.8, min_size=2)
        assert g.imbalanced[0] and not g.imbalanced[1]
        assert g.majority_fraction[0] == 1.0
        assert g.majority_fraction[1] == 0.5

    def test_threshold_is_inclusive_exact(self):
        assignment = clustering.ClusterAssignment(np.array([0, 0, 0, 0, 1, 1]), 2)
        labels = np.array([1, 1, 1, 0, 0, 1])  # cluster 0 fraction 0.75
        g = clustering.label_imbalance(assignment, labels, tau=0.8, min_size=2)
        assert not g.imbalanced[0]
        g = clustering.label_imbalance(assignment, labels, tau=0.75, min_size=2)
        assert g.imbalanced[0]

    def test_small_clusters_stay_balanced(self):
        assignment = clustering.ClusterAssignment(np.array([0, 0, 0, 1, 1, 1, 1, 1]), 2)
        labels = np.array([1, 1, 1, 0, 1, 0, 1, 0])
        g = clustering.label_imbalance(assignment, labels, tau=0.8, min_size=4)
        assert not g.imbalanced[0]  # pure but below min_size

    def test_flags_invariant_to_relabeling(self):
        rng = np.random.default_rng(0)
        cluster_of = rng.integers(0, 4, size=40)
        labels = rng.integers(0, 2, size=40)
        a = clustering.ClusterAssignment(cluster_of, 4)
        g1 = clustering.label_imbalance(a, labels, tau=0.6, min_size=3)
        relabel = np.array([2, 0, 3, 1])
        b = clustering.ClusterAssignment(relabel[cluster_of], 4)
        g2 = clustering.label_imbalance(b, labels, tau=0.6, min_size=3)
        assert np.array_equal(g1.imbalanced, g2.imbalanced[relabel])


class TestDownsample:
    def build(self, imb_counts, bal_counts):
        # one imbalanced cluster (0), one balanced cluster (1)
        labels, cluster = [], []
        for y, count in enumerate(imb_counts):
            labels += [y] * count
            cluster += [0] * count
        for y, count in enumerate(bal_counts):
            labels += [y] * count
            cluster += [1] * count
        assignment = clustering.ClusterAssignment(np.array(cluster), 2)
        grouping = clustering.ClusterGrouping(
            imbalanced=np.array([True, False]),
            majority_fraction=np.array([1.0, 0.5]),
        )
        return grouping, assignment, np.array(labels)

    def test_equal_balanced_groups(self):
        grouping, assignment, labels = self.build([300, 300], [200, 200])
        out = clustering.downsample_groups(grouping, assignment, labels, seed=0)
        assert len(out.imbalanced_members) == len(out.balanced_members) == 400
        for members in (out.imbalanced_members, out.balanced_members):
            counts = np.bincount(labels[members], minlength=2)
            assert counts[0] == counts[1] == 200

    def test_missing_label_reported(self):
        grouping, assignment, labels = self.build([300, 0], [200, 200])
        labels[:300] = 0  # imbalanced cluster all label 0
        with pytest.raises(clustering.ClusteringError, match="label 1"):
            clustering.downsample_groups(grouping, assignment, labels, seed=0)

    def test_determinism(self):
        grouping, assignment, labels = self.build([100, 50], [60, 70])
        a = clustering.downsample_groups(grouping, assignment, labels, seed=5)
        b = clustering.downsample_groups(grouping, assignment, labels, seed=5)
        assert np.array_equal(a.imbalanced_members, b.imbalanced_members)
        assert np.array_equal(a.balanced_members, b.balanced_members)

    def test_per_label_counts_within_one(self):
        rng = np.random.default_rng(3)
        cluster_of = np.concatenate([np.zeros(120, dtype=int), np.ones(90, dtype=int)])
        labels = rng.integers(0, 3, size=210)
        assignment = clustering.ClusterAssignment(cluster_of, 2)
        grouping = clustering.ClusterGrouping(
            imbalanced=np.array([True, False]), majority_fraction=np.zeros(2)
        )
        out = clustering.downsample_groups(grouping, assignment, labels, seed=1)
        assert len(out.imbalanced_members) == len(out.balanced_members)
        for members in (out.imbalanced_members, out.balanced_members):
            counts = np.bincount(labels[members], minlength=3)
            assert counts.max() - counts.min() <= 1
