"""End-to-end orchestration: alternating debias training and ID/OOD experiments.

The experiment protocol:

1. Cluster the raw embeddings, flag imbalanced clusters, and downsample the
   two groups to equal, label-balanced sizes.
2. Hold a random ID test set out of the imbalanced group; the rest of that
   group is the training pool and the whole balanced group is the OOD test.
3. Baseline: train a linear head on the raw training vectors.
4. Debiased: alternately re-cluster the remapped pool and train the remap
   network on mined triplets until the imbalanced samples stop exhibiting
   clustering structure, then freeze it and train a linear head on the
   remapped training vectors.
5. Evaluate both heads on the same ID/OOD split and attach the
   cluster-tendency measurements.

Every random draw derives from one master seed through named sub-seeds, so
repeating a run (or re-running any stage in isolation) is bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import classifier, clustering, data, evaluation, metrics, mining, optim, remap, seeds


class PipelineError(ValueError):
    """Raised for invalid configuration or protocol violations."""


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the alternating clustering/remapping loop."""

    beta: float = 0.2
    lr: float = 3e-5
    batch_size: int = 8
    recluster_interval: int = 5  # epochs of triplet training per round
    hopkins_epsilon: float = 0.1
    hopkins_patience: int = 2
    max_rounds: int = 50
    clustering_backend: str = "mcl"
    per_anchor: int = 1
    weight_decay: float = 0.01
    # remap network
    remap_backend: str = "attention"
    remap_heads: int = 8
    remap_hidden: int = 768
    remap_segments: int = 8
    # clustering
    inflation: float = 2.0
    mcl_tol: float = 1e-6
    mcl_max_iter: int = 200
    sparsify_top_k: int | None = None
    self_loop: float = 1.0
    kmeans_k: int = 8
    tau: float = 0.8
    min_size: int = 5
    # measurement
    hopkins_probes: int | None = None

    def __post_init__(self) -> None:
        if self.beta < 0 or self.lr <= 0:
            raise PipelineError("beta must be >= 0 and lr > 0")
        if self.recluster_interval < 1 or self.max_rounds < 1:
            raise PipelineError("recluster_interval and max_rounds must be >= 1")
        if not 0.0 < self.hopkins_epsilon < 0.5:
            raise PipelineError("hopkins_epsilon must lie in (0, 0.5)")
        if self.clustering_backend not in ("mcl", "kmeans"):
            raise PipelineError(f"unknown clustering backend {self.clustering_backend!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    id_test_size: int = 100
    head_epochs: int = 200
    head_lr: float = 0.05
    seed: int = 0
    synthetic: data.SyntheticSpec | None = None


STOP_HOPKINS = "hopkins_converged"
STOP_NO_IMBALANCED = "no_imbalanced_clusters"
STOP_MAX_ROUNDS = "max_rounds"
STOP_MINING = "mining_exhausted"


@dataclass(frozen=True)
class TrainReport:
    loss_curve: tuple[float, ...]  # mean per-triplet loss per round
    hopkins_trajectory: tuple[float, ...]
    rounds: int
    stop_reason: str

    def to_json(self) -> dict:
        return {
            "loss_curve": list(self.loss_curve),
            "hopkins_trajectory": list(self.hopkins_trajectory),
            "rounds": self.rounds,
            "stop_reason": self.stop_reason,
        }


@dataclass(frozen=True)
class ExperimentReport:
    baseline: evaluation.EvalReport
    debiased: evaluation.EvalReport
    train_report: TrainReport
    delta_theta: float
    hopkins_before: float
    hopkins_after: float
    grouping_mode: str
    cluster_count: int
    imbalanced_cluster_count: int
    config: dict
    split: dict

    @property
    def gap_reduction(self) -> float:
        if self.baseline.gap == 0:
            return 0.0
        return (self.baseline.gap - self.debiased.gap) / abs(self.baseline.gap)

    def to_json(self) -> dict:
        return {
            "baseline": self.baseline.to_json(),
            "debiased": self.debiased.to_json(),
            "train_report": self.train_report.to_json(),
            "delta_theta": self.delta_theta,
            "hopkins_before": self.hopkins_before,
            "hopkins_after": self.hopkins_after,
            "gap_reduction": self.gap_reduction,
            "grouping_mode": self.grouping_mode,
            "cluster_count": self.cluster_count,
            "imbalanced_cluster_count": self.imbalanced_cluster_count,
            "config": self.config,
            "split": self.split,
        }


def report_to_json_str(report: ExperimentReport) -> str:
    """Canonical JSON encoding: key-sorted, newline-terminated, byte-stable."""
    return json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def cluster_vectors(
    X: np.ndarray, config: TrainConfig, master_seed: int, stage: object = "raw"
) -> clustering.ClusterAssignment:
    """Cluster with the configured backend, seeded per (master, stage)."""
    if config.clustering_backend == "kmeans":
        result = clustering.kmeans(
            X, config.kmeans_k, seed=seeds.derive(master_seed, "clustering", stage)
        )
        return result.assignment
    M = clustering.build_markov_matrix(
        X, sparsify_top_k=config.sparsify_top_k, self_loop=config.self_loop
    )
    return clustering.mcl(
        M, inflation=config.inflation, max_iter=config.mcl_max_iter, tol=config.mcl_tol
    ).assignment


def derive_grouping(
    dataset: data.EmbeddingDataset, config: TrainConfig, master_seed: int
) -> tuple[clustering.ClusterAssignment, clustering.ClusterGrouping]:
    """Cluster the raw space, flag imbalance, and downsample the groups.

    When no cluster is imbalanced (a fully balanced dataset), no distribution
    shift exists between cluster groups, so the ID/OOD protocol degenerates:
    records are split 50/50 at random into the two group roles
    ("random_control" mode) and the debias loop has nothing to disrupt.
    """
    X = dataset.vectors.astype(np.float64)
    assignment = cluster_vectors(X, config, master_seed, "raw")
    flags = clustering.label_imbalance(assignment, dataset.label_of, config.tau, config.min_size)
    if flags.has_imbalanced:
        grouping = clustering.downsample_groups(
            flags, assignment, dataset.label_of, seed=seeds.derive(master_seed, "grouping")
        )
        return assignment, grouping

    rng = np.random.default_rng(seeds.derive(master_seed, "pseudo-grouping"))
    order = rng.permutation(len(dataset.ids))
    in_a = np.zeros(len(dataset.ids), dtype=bool)
    in_a[order[: len(order) // 2]] = True
    kept = clustering.balance_member_groups(
        {"imbalanced": np.flatnonzero(in_a), "balanced": np.flatnonzero(~in_a)},
        dataset.label_of,
        seeds.derive(master_seed, "grouping"),
    )
    grouping = clustering.ClusterGrouping(
        imbalanced=flags.imbalanced,
        majority_fraction=flags.majority_fraction,
        imbalanced_members=kept["imbalanced"],
        balanced_members=kept["balanced"],
        mode="random_control",
    )
    return assignment, grouping


def make_split(
    dataset: data.EmbeddingDataset,
    grouping: clustering.ClusterGrouping,
    config: ExperimentConfig,
) -> data.DatasetSplit:
    if grouping.imbalanced_members is None or grouping.balanced_members is None:
        raise PipelineError("grouping must be downsampled before splitting")
    return data.split_id_ood(
        dataset,
        grouping.imbalanced_members,
        grouping.balanced_members,
        config.id_test_size,
        seeds.derive(config.seed, "split"),
    )


def _init_remap(dim: int, config: TrainConfig, master_seed: int) -> remap.RemapParams:
    return remap.init_params(
        dim,
        config.remap_backend,
        heads=config.remap_heads,
        hidden=config.remap_hidden,
        segments=config.remap_segments,
        seed=seeds.derive(master_seed, "remap-init"),
    )


def train_debias(
    dataset: data.EmbeddingDataset,
    grouping: clustering.ClusterGrouping,
    config: TrainConfig,
    master_seed: int = 0,
    pool: np.ndarray | None = None,
) -> tuple[remap.RemapParams, TrainReport]:
    """Alternate re-clustering of the remapped pool with triplet training.

    Each round: cluster the current remapped embeddings, re-derive imbalance
    flags, mine quadruplets, decompose them into triplets, train the remap
    network for `recluster_interval` epochs, then measure the Hopkins
    statistic of the remapped imbalanced-group samples.  Training stops when
    that statistic sits inside 0.5 +/- hopkins_epsilon for hopkins_patience
    consecutive rounds, when re-clustering finds no imbalanced cluster, when
    mining runs dry after at least one round (every anchor lost its positive
    pool, so the label regions have already consolidated), or at max_rounds.

    `pool` selects the records visible to re-clustering and mining (by
    default all downsampled group members); the Hopkins stopping metric is
    always computed on the imbalanced-group members inside the pool.
    """
    if grouping.imbalanced_members is None or grouping.balanced_members is None:
        raise PipelineError("grouping must carry downsampled member lists")
    params = _init_remap(dataset.dim, config, master_seed)
    if not grouping.has_imbalanced:
        return params, TrainReport((), (), 0, STOP_NO_IMBALANCED)

    if pool is None:
        pool = np.sort(
            np.concatenate([grouping.imbalanced_members, grouping.balanced_members])
        )
    pool = np.asarray(pool, dtype=np.int64)
    X_pool = dataset.vectors[pool].astype(np.float64)
    y_pool = dataset.label_of[pool]
    target_rows = np.flatnonzero(np.isin(pool, grouping.imbalanced_members))
    if len(target_rows) == 0:
        raise PipelineError("pool contains no imbalanced-group samples to monitor")

    state = optim.init_state(params.tensors)
    losses: list[float] = []
    trajectory: list[float] = []
    stop = STOP_MAX_ROUNDS
    in_band = 0

    for round_no in range(1, config.max_rounds + 1):
        Z_pool = remap.remap_all(params, X_pool)
        assignment = cluster_vectors(Z_pool, config, master_seed, round_no)
        flags = clustering.label_imbalance(assignment, y_pool, config.tau, config.min_size)
        if not flags.has_imbalanced:
            stop = STOP_NO_IMBALANCED
            break
        try:
            quadruplets, _ = mining.mine_quadruplets(
                y_pool,
                assignment,
                flags,
                per_anchor=config.per_anchor,
                seed=seeds.derive(master_seed, "mining", round_no),
            )
        except mining.MiningError:
            if round_no == 1:
                raise
            stop = STOP_MINING
            break
        triplets = [t for q in quadruplets for t in mining.decompose(q)]

        round_loss = 0.0
        round_triplets = 0
        for epoch in range(config.recluster_interval):
            batches = mining.batch_iter(
                triplets,
                config.batch_size,
                seed=seeds.derive(master_seed, "batching", round_no),
                epoch=epoch,
            )
            for batch in batches:
                Xa = X_pool[[t.anchor for t in batch]]
                Xp = X_pool[[t.positive for t in batch]]
                Xn = X_pool[[t.negative for t in batch]]
                loss, grads, _ = remap.triplet_batch(params, Xa, Xp, Xn, config.beta)
                if not np.isfinite(loss):
                    raise PipelineError(f"non-finite triplet loss in round {round_no}")
                tensors, state = optim.adamw_step(
                    params.tensors,
                    grads,
                    state,
                    lr=config.lr,
                    weight_decay=config.weight_decay,
                )
                params = remap.RemapParams(params.config, tensors)
                round_loss += loss
                round_triplets += len(batch)
        losses.append(round_loss / max(1, round_triplets))

        Z_target = remap.remap_all(params, X_pool[target_rows])
        hop = metrics.hopkins(
            Z_target,
            probes=config.hopkins_probes,
            seed=seeds.derive(master_seed, "hopkins", round_no),
        )
        trajectory.append(hop)
        in_band = in_band + 1 if abs(hop - 0.5) <= config.hopkins_epsilon else 0
        if in_band >= config.hopkins_patience:
            stop = STOP_HOPKINS
            break

    return params, TrainReport(tuple(losses), tuple(trajectory), len(trajectory), stop)


def train_head(
    dataset: data.EmbeddingDataset,
    split: data.DatasetSplit,
    config: ExperimentConfig,
    remap_params: remap.RemapParams | None = None,
) -> classifier.LinearHead:
    """Train the linear head on the split's train ids (remapped if given)."""
    index = {rid: i for i, rid in enumerate(dataset.ids)}
    rows = np.array([index[rid] for rid in split.train_ids])
    X = dataset.vectors[rows].astype(np.float64)
    role = "head-baseline" if remap_params is None else "head-debiased"
    if remap_params is not None:
        X = remap.remap_all(remap_params, X)
    return classifier.train_classifier(
        X,
        dataset.label_of[rows],
        epochs=config.head_epochs,
        lr=config.head_lr,
        seed=seeds.derive(config.seed, role),
    )


def run_experiment(
    config: ExperimentConfig, dataset: data.EmbeddingDataset | None = None
) -> ExperimentReport:
    """Full baseline-vs-debiased comparison on one dataset and seed."""
    if dataset is None:
        if config.synthetic is None:
            raise PipelineError("either a dataset or config.synthetic is required")
        dataset, _ = data.generate_synthetic(config.synthetic)

    assignment, grouping = derive_grouping(dataset, config.train, config.seed)
    split = make_split(dataset, grouping, config)
    X = dataset.vectors.astype(np.float64)

    head_baseline = train_head(dataset, split, config)
    eval_baseline = evaluation.evaluate(head_baseline, dataset, split)

    index = {rid: i for i, rid in enumerate(dataset.ids)}
    train_rows = np.array([index[rid] for rid in split.train_ids])
    ood_rows = np.array([index[rid] for rid in split.ood_test_ids])
    pool = np.sort(np.concatenate([train_rows, ood_rows]))
    params, train_report = train_debias(dataset, grouping, config.train, config.seed, pool)

    head_debiased = train_head(dataset, split, config, params)
    eval_debiased = evaluation.evaluate(head_debiased, dataset, split, params)
    if eval_baseline.split_hash != eval_debiased.split_hash:
        raise PipelineError("baseline and debiased evaluations saw different splits")

    members = np.sort(
        np.concatenate([grouping.imbalanced_members, grouping.balanced_members])
    )
    Z_members = remap.remap_all(params, X[members])
    dtheta = metrics.delta_theta(X[members], Z_members, dataset.label_of[members])

    imb = grouping.imbalanced_members
    hop_before = metrics.hopkins(
        X[imb], probes=config.train.hopkins_probes, seed=seeds.derive(config.seed, "hopkins-before")
    )
    hop_after = metrics.hopkins(
        remap.remap_all(params, X[imb]),
        probes=config.train.hopkins_probes,
        seed=seeds.derive(config.seed, "hopkins-after"),
    )

    return ExperimentReport(
        baseline=eval_baseline,
        debiased=eval_debiased,
        train_report=train_report,
        delta_theta=float(dtheta),
        hopkins_before=float(hop_before),
        hopkins_after=float(hop_after),
        grouping_mode=grouping.mode,
        cluster_count=assignment.cluster_count,
        imbalanced_cluster_count=int(grouping.imbalanced.sum()),
        config=config_to_dict(config),
        split={
            "train_ids": list(split.train_ids),
            "id_test_ids": list(split.id_test_ids),
            "ood_test_ids": list(split.ood_test_ids),
        },
    )


# ---------------------------------------------------------------------------
# Config (de)serialization with strict key checking
# ---------------------------------------------------------------------------

def config_to_dict(config: ExperimentConfig) -> dict:
    out = asdict(config)
    if config.synthetic is not None:
        out["synthetic"]["blobs"] = [asdict(b) for b in config.synthetic.blobs]
    return out


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise PipelineError(f"unknown config key(s) in {where}: {', '.join(unknown)}")


def config_from_dict(obj: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a JSON-style dict, rejecting unknown keys."""
    top = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    _check_keys(obj, top, "experiment config")
    train_obj = dict(obj.get("train", {}))
    _check_keys(train_obj, set(TrainConfig.__dataclass_fields__), "train config")
    synth = None
    if obj.get("synthetic") is not None:
        synth_obj = dict(obj["synthetic"])
        _check_keys(synth_obj, set(data.SyntheticSpec.__dataclass_fields__), "synthetic spec")
        blob_fields = set(data.BlobSpec.__dataclass_fields__)
        blobs = []
        for i, blob_obj in enumerate(synth_obj.pop("blobs", ())):
            _check_keys(dict(blob_obj), blob_fields, f"synthetic blob {i}")
            blobs.append(data.BlobSpec(**blob_obj))
        synth = data.SyntheticSpec(blobs=tuple(blobs), **synth_obj)
    kwargs = {k: v for k, v in obj.items() if k not in ("train", "synthetic")}
    return ExperimentConfig(train=TrainConfig(**train_obj), synthetic=synth, **kwargs)
