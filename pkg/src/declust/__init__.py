"""declust: find label-skewed embedding clusters and train them away.

The library detects semantic clusters whose label distribution is skewed
(shortcut risks for any classifier reading the embedding space), trains a
small Siamese remapping network with a cluster-aware triplet loss to disrupt
them, and measures how much of a linear classifier's in-distribution vs
out-of-distribution accuracy gap that recovers.
"""

from .clustering import (
    ClusterAssignment,
    ClusterGrouping,
    ClusteringError,
    build_markov_matrix,
    downsample_groups,
    is_column_stochastic,
    kmeans,
    label_imbalance,
    mcl,
)
from .data import (
    BlobSpec,
    DatasetError,
    DatasetSplit,
    EmbeddingDataset,
    EmbeddingRecord,
    SyntheticSpec,
    generate_synthetic,
    read_dataset,
    split_id_ood,
    write_dataset,
)
from .evaluation import EvalReport, evaluate, pca_project, pr_auc, pr_curve
from .classifier import LinearHead, train_classifier
from .metrics import (
    ari,
    centroid_cos_separation,
    delta_theta,
    group_pair_sampler,
    hopkins,
    jaccard_tokens,
    levenshtein_similarity,
)
from .mining import (
    MiningError,
    Quadruplet,
    Triplet,
    batch_iter,
    decompose,
    mine_quadruplets,
)
from .optim import OptimizerState, adamw_step, init_state
from .pipeline import (
    ExperimentConfig,
    ExperimentReport,
    TrainConfig,
    TrainReport,
    run_experiment,
    train_debias,
)
from .remap import (
    RemapConfig,
    RemapParams,
    forward,
    grad_check,
    init_params,
    load_params,
    output_bound_probe,
    remap_all,
    save_params,
    triplet_loss,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
