"""Command-line front end.

Subcommands compose into the same protocol `experiment` runs in one shot:

    declust gen        --config cfg.json --out out/
    declust cluster    --dataset out/dataset.jsonl --config cfg.json --out out/
    declust hopkins    --dataset out/dataset.jsonl --out out/
    declust mine       --dataset out/dataset.jsonl --assignment out/assignment.csv \
                       --grouping out/grouping.json --out out/
    declust train      --dataset out/dataset.jsonl --config cfg.json --out out/
    declust eval       --dataset out/dataset.jsonl --split out/split.json \
                       [--checkpoint out/remap.ckpt] --out out/
    declust experiment --config cfg.json --out out/

The config file is one JSON document mirroring ExperimentConfig; unknown keys
are rejected.  Command-line flags override config values.  All randomness
flows from the single master seed through named sub-seeds, so the staged
commands reproduce exactly what `experiment` produces.  Every artifact lands
under --out with the resolved config and seed embedded (JSON artifacts carry
them inline; CSV artifacts are hashed into run.json).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import clustering, data, evaluation, metrics, mining, pipeline, remap, seeds


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
        return 0
    except Exception as exc:  # all failures become machine-readable JSON
        print(
            json.dumps(
                {"status": "error", "error": {"type": type(exc).__name__, "message": str(exc)}},
                sort_keys=True,
            ),
            file=sys.stderr,
        )
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="declust",
        description="Detect label-skewed embedding clusters and train them away.",
    )
    sub = parser.add_subparsers(required=True)

    def common(p: argparse.ArgumentParser, dataset: bool = False) -> None:
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--format", choices=["jsonl", "binary"], default="jsonl")
        p.add_argument("--backend", choices=["mcl", "kmeans"], help="clustering backend override")
        p.add_argument("--remap", choices=["attention", "mlp"], help="remap backend override")
        if dataset:
            p.add_argument("--dataset", type=Path, required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset + ground-truth CSV")
    common(p)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("cluster", help="cluster a dataset; write assignment/grouping/split")
    common(p, dataset=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("hopkins", help="cluster-tendency statistic of a dataset")
    common(p, dataset=True)
    p.add_argument("--probes", type=int, help="probe count (default min(100, n//10))")
    p.set_defaults(func=_cmd_hopkins)

    p = sub.add_parser("mine", help="mine quadruplets from an assignment + grouping")
    common(p, dataset=True)
    p.add_argument("--assignment", type=Path, required=True)
    p.add_argument("--grouping", type=Path, required=True)
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("train", help="run the alternating debias training loop")
    common(p, dataset=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="train a linear head on the split and evaluate ID/OOD")
    common(p, dataset=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, help="remap checkpoint (omit for raw baseline)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="full baseline-vs-debiased comparison")
    common(p)
    p.add_argument("--dataset", type=Path, help="embedding dataset (default: config.synthetic)")
    p.set_defaults(func=_cmd_experiment)

    return parser


def _load_config(args) -> pipeline.ExperimentConfig:
    obj = {}
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    config = pipeline.config_from_dict(obj)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    train_overrides = {}
    if getattr(args, "backend", None):
        train_overrides["clustering_backend"] = args.backend
    if getattr(args, "remap", None):
        train_overrides["remap_backend"] = args.remap
    if train_overrides:
        overrides["train"] = replace(config.train, **train_overrides)
    if overrides:
        config = replace(config, **overrides)
    if args.seed is not None and config.synthetic is not None:
        config = replace(config, synthetic=replace(config.synthetic, seed=args.seed))
    return config


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, config: pipeline.ExperimentConfig, artifacts) -> None:
    manifest = {
        "command": command,
        "config": pipeline.config_to_dict(config),
        "seed": config.seed,
        "artifacts": {p.name: _sha256(p) for p in artifacts},
    }
    (out / "run.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _write_json(path: Path, obj: dict, config: pipeline.ExperimentConfig) -> None:
    obj = dict(obj)
    obj["config"] = pipeline.config_to_dict(config)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _read_dataset(args) -> data.EmbeddingDataset:
    return data.read_dataset(str(args.dataset), args.format)


def _cmd_gen(args) -> None:
    config = _load_config(args)
    if config.synthetic is None:
        raise pipeline.PipelineError("gen requires a 'synthetic' section in the config")
    out = _outdir(args)
    dataset, truth = data.generate_synthetic(config.synthetic)
    ext = "jsonl" if args.format == "jsonl" else "bin"
    dataset_path = out / f"dataset.{ext}"
    data.write_dataset(dataset, str(dataset_path), args.format)
    truth_path = out / "ground_truth.csv"
    with open(truth_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "blob_id"])
        for rid, blob in zip(dataset.ids, truth.cluster_of):
            writer.writerow([rid, int(blob)])
    _write_manifest(out, "gen", config, [dataset_path, truth_path])


def _cmd_cluster(args) -> None:
    config = _load_config(args)
    out = _outdir(args)
    dataset = _read_dataset(args)
    assignment, grouping = pipeline.derive_grouping(dataset, config.train, config.seed)
    split = pipeline.make_split(dataset, grouping, config)

    assignment_path = out / "assignment.csv"
    clustering.write_assignment_csv(str(assignment_path), dataset.ids, assignment, grouping)
    grouping_path = out / "grouping.json"
    _write_json(
        grouping_path,
        {
            "imbalanced": [bool(x) for x in grouping.imbalanced],
            "majority_fraction": [float(x) for x in grouping.majority_fraction],
            "imbalanced_members": [int(i) for i in grouping.imbalanced_members],
            "balanced_members": [int(i) for i in grouping.balanced_members],
            "mode": grouping.mode,
            "cluster_count": assignment.cluster_count,
        },
        config,
    )
    split_path = out / "split.json"
    _write_json(
        split_path,
        {
            "train_ids": list(split.train_ids),
            "id_test_ids": list(split.id_test_ids),
            "ood_test_ids": list(split.ood_test_ids),
        },
        config,
    )
    _write_manifest(out, "cluster", config, [assignment_path, grouping_path, split_path])


def _cmd_hopkins(args) -> None:
    config = _load_config(args)
    out = _outdir(args)
    dataset = _read_dataset(args)
    probes = args.probes if args.probes is not None else config.train.hopkins_probes
    value = metrics.hopkins(
        dataset.vectors.astype(np.float64), probes=probes, seed=seeds.derive(config.seed, "hopkins-cli")
    )
    path = out / "hopkins.json"
    _write_json(
        path,
        {
            "metric": "hopkins",
            "value": value,
            "probes": probes
            if probes is not None
            else metrics.default_probe_count(len(dataset.ids)),
            "n": len(dataset.ids),
            "seed": config.seed,
        },
        config,
    )
    _write_manifest(out, "hopkins", config, [path])


def _read_grouping(path: Path) -> clustering.ClusterGrouping:
    obj = json.loads(Path(path).read_text())
    return clustering.ClusterGrouping(
        imbalanced=np.array(obj["imbalanced"], dtype=bool),
        majority_fraction=np.array(obj["majority_fraction"], dtype=np.float64),
        imbalanced_members=np.array(obj["imbalanced_members"], dtype=np.int64),
        balanced_members=np.array(obj["balanced_members"], dtype=np.int64),
        mode=obj.get("mode", "imbalance"),
    )


def _read_assignment(path: Path, ids: list[str]) -> clustering.ClusterAssignment:
    by_id = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            by_id[row["record_id"]] = int(row["cluster_id"])
    missing = [rid for rid in ids if rid not in by_id]
    if missing:
        raise pipeline.PipelineError(f"assignment file misses record {missing[0]!r}")
    cluster_of = np.array([by_id[rid] for rid in ids], dtype=np.int64)
    return clustering.ClusterAssignment(cluster_of, int(cluster_of.max()) + 1)


def _cmd_mine(args) -> None:
    config = _load_config(args)
    out = _outdir(args)
    dataset = _read_dataset(args)
    assignment = _read_assignment(args.assignment, dataset.ids)
    grouping = _read_grouping(args.grouping)
    quadruplets, report = mining.mine_quadruplets(
        dataset.label_of,
        assignment,
        grouping,
        per_anchor=config.train.per_anchor,
        seed=seeds.derive(config.seed, "mining", 1),
    )
    quad_path = out / "quadruplets.csv"
    with open(quad_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["anchor", "positive", "intermediate", "negative"])
        for q in quadruplets:
            writer.writerow(q.indices())
    report_path = out / "mining_report.json"
    _write_json(
        report_path,
        {
            "anchors_total": report.anchors_total,
            "anchors_used": report.anchors_used,
            "anchors_skipped": report.anchors_skipped,
            "quadruplets": report.quadruplets,
        },
        config,
    )
    _write_manifest(out, "mine", config, [quad_path, report_path])


def _cmd_train(args) -> None:
    config = _load_config(args)
    out = _outdir(args)
    dataset = _read_dataset(args)
    _, grouping = pipeline.derive_grouping(dataset, config.train, config.seed)
    split = pipeline.make_split(dataset, grouping, config)
    index = {rid: i for i, rid in enumerate(dataset.ids)}
    pool = np.sort(
        np.array([index[r] for r in split.train_ids + split.ood_test_ids], dtype=np.int64)
    )
    params, report = pipeline.train_debias(dataset, grouping, config.train, config.seed, pool)
    ckpt_path = out / "remap.ckpt"
    remap.save_params(params, str(ckpt_path))
    report_path = out / "train_report.json"
    _write_json(report_path, report.to_json(), config)
    _write_manifest(out, "train", config, [ckpt_path, report_path])


def _read_split(path: Path) -> data.DatasetSplit:
    obj = json.loads(Path(path).read_text())
    return data.DatasetSplit(
        tuple(obj["train_ids"]), tuple(obj["id_test_ids"]), tuple(obj["ood_test_ids"])
    )


def _cmd_eval(args) -> None:
    config = _load_config(args)
    out = _outdir(args)
    dataset = _read_dataset(args)
    split = _read_split(args.split)
    params = remap.load_params(str(args.checkpoint)) if args.checkpoint else None
    head = pipeline.train_head(dataset, split, config, params)
    report = evaluation.evaluate(head, dataset, split, params)

    tag = "debiased" if params is not None else "baseline"
    eval_path = out / f"eval_{tag}.json"
    _write_json(eval_path, report.to_json(), config)
    pr_path = out / f"pr_curve_{tag}.csv"
    _write_pr_csv(pr_path, report, config)
    pca_path = out / f"pca_{tag}.csv"
    _write_pca_csv(pca_path, dataset, split, params, config)
    _write_manifest(out, "eval", config, [eval_path, pr_path, pca_path])


def _write_pr_csv(
    path: Path, report: evaluation.EvalReport, config: pipeline.ExperimentConfig
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_sha256={_config_hash(config)}\n")
        writer = csv.writer(fh)
        writer.writerow(["test_set", "positive_label", "recall", "precision"])
        for name, rep in (("id", report.id_test), ("ood", report.ood_test)):
            for label, points in rep.pr_curves.items():
                for recall, precision in points:
                    writer.writerow([name, label, f"{recall:.10g}", f"{precision:.10g}"])


def _write_pca_csv(
    path: Path,
    dataset: data.EmbeddingDataset,
    split: data.DatasetSplit,
    params,
    config: pipeline.ExperimentConfig,
) -> None:
    index = {rid: i for i, rid in enumerate(dataset.ids)}
    rows = np.array([index[r] for r in split.id_test_ids + split.ood_test_ids])
    X = dataset.vectors[rows].astype(np.float64)
    if params is not None:
        X = remap.remap_all(params, X)
    coords, ratios = evaluation.pca_project(X, 2)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_sha256={_config_hash(config)}\n")
        fh.write(f"# explained_variance_ratio={ratios[0]:.6g},{ratios[1]:.6g}\n")
        writer = csv.writer(fh)
        writer.writerow(["record_id", "test_set", "label", "pc1", "pc2"])
        for k, rid in enumerate(split.id_test_ids + split.ood_test_ids):
            test_set = "id" if k < len(split.id_test_ids) else "ood"
            writer.writerow(
                [
                    rid,
                    test_set,
                    int(dataset.label_of[rows[k]]),
                    f"{coords[k, 0]:.10g}",
                    f"{coords[k, 1]:.10g}",
                ]
            )


def _config_hash(config: pipeline.ExperimentConfig) -> str:
    blob = json.dumps(pipeline.config_to_dict(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _cmd_experiment(args) -> None:
    config = _load_config(args)
    out = _outdir(args)
    dataset = _read_dataset(args) if args.dataset else None
    if dataset is None and config.synthetic is None:
        raise pipeline.PipelineError("experiment needs --dataset or a 'synthetic' config section")
    report = pipeline.run_experiment(config, dataset)
    report_path = out / "experiment.json"
    report_path.write_text(pipeline.report_to_json_str(report))
    pr_path = out / "pr_curves.csv"
    with open(pr_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_sha256={_config_hash(config)}\n")
        writer = csv.writer(fh)
        writer.writerow(["variant", "test_set", "positive_label", "recall", "precision"])
        for variant, ev in (("baseline", report.baseline), ("debiased", report.debiased)):
            for name, rep in (("id", ev.id_test), ("ood", ev.ood_test)):
                for label, points in rep.pr_curves.items():
                    for recall, precision in points:
                        writer.writerow(
                            [variant, name, label, f"{recall:.10g}", f"{precision:.10g}"]
                        )
    _write_manifest(out, "experiment", config, [report_path, pr_path])


if __name__ == "__main__":
    sys.exit(main())
