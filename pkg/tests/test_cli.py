import json

import pytest

from declust import cli, data


def tiny_config_dict(seed=0):
    blobs = (
        [{"size": 40, "skew": 1.0, "std": 0.05, "majority_label": m} for m in (0, 1)]
        + [{"size": 40, "skew": 0.5, "std": 0.05, "majority_label": None} for _ in range(2)]
    )
    return {
        "seed": seed,
        "id_test_size": 16,
        "head_epochs": 80,
        "head_lr": 0.05,
        "train": {
            "lr": 0.01,
            "recluster_interval": 2,
            "max_rounds": 3,
            "clustering_backend": "kmeans",
            "kmeans_k": 4,
            "remap_backend": "mlp",
            "remap_hidden": 24,
            "sparsify_top_k": 30,
            "min_size": 4,
            "hopkins_probes": 20,
        },
        "synthetic": {
            "dim": 16,
            "label_count": 2,
            "blobs": blobs,
            "center_scale": 1.0,
            "label_signal": 0.3,
            "max_center_cos": 0.6,
            "center_offset": 0.7,
            "seed": seed,
        },
    }


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config_dict()))
    return path


class TestGen:
    def test_writes_dataset_and_truth(self, tmp_path, config_path):
        out = tmp_path / "out"
        assert cli.main(["gen", "--config", str(config_path), "--out", str(out)]) == 0
        ds = data.read_dataset(str(out / "dataset.jsonl"), "jsonl")
        assert ds.n == 160
        truth_lines = (out / "ground_truth.csv").read_text().splitlines()
        assert truth_lines[0] == "record_id,blob_id"
        assert len(truth_lines) == 161
        manifest = json.loads((out / "run.json").read_text())
        assert manifest["command"] == "gen"
        assert manifest["config"]["seed"] == 0

    def test_same_seed_byte_identical(self, tmp_path, config_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cli.main(["gen", "--config", str(config_path), "--out", str(out1)])
        cli.main(["gen", "--config", str(config_path), "--out", str(out2)])
        assert (out1 / "dataset.jsonl").read_bytes() == (out2 / "dataset.jsonl").read_bytes()

    def test_binary_format(self, tmp_path, config_path):
        out = tmp_path / "out"
        cli.main(["gen", "--config", str(config_path), "--out", str(out), "--format", "binary"])
        ds = data.read_dataset(str(out / "dataset.bin"), "binary")
        assert ds.n == 160


class TestErrors:
    def test_unknown_config_key(self, tmp_path, capsys):
        obj = tiny_config_dict()
        obj["not_a_key"] = True
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(obj))
        code = cli.main(["gen", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code != 0
        err = json.loads(capsys.readouterr().err)
        assert err["status"] == "error"
        assert "not_a_key" in err["error"]["message"]

    def test_missing_dataset_file(self, tmp_path, capsys, config_path):
        code = cli.main(
            ["cluster", "--config", str(config_path), "--dataset", str(tmp_path / "nope.jsonl"),
             "--out", str(tmp_path / "o")]
        )
        assert code != 0
        err = json.loads(capsys.readouterr().err)
        assert err["status"] == "error"


class TestStagedPipeline:
    def test_stages_reproduce_experiment(self, tmp_path, config_path):
        out = tmp_path / "staged"
        assert cli.main(["gen", "--config", str(config_path), "--out", str(out)]) == 0
        dataset = str(out / "dataset.jsonl")
        assert cli.main(["cluster", "--config", str(config_path), "--dataset", dataset, "--out", str(out)]) == 0
        assert cli.main(
            ["mine", "--config", str(config_path), "--dataset", dataset,
             "--assignment", str(out / "assignment.csv"), "--grouping", str(out / "grouping.json"),
             "--out", str(out)]
        ) == 0
        assert cli.main(["train", "--config", str(config_path), "--dataset", dataset, "--out", str(out)]) == 0
        assert cli.main(
            ["eval", "--config", str(config_path), "--dataset", dataset,
             "--split", str(out / "split.json"), "--out", str(out)]
        ) == 0
        assert cli.main(
            ["eval", "--config", str(config_path), "--dataset", dataset,
             "--split", str(out / "split.json"), "--checkpoint", str(out / "remap.ckpt"),
             "--out", str(out)]
        ) == 0

        exp_out = tmp_path / "exp"
        assert cli.main(["experiment", "--config", str(config_path), "--out", str(exp_out)]) == 0
        experiment = json.loads((exp_out / "experiment.json").read_text())

        def strip(obj):
            obj = dict(obj)
            obj.pop("config", None)
            return obj

        baseline = strip(json.loads((out / "eval_baseline.json").read_text()))
        debiased = strip(json.loads((out / "eval_debiased.json").read_text()))
        assert baseline == experiment["baseline"]
        assert debiased == experiment["debiased"]

    def test_experiment_report_contents(self, tmp_path, config_path):
        out = tmp_path / "exp"
        cli.main(["experiment", "--config", str(config_path), "--out", str(out)])
        report = json.loads((out / "experiment.json").read_text())
        assert {"baseline", "debiased", "train_report", "delta_theta", "config"} <= set(report)
        assert report["baseline"]["gap"] >= 0.0
        pr_lines = (out / "pr_curves.csv").read_text().splitlines()
        assert pr_lines[1] == "variant,test_set,positive_label,recall,precision"

    def test_seed_flag_overrides_config(self, tmp_path, config_path):
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        cli.main(["gen", "--config", str(config_path), "--out", str(out1), "--seed", "7"])
        cli.main(["gen", "--config", str(config_path), "--out", str(out2), "--seed", "8"])
        a = (out1 / "dataset.jsonl").read_bytes()
        b = (out2 / "dataset.jsonl").read_bytes()
        assert a != b

    def test_eval_outputs_pr_and_pca(self, tmp_path, config_path):
        out = tmp_path / "staged"
        cli.main(["gen", "--config", str(config_path), "--out", str(out)])
        dataset = str(out / "dataset.jsonl")
        cli.main(["cluster", "--config", str(config_path), "--dataset", dataset, "--out", str(out)])
        cli.main(["eval", "--config", str(config_path), "--dataset", dataset,
                  "--split", str(out / "split.json"), "--out", str(out)])
        pr = (out / "pr_curve_baseline.csv").read_text().splitlines()
        assert pr[0].startswith("# config_sha256=")
        pca = (out / "pca_baseline.csv").read_text().splitlines()
        assert pca[2] == "record_id,test_set,label,pc1,pc2"
        assert len(pca) > 10


class TestHopkinsCommand:
    def test_metric_record(self, tmp_path, config_path):
        out = tmp_path / "out"
        cli.main(["gen", "--config", str(config_path), "--out", str(out)])
        assert cli.main(
            ["hopkins", "--config", str(config_path), "--dataset", str(out / "dataset.jsonl"),
             "--out", str(out), "--probes", "16"]
        ) == 0
        record = json.loads((out / "hopkins.json").read_text())
        assert record["metric"] == "hopkins"
        assert 0.0 <= record["value"] <= 1.0
        assert record["probes"] == 16
        assert "config" in record
