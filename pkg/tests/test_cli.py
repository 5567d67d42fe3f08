import json

import pytest

from intershap.cli import main
from intershap.report import ExplanationReport, parse_force_plot


def write_config(path, **kw):
    path.write_text(json.dumps(kw))
    return str(path)


@pytest.fixture(scope="module")
def datasets(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out = {}
    for setting in ("synergy", "uniqueness", "redundancy"):
        cfg = write_config(root / f"{setting}.json", setting=setting, N=3000, seed=2)
        assert main(["gen-data", "--config", cfg, "--out", str(root / setting)]) == 0
        out[setting] = root / setting
    cfg = write_config(root / "m3.json", setting="synergy", M=3, N=500, seed=2)
    assert main(["gen-data", "--config", cfg, "--out", str(root / "m3")]) == 0
    out["m3"] = root / "m3"
    return out


class TestGenData:
    def test_default_summary(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", setting="synergy")
        assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / "d")]) == 0
        manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
        assert manifest["N"] == 20000 and manifest["dims"] == [110, 90]
        assert "N=20000" in capsys.readouterr().out

    def test_rerun_identical_checksums(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", N=200, seed=4)
        main(["gen-data", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["gen-data", "--config", cfg, "--out", str(tmp_path / "b")])
        a = json.loads((tmp_path / "a" / "manifest.json").read_text())
        b = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert a["checksums"] == b["checksums"]

    def test_bad_split_exit_2(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", split=[0.5, 0.2, 0.2])
        assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / "d")]) == 2

    def test_missing_config_exit_2(self, tmp_path):
        assert main(["gen-data", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2

    def test_unknown_command_exit_2(self):
        assert main(["frobnicate"]) == 2


class TestTrain:
    def test_three_seeds(self, datasets, tmp_path, capsys):
        rc = main(["train", "--data", str(datasets["uniqueness"]), "--fusion", "early",
                   "--seeds", "1,42,113", "--epochs", "2", "--out", str(tmp_path)])
        assert rc == 0
        for seed in (1, 42, 113):
            assert (tmp_path / f"seed_{seed}" / "model_manifest.json").is_file()
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert [r["seed"] for r in metrics["runs"]] == [1, 42, 113]
        assert set(metrics["summary"]) == {"train", "val", "test"}
        assert "±" in capsys.readouterr().out

    def test_missing_data_exit_2(self, tmp_path):
        assert main(["train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 2

    def test_model_dataset_mismatch_exit_2(self, datasets, tmp_path):
        main(["train", "--data", str(datasets["m3"]), "--seeds", "1", "--epochs", "1", "--out", str(tmp_path)])
        rc = main(["explain", "--data", str(datasets["synergy"]), "--model", str(tmp_path / "seed_1"),
                   "--out", str(tmp_path / "e")])
        assert rc == 2


class TestExplain:
    def run(self, data, out, *extra):
        return main(["explain", "--data", str(data), "--oracle", "--mask-reps", "64", "--seed", "0",
                     "--split", "test", "--limit", "300", "--out", str(out), *extra])

    def test_oracle_synergy(self, datasets, tmp_path):
        assert self.run(datasets["synergy"], tmp_path) == 0
        report = ExplanationReport.from_json((tmp_path / "report.json").read_text())
        assert 0.97 <= report.global_.intershap <= 1.0
        assert report.provenance["masking"]["repetitions"] == 64
        assert len(report.provenance["dataset_manifest_sha256"]) == 64

    def test_oracle_uniqueness(self, datasets, tmp_path):
        assert self.run(datasets["uniqueness"], tmp_path) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["global"]["intershap"] <= 0.02

    def test_svgs_telescope(self, datasets, tmp_path):
        self.run(datasets["synergy"], tmp_path)
        svgs = sorted(tmp_path.glob("*.svg"))
        assert (tmp_path / "force_plot.svg") in svgs and len(svgs) == 3
        for path in svgs:
            assert abs(parse_force_plot(path.read_text()).residual()) <= 1e-6

    def test_reports_identical_except_timestamp(self, datasets, tmp_path):
        self.run(datasets["synergy"], tmp_path / "a", "--threads", "1")
        main(["--threads", "3", "explain", "--data", str(datasets["synergy"]), "--oracle", "--limit", "300",
              "--out", str(tmp_path / "b")])
        a = json.loads((tmp_path / "a" / "report.json").read_text())
        b = json.loads((tmp_path / "b" / "report.json").read_text())
        a.pop("created"), b.pop("created")
        assert a == b

    def test_oracle_on_redundancy_exit_2(self, datasets, tmp_path, capsys):
        assert self.run(datasets["redundancy"], tmp_path) == 2
        assert "ambiguous" in capsys.readouterr().err


class TestCompare:
    def test_oracle_table(self, datasets, tmp_path):
        rc = main(["compare", "--data", str(datasets["uniqueness"]), "--oracle", "--which", "all",
                   "--mask-reps", "16", "--limit", "300", "--out", str(tmp_path)])
        assert rc == 0
        table = json.loads((tmp_path / "baselines.json").read_text())
        for key in ("emap_f1", "model_f1", "emap_gap", "shape_score", "intershap"):
            assert key in table
        assert abs(table["emap_gap"]) <= 0.5

    def test_emap_needs_two_modalities(self, datasets, tmp_path):
        rc = main(["compare", "--data", str(datasets["m3"]), "--oracle", "--which", "emap", "--out", str(tmp_path)])
        assert rc == 2
