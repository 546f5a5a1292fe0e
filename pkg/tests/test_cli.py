"""CLI tests: end-to-end pipeline, strict config rejection, distinct exit
codes, byte-identical reruns, and the demo output contracts."""

import csv
import json
import xml.etree.ElementTree as ET

import pytest

from advtraj import jsonio
from advtraj.cli import (
    EXIT_CONFIG,
    EXIT_CONTRACT,
    EXIT_DIVERGED,
    EXIT_MISSING_FILE,
    EXIT_OK,
    main,
)


def write_config(path, **overrides):
    doc = {
        "seed": 7,
        "data": {"kind": "circles", "n": 300, "noise": 0.03},
        "model": {"width": 8, "blocks": 5, "classes": 2},
        "train": {"mode": "vanilla", "epochs": 12, "learning_rate": 0.2, "batch_size": 64},
        "attack": {"kind": "fgm", "epsilon": 0.3, "norm": "linf"},
        "detect": {"n_trees": 20},
        "experiment": {"test_n": 150, "ood_n": 40},
    }
    for key, value in overrides.items():
        if value is None:
            doc.pop(key, None)
        elif isinstance(value, dict) and key in doc:
            doc[key].update(value)
        else:
            doc[key] = value
    jsonio.dump(doc, path)
    return path


def run(command, cfg_path, out_dir, *extra):
    return main([command, "--config", str(cfg_path), "--out", str(out_dir), *extra])


class TestPipeline:
    def test_gen_train_attack_experiment_chain(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "gen"
        assert run("gen-data", cfg, out) == EXIT_OK
        assert (out / "dataset.csv").exists()
        assert (out / "dataset.meta.json").exists()

        train_cfg = write_config(tmp_path / "train.json",
                                 data={"path": str(out / "dataset.csv")},
                                 train={"epochs": 40})
        assert run("train", train_cfg, out) == EXIT_OK
        assert (out / "checkpoint.json").exists()
        report = json.loads((out / "train_report.json").read_text())
        assert report["final_train_accuracy"] > 0.9

        attack_cfg = write_config(tmp_path / "attack.json", attack={
            "kind": "bim", "epsilon": 0.3,
            "checkpoint": str(out / "checkpoint.json"),
            "dataset": str(out / "dataset.csv")})
        assert run("attack", attack_cfg, out) == EXIT_OK
        manifest = json.loads((out / "attack_manifest.json").read_text())
        assert manifest["config"]["kind"] == "bim"
        assert all(n <= 0.3 + 1e-12 for n in manifest["perturbation_norm"])

        feat_cfg = write_config(tmp_path / "feat.json", detect={
            "checkpoint": str(out / "checkpoint.json"),
            "dataset": str(out / "adversarial.csv")})
        assert run("extract-features", feat_cfg, out) == EXIT_OK

        fit_cfg = write_config(tmp_path / "fit.json", detect={
            "n_trees": 10, "train_features": str(out / "features.csv")})
        assert run("fit-detector", fit_cfg, out) == EXIT_OK
        assert (out / "detector.json").exists()
        assert (out / "detector_metrics.json").exists()

    def test_experiment_seen(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "seen"
        assert run("experiment-seen", cfg, out) == EXIT_OK
        doc = json.loads((out / "report.json").read_text())
        assert doc["rows"][0]["attack"] == "fgm"
        assert 0.0 <= doc["rows"][0]["detection_accuracy"] <= 1.0
        assert (out / "report.csv").exists()
        ET.parse(out / "report.svg")  # well-formed XML

    def test_experiment_unseen(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json",
                           experiment={"test_n": 150, "test_attacks": ["bim"]})
        out = tmp_path / "unseen"
        assert run("experiment-unseen", cfg, out) == EXIT_OK
        doc = json.loads((out / "report.json").read_text())
        assert [row["attack"] for row in doc["rows"]] == ["bim"]

    def test_experiment_ood(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", experiment={
            "test_n": 150,
            "second": {"kind": "moons", "n": 150, "noise": 0.05},
            "third": {"kind": "blobs", "n": 150, "noise": 0.2, "shift": [0.0, 2.0]}})
        out = tmp_path / "ood"
        assert run("experiment-ood", cfg, out) == EXIT_OK
        doc = json.loads((out / "report.json").read_text())
        assert doc["rows"][0]["attack"] == "ood"


@pytest.fixture(scope="module")
def demo_out(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("demo")
    cfg = write_config(tmp / "cfg.json", model={"width": 8, "blocks": 9, "classes": 2},
                       train={"epochs": 10})
    out = tmp / "out"
    assert run("demo-circles", cfg, out) == EXIT_OK
    return out


class TestDemoCircles:
    def test_scatter_csv_has_block_sections(self, demo_out):
        with open(demo_out / "embeddings_vanilla.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        blocks = [int(r["block"]) for r in rows]
        n_points = 150 + 40  # test_n + ood_n
        assert blocks == sorted(blocks)  # contiguous sections in block order
        for b in range(10):
            assert blocks.count(b) == n_points
        assert {r["cls"] for r in rows} == {"0", "1", "ood"}

    def test_histogram_csv_series_and_quantiles(self, demo_out):
        with open(demo_out / "transport_hist.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        for net in ("vanilla", "lap"):
            series = {r["series"] for r in rows if r["net"] == net}
            assert {"clean", "adversarial", "quantile_low", "quantile_high"} <= series
            low = [float(r["left"]) for r in rows
                   if r["net"] == net and r["series"] == "quantile_low"]
            high = [float(r["left"]) for r in rows
                    if r["net"] == net and r["series"] == "quantile_high"]
            assert len(low) == 1 and len(high) == 1
            assert low[0] <= high[0]

    def test_svg_outputs_are_well_formed_xml(self, demo_out):
        ET.parse(demo_out / "fig_embeddings.svg")
        ET.parse(demo_out / "fig_hist.svg")


class TestFailureModes:
    def test_unknown_key_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"seeed": 3}\n')
        assert main(["gen-data", "--config", str(bad)]) == EXIT_CONFIG

    def test_unknown_section_key_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"data": {"kinds": "circles"}}\n')
        assert main(["gen-data", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_json_syntax_error_reports_line_and_column(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"seed": }\n')
        assert main(["gen-data", "--config", str(bad)]) == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "line 1" in err and "column" in err

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["gen-data", "--config", str(tmp_path / "nope.json")]) == EXIT_MISSING_FILE

    def test_contract_violation_exit_code(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", data={"n": 1})
        assert run("gen-data", cfg, tmp_path / "out") == EXIT_CONTRACT

    def test_divergence_exit_code(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json",
                           train={"learning_rate": 1e9, "epochs": 30, "clip_norm": None},
                           data={"kind": "circles", "n": 100, "noise": 0.03})
        assert run("train", cfg, tmp_path / "out") == EXIT_DIVERGED


class TestDeterminism:
    def test_reports_are_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert run("experiment-seen", cfg, out1) == EXIT_OK
        assert run("experiment-seen", cfg, out2) == EXIT_OK
        for name in ("report.json", "report.csv", "checkpoint.json", "train_report.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_gen_data_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out1, out2 = tmp_path / "g1", tmp_path / "g2"
        assert run("gen-data", cfg, out1) == EXIT_OK
        assert run("gen-data", cfg, out2) == EXIT_OK
        assert (out1 / "dataset.csv").read_bytes() == (out2 / "dataset.csv").read_bytes()

    def test_seed_flag_overrides_master(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert run("gen-data", cfg, out1, "--seed", "99") == EXIT_OK
        assert run("gen-data", cfg, out2) == EXIT_OK
        assert (out1 / "dataset.csv").read_bytes() != (out2 / "dataset.csv").read_bytes()
