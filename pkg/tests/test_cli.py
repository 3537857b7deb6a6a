"""End-to-end checks of the seven-stage command line pipeline.

Uses a deliberately small config (one wanted level, seven blockers, one
offset, 360 packets) so the whole chain runs in a few seconds.
"""

import json
import shutil
from pathlib import Path

import pytest

from agcml.cli import main
from agcml.manifest import manifest_path

TINY_TOML = """\
seed = 3

[sweep]
wanted_dbm = [-60.0]
blocker_dbm = [-70.0, -50.0, -41.0, -29.0, -23.0, -17.0, -11.0]
offsets_mhz = [37.0]

[signal]
length = 360

[split]
folds = 4
repeats = 2

[train]
epochs = 30

[report]
blocker_levels_dbm = [-41.0, -17.0]
packets = 20
repetitions = 2
"""

STAGES = ("sweep", "synth", "split", "train", "eval", "report", "flip")


def run_pipeline(cfg_path: Path, out: Path) -> None:
    for stage in STAGES:
        code = main([stage, "--config", str(cfg_path), "--out", str(out)])
        assert code == 0, f"stage {stage} failed"


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory) -> tuple[Path, Path]:
    root = tmp_path_factory.mktemp("pipeline")
    cfg_path = root / "tiny.toml"
    cfg_path.write_text(TINY_TOML)
    out = root / "out"
    run_pipeline(cfg_path, out)
    return cfg_path, out


def load_json(path: Path) -> dict:
    return json.loads(path.read_text())


class TestFullRun:
    def test_artifacts_exist(self, pipeline):
        _, out = pipeline
        expected = [
            "dataset.csv",
            "dataset.json",
            "signal.csv",
            "runs/run0/windows_train.csv",
            "runs/run0/windows_test.csv",
            "runs/run0/model.json",
            "runs/run0/curves.csv",
            "runs/run1/model.json",
            "eval.json",
            "per_report.csv",
            "per_reference.dat",
            "per_scenario4.dat",
            "report.json",
            "flip.json",
        ]
        for rel in expected:
            assert (out / rel).is_file(), rel
        for stage in STAGES:
            assert manifest_path(out, stage).is_file(), stage

    def test_manifests_chain(self, pipeline):
        _, out = pipeline
        sweep = load_json(manifest_path(out, "sweep"))
        synth = load_json(manifest_path(out, "synth"))
        split = load_json(manifest_path(out, "split"))
        train = load_json(manifest_path(out, "train"))
        assert synth["inputs"] == {
            name: entry["sha256"] for name, entry in sweep["outputs"].items()
        }
        assert split["inputs"] == {
            name: entry["sha256"] for name, entry in synth["outputs"].items()
        }
        assert train["inputs"] == {
            name: entry["sha256"] for name, entry in split["outputs"].items()
        }
        hashes = {m["config_hash"] for m in (sweep, synth, split, train)}
        assert len(hashes) == 1

    def test_eval_payload(self, pipeline):
        _, out = pipeline
        payload = load_json(out / "eval.json")
        assert payload["schema"] == "agcml.eval.v1"
        assert len(payload["runs"]) == 2
        for run in payload["runs"]:
            assert 0.0 <= run["accuracy"] <= 1.0
            assert run["gap_points"] == pytest.approx(
                100.0 * (run["accuracy"] - run["majority_baseline"])
            )
        assert payload["min_gap_points"] == pytest.approx(
            min(r["gap_points"] for r in payload["runs"])
        )

    def test_report_payload(self, pipeline):
        _, out = pipeline
        payload = load_json(out / "report.json")
        assert payload["schema"] == "agcml.report.v1"
        by_mode = {}
        for row in payload["rows"]:
            by_mode.setdefault(row["mode"], []).append(row["blocker_dbm"])
        assert by_mode == {
            "reference": [-41.0, -17.0],
            "scenario4": [-41.0, -17.0],
        }
        header = (out / "per_report.csv").read_text().splitlines()[0]
        assert header == "blocker_dbm,per_ref,per_s4,per_std_ref,per_std_s4"

    def test_flip_payload(self, pipeline):
        _, out = pipeline
        payload = load_json(out / "flip.json")
        assert payload["schema"] == "agcml.flip.v1"
        assert payload["flipped_count"] == payload["qualifying_count"]
        if payload["qualifying_count"]:
            assert payload["fraction"] == 1.0
        assert payload["hardware_fraction"] == 0.61

    def test_rerun_is_byte_identical(self, pipeline, tmp_path):
        cfg_path, out = pipeline
        again = tmp_path / "again"
        run_pipeline(cfg_path, again)
        originals = sorted(
            p.relative_to(out) for p in out.rglob("*") if p.is_file()
        )
        copies = sorted(
            p.relative_to(again) for p in again.rglob("*") if p.is_file()
        )
        assert originals == copies
        for rel in originals:
            assert (out / rel).read_bytes() == (again / rel).read_bytes(), rel


class TestReportModes:
    def test_reference_only(self, pipeline, tmp_path):
        cfg_path, out = pipeline
        solo = tmp_path / "solo"
        shutil.copytree(out, solo)
        code = main(
            ["report", "--config", str(cfg_path), "--out", str(solo), "--mode", "reference"]
        )
        assert code == 0
        manifest = load_json(manifest_path(solo, "report"))
        assert manifest["extra"]["modes"] == ["reference"]
        assert "per_reference_dat" in manifest["outputs"]
        assert "per_scenario4_dat" not in manifest["outputs"]
        lines = (solo / "per_report.csv").read_text().splitlines()
        for line in lines[1:]:
            cells = line.split(",")
            assert cells[1] != "" and cells[3] != ""
            assert cells[2] == "" and cells[4] == ""


class TestFailureModes:
    def test_stage_out_of_order(self, tmp_path, capsys):
        cfg_path = tmp_path / "tiny.toml"
        cfg_path.write_text(TINY_TOML)
        code = main(["synth", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 3
        assert "sweep" in capsys.readouterr().err

    def test_seed_override_invalidates_upstream(self, tmp_path, capsys):
        cfg_path = tmp_path / "tiny.toml"
        cfg_path.write_text(TINY_TOML)
        out = tmp_path / "o"
        assert main(["sweep", "--config", str(cfg_path), "--out", str(out), "--seed", "99"]) == 0
        code = main(["synth", "--config", str(cfg_path), "--out", str(out)])
        assert code == 3
        assert "rerun upstream" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(
            ["sweep", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "o")]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg_path = tmp_path / "bad.toml"
        cfg_path.write_text("[trian]\nepochs = 5\n")
        code = main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "trian" in capsys.readouterr().err

    def test_invalid_toml(self, tmp_path, capsys):
        cfg_path = tmp_path / "bad.toml"
        cfg_path.write_text("seed = = 1\n")
        code = main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "error:" in capsys.readouterr().err
