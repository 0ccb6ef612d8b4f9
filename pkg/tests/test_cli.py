"""End-to-end runs of the stcx command line."""

import filecmp
import logging
from pathlib import Path

import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from main import EXIT_INVALID, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, cli
from runner.checkpoint import load_checkpoint


@pytest.fixture(autouse=True)
def detach_log_handlers():
    yield
    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)
        handler.close()


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def write_plan(tmp_path, plan_factory):
    def write(name="plan.yaml", **sections):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(plan_factory(**sections)))
        return str(path)
    return write


def invoke(runner, *args):
    return runner.invoke(cli, list(args), catch_exceptions=False)


def test_generate_is_reproducible(runner, write_plan, tmp_path):
    plan = write_plan()
    assert invoke(runner, "generate", "--config", plan).exit_code == EXIT_OK
    assert invoke(runner, "generate", "--config", plan, "--out", str(tmp_path / "again")).exit_code == EXIT_OK
    first, second = tmp_path / "data", tmp_path / "again"
    for name in ("manifest.csv", "boxes.txt", "ground_truth.txt", "clips/train_00000.clip", "clips/val_00002.clip"):
        assert filecmp.cmp(first / name, second / name, shallow=False), name
    manifest = pd.read_csv(first / "manifest.csv")
    assert manifest["split"].value_counts().to_dict() == {"train": 3, "val": 3}


def test_generate_zero_clips_writes_empty_manifest(runner, write_plan, tmp_path):
    plan = write_plan(dataset={"num_clips": 0})
    assert invoke(runner, "generate", "--config", plan).exit_code == EXIT_OK
    manifest = pd.read_csv(tmp_path / "data" / "manifest.csv")
    assert manifest.empty
    assert list(manifest.columns)[0] == "clip_id"


def test_train_then_eval(runner, write_plan, tmp_path):
    plan = write_plan()
    invoke(runner, "generate", "--config", plan)
    assert invoke(runner, "train", "--config", plan).exit_code == EXIT_OK

    ckpt = load_checkpoint(tmp_path / "ckpt" / "head.ckpt")
    assert ckpt.step == 3
    log = pd.read_csv(tmp_path / "reports" / "unit_training_log.csv")
    assert log["step"].tolist() == [0, 1, 2]

    first = invoke(runner, "eval", "--config", plan)
    assert first.exit_code == EXIT_OK
    report = (tmp_path / "reports" / "eval_report.txt").read_text()
    assert "class_id,class,count,ap" in first.output
    assert report.splitlines()[-1].startswith("mAP,")
    assert (tmp_path / "reports" / "detections.txt").exists()

    assert invoke(runner, "eval", "--config", plan).exit_code == EXIT_OK
    assert (tmp_path / "reports" / "eval_report.txt").read_text() == report


def test_seed_override_changes_the_checkpoint(runner, write_plan, tmp_path):
    plan = write_plan()
    invoke(runner, "generate", "--config", plan)
    invoke(runner, "train", "--config", plan, "--checkpoint", str(tmp_path / "a.ckpt"))
    invoke(runner, "train", "--config", plan, "--checkpoint", str(tmp_path / "b.ckpt"), "--seed", "9")
    assert load_checkpoint(tmp_path / "b.ckpt").config.run.seed == 9
    assert (tmp_path / "a.ckpt").read_bytes() != (tmp_path / "b.ckpt").read_bytes()


def test_eval_without_checkpoint_is_invalid(runner, write_plan):
    plan = write_plan()
    invoke(runner, "generate", "--config", plan)
    assert invoke(runner, "eval", "--config", plan).exit_code == EXIT_INVALID


def test_train_without_dataset_is_invalid(runner, write_plan):
    assert invoke(runner, "train", "--config", write_plan()).exit_code == EXIT_INVALID


def test_invalid_plan_exits_one(runner, write_plan):
    plan = write_plan(model={"variant": "temporal_ctx"})
    assert invoke(runner, "generate", "--config", plan).exit_code == EXIT_INVALID


def test_missing_plan_is_an_io_error(runner, tmp_path):
    assert invoke(runner, "generate", "--config", str(tmp_path / "absent.yaml")).exit_code == EXIT_IO


def test_unwritable_output_is_an_io_error(runner, write_plan, tmp_path):
    (tmp_path / "blocker").write_text("")
    out = str(tmp_path / "blocker" / "data")
    assert invoke(runner, "generate", "--config", write_plan(), "--out", out).exit_code == EXIT_IO


def test_gradcheck_exit_codes(runner, write_plan, tmp_path):
    passing = write_plan("pass.yaml", gradcheck={"checks": [{"name": "tensor_ops"}]})
    result = invoke(runner, "gradcheck", "--config", passing)
    assert result.exit_code == EXIT_OK
    assert "tensor_ops: PASS" in result.output
    assert list(Path(tmp_path / "reports").glob("unit_*_gradcheck.json"))

    failing = write_plan("fail.yaml", gradcheck={"checks": [{"name": "tensor_ops", "tolerance": 1e-30,
                                                             "linear_tolerance": 1e-30}]})
    assert invoke(runner, "gradcheck", "--config", failing).exit_code == EXIT_NUMERICAL


@pytest.mark.slow
def test_ablate_writes_reports(runner, write_plan, tmp_path):
    plan = write_plan(optimizer={"steps": 2})
    invoke(runner, "generate", "--config", plan)
    result = invoke(runner, "ablate", "--config", plan)
    assert result.exit_code == EXIT_OK
    table = pd.read_csv(tmp_path / "reports" / "ablation.csv")
    assert len(table) == 5
    assert (tmp_path / "reports" / "ablation.html").exists()
    assert "# reference" in (tmp_path / "reports" / "ablation_report.txt").read_text()
