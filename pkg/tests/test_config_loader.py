"""Run plan loading and validation."""

import json
from pathlib import Path

import pytest

from core.errors import ConfigurationError
from runner.config_loader import ConfigLoader, RunConfig, config_from_dict, ensure_writable

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def test_empty_plan_gives_defaults():
    config = config_from_dict({})
    assert config == RunConfig()
    assert config.fast_frames == 8
    assert config.head_dims().model_dim == 20


@pytest.mark.parametrize("name", ["desk_default.yaml", "ablation.yaml", "gradcheck_quick.yaml"])
def test_shipped_plans_load(name):
    config = ConfigLoader(str(CONFIG_DIR / name)).load()
    assert config.head_dims().num_classes == 6


def test_world_keys_live_in_dataset_section():
    config = config_from_dict({"dataset": {"frames": 32, "num_clips": 4}})
    assert config.dataset.world.frames == 32
    assert config.dataset.num_clips == 4
    assert config.fast_frames == 16


@pytest.mark.parametrize("plan, match", [
    ({"trainer": {}}, "unknown sections"),
    ({"model": {"heads": 2}}, "unknown keys"),
    ({"model": {"variant": "temporal_ctx"}}, "variant"),
    ({"model": {"num_classes": 5}}, "num_classes"),
    ({"model": {"num_heads": True}}, "integer"),
    ({"model": {"num_heads": 3}}, "divisible"),
    ({"model": {"model_dim": 32}}, "model_dim"),
    ({"optimizer": {"lr": 0}}, "positive"),
    ({"optimizer": {"momentum": 1.0}}, "momentum"),
    ({"dataset": {"frames": 12}}, "divisible"),
    ({"dataset": {"train_fraction": 1.5}}, "train_fraction"),
    ({"evaluation": {"iou_threshold": -0.1}}, "iou_threshold"),
    ({"ablation": {"seeds": []}}, "seeds"),
    ({"run": ["name"]}, "mapping"),
])
def test_invalid_plans_raise(plan, match):
    with pytest.raises(ConfigurationError, match=match):
        config_from_dict(plan)


def test_gradcheck_checks_are_parsed():
    config = config_from_dict({"gradcheck": {"eps": 1e-6, "checks": [{"name": "head", "variants": ["baseline"]}]}})
    assert config.gradcheck.eps == 1e-6
    assert [(c.name, c.variants) for c in config.gradcheck.checks] == [("head", ("baseline",))]


def test_json_snapshot_rebuilds_the_same_config(small_config):
    rebuilt = config_from_dict(json.loads(small_config.to_json()))
    assert rebuilt == small_config
    assert rebuilt.to_json() == small_config.to_json()


def test_overrides_replace_only_named_fields(small_config):
    changed = small_config.with_overrides(seed=5, report_dir="elsewhere")
    assert (changed.run.seed, changed.paths.report_dir) == (5, "elsewhere")
    assert changed.paths.checkpoint == small_config.paths.checkpoint
    assert small_config.with_overrides() is small_config


def test_head_dims_follow_variant_argument(small_config):
    assert small_config.head_dims("baseline").variant == "baseline"
    assert small_config.head_dims().variant == small_config.model.variant


def test_missing_file_raises():
    with pytest.raises(FileNotFoundError):
        ConfigLoader("/nonexistent/plan.yaml")


def test_malformed_yaml_raises(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("model: [unclosed\n")
    with pytest.raises(ConfigurationError):
        ConfigLoader(str(path)).load()


def test_ensure_writable_creates_output_dirs(small_config):
    ensure_writable(small_config)
    assert Path(small_config.paths.report_dir).is_dir()
    assert Path(small_config.paths.checkpoint).parent.is_dir()


def test_output_under_a_file_is_an_os_error(small_config, tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    config = small_config.with_overrides(data_dir=str(blocker / "data"))
    with pytest.raises(OSError):
        ensure_writable(config)
