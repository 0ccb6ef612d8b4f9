"""Shared fixtures: small configs, tiny datasets and random head inputs."""

import numpy as np
import pytest

from core.tensor import Tensor
from model.params import HeadDims, init_params
from runner.config_loader import RunConfig, config_from_dict
from runner.feature_cache import FeatureCache
from simulators.backbone_simulator import create_backbone
from simulators.clip_simulator import WorldConfig, make_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def world():
    return WorldConfig()


def small_plan(tmp_path, **sections):
    plan = {
        "run": {"name": "unit", "seed": 0},
        "dataset": {"num_clips": 6, "train_fraction": 0.5},
        "model": {"num_heads": 2, "ffn_hidden": 24},
        "optimizer": {"lr": 0.05, "momentum": 0.9, "steps": 3, "batch_size": 2},
        "evaluation": {"eval_every": 2},
        "ablation": {"seeds": [0]},
        "paths": {
            "data_dir": str(tmp_path / "data"),
            "checkpoint": str(tmp_path / "ckpt" / "head.ckpt"),
            "report_dir": str(tmp_path / "reports"),
        },
    }
    for name, values in sections.items():
        plan.setdefault(name, {}).update(values)
    return plan


@pytest.fixture
def plan_factory(tmp_path):
    return lambda **sections: small_plan(tmp_path, **sections)


@pytest.fixture
def small_config(plan_factory) -> RunConfig:
    return config_from_dict(plan_factory())


@pytest.fixture
def mini_dims():
    def build(variant="spatiotemporal_ctx+spatial_actors", **overrides):
        values = dict(slow_channels=4, fast_channels=4, grid_height=3, grid_width=3, fast_frames=4,
                      num_classes=5, num_heads=2, variant=variant, zero_init_classifier=False)
        values.update(overrides)
        return HeadDims(**values)
    return build


@pytest.fixture
def head_inputs(rng):
    """Random actor tokens and context tokens shaped for `mini_dims`."""
    def build(dims: HeadDims, num_actors: int = 2, lead=()):
        return {
            "actors": Tensor(rng.normal(size=lead + (num_actors, 49, dims.model_dim))),
            "slow": Tensor(rng.normal(size=lead + (dims.spatial_tokens, dims.slow_channels))),
            "fast": Tensor(rng.normal(size=lead + (dims.fast_frames, dims.fast_channels))),
            "pooled": Tensor(rng.normal(size=lead + (dims.spatial_tokens, dims.model_dim))),
        }
    return build


@pytest.fixture
def mini_head(mini_dims):
    def build(variant="spatiotemporal_ctx+spatial_actors", seed=0, **overrides):
        return init_params(mini_dims(variant, **overrides), seed)
    return build


@pytest.fixture
def tiny_split(small_config):
    train, val = make_dataset(
        small_config.dataset.num_clips, small_config.run.seed, small_config.dataset.split, small_config.dataset.world
    )
    return train, val


@pytest.fixture
def cache(small_config):
    backbone = create_backbone(small_config.backbone, small_config.dataset.world.image_size)
    return FeatureCache(backbone, small_config.evaluation.proposal_threshold)
