"""YAML run plan loader: validated, frozen RunConfig trees."""

import dataclasses
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml

from core.errors import ConfigurationError
from model.params import VARIANTS, HeadDims
from simulators.backbone_simulator import BackboneConfig
from simulators.clip_simulator import CLASS_NAMES, WorldConfig


@dataclass(frozen=True)
class RunSection:
    name: str = "desk"
    seed: int = 0


@dataclass(frozen=True)
class DatasetSection:
    num_clips: int = 125
    train_fraction: float = 0.8
    world: WorldConfig = field(default_factory=WorldConfig)

    @property
    def split(self) -> Tuple[float, float]:
        return self.train_fraction, 1.0 - self.train_fraction


@dataclass(frozen=True)
class ModelSection:
    variant: str = "spatiotemporal_ctx+spatial_actors"
    num_heads: int = 4
    ffn_hidden: Optional[int] = None
    num_classes: int = len(CLASS_NAMES)
    model_dim: Optional[int] = None
    actor_positional: bool = True
    context_positional: bool = True
    zero_init_classifier: bool = True


@dataclass(frozen=True)
class OptimizerSection:
    lr: float = 1e-3
    momentum: float = 0.9
    steps: int = 500
    batch_size: int = 8


@dataclass(frozen=True)
class EvaluationSection:
    proposal_threshold: float = 0.8
    iou_threshold: float = 0.5
    eval_every: int = 100


@dataclass(frozen=True)
class AblationSection:
    seeds: Tuple[int, ...] = (0, 1, 2)
    variants: Tuple[str, ...] = VARIANTS


@dataclass(frozen=True)
class CheckSpec:
    name: str
    tolerance: float = 1e-4
    linear_tolerance: float = 1e-8
    seed: int = 0
    variants: Tuple[str, ...] = VARIANTS


@dataclass(frozen=True)
class GradcheckSection:
    eps: float = 1e-5
    checks: Tuple[CheckSpec, ...] = (CheckSpec("tensor_ops"), CheckSpec("blocks"), CheckSpec("head"))


@dataclass(frozen=True)
class PathsSection:
    data_dir: str = "data/desk"
    checkpoint: str = "artifacts/head.ckpt"
    report_dir: str = "reports"


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    model: ModelSection = field(default_factory=ModelSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    ablation: AblationSection = field(default_factory=AblationSection)
    gradcheck: GradcheckSection = field(default_factory=GradcheckSection)
    paths: PathsSection = field(default_factory=PathsSection)

    @property
    def fast_frames(self) -> int:
        return self.dataset.world.frames // self.backbone.fast_stride

    def head_dims(self, variant: Optional[str] = None) -> HeadDims:
        m = self.model
        return HeadDims(
            slow_channels=self.backbone.slow_channels,
            fast_channels=self.backbone.fast_channels,
            grid_height=self.backbone.grid_size,
            grid_width=self.backbone.grid_size,
            fast_frames=self.fast_frames,
            num_classes=m.num_classes,
            num_heads=m.num_heads,
            ffn_hidden=m.ffn_hidden,
            variant=variant or m.variant,
            actor_positional=m.actor_positional,
            context_positional=m.context_positional,
            zero_init_classifier=m.zero_init_classifier,
        )

    def with_overrides(self, seed: Optional[int] = None, checkpoint: Optional[str] = None,
                       report_dir: Optional[str] = None, data_dir: Optional[str] = None) -> "RunConfig":
        config = self
        if seed is not None:
            config = dataclasses.replace(config, run=dataclasses.replace(config.run, seed=seed))
        if checkpoint is not None:
            config = dataclasses.replace(config, paths=dataclasses.replace(config.paths, checkpoint=checkpoint))
        if report_dir is not None:
            config = dataclasses.replace(config, paths=dataclasses.replace(config.paths, report_dir=report_dir))
        if data_dir is not None:
            config = dataclasses.replace(config, paths=dataclasses.replace(config.paths, data_dir=data_dir))
        return config

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        world = data["dataset"].pop("world")
        data["dataset"].update(world)
        data["gradcheck"]["checks"] = [dict(c) for c in data["gradcheck"]["checks"]]
        return json.loads(json.dumps(data))

    def to_json(self) -> str:
        """Canonical snapshot: sorted keys, no whitespace variation."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


# ----------------------------------------------------------------------
# building from plain mappings
# ----------------------------------------------------------------------
def _section(cls, values: Any, name: str, **extra):
    if values is None:
        values = {}
    if not isinstance(values, Mapping):
        raise ConfigurationError(f"section '{name}' must be a mapping, got {type(values).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigurationError(f"unknown keys in '{name}': {unknown}")
    kwargs = {}
    for key, value in values.items():
        kind = known[key].type
        if isinstance(value, list):
            value = tuple(value)
        if kind in (int, "int") and isinstance(value, bool):
            raise ConfigurationError(f"{name}.{key} must be an integer, got {value!r}")
        if kind in (float, "float") and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        kwargs[key] = value
    kwargs.update(extra)
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigurationError(f"invalid '{name}' section: {e}") from e


def _positive(section: Any, name: str, *keys: str) -> None:
    for key in keys:
        value = getattr(section, key)
        if value is not None and (not isinstance(value, (int, float)) or value <= 0):
            raise ConfigurationError(f"{name}.{key} must be positive, got {value!r}")


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    if not isinstance(data, Mapping):
        raise ConfigurationError("run plan must be a mapping of sections")
    sections = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - sections)
    if unknown:
        raise ConfigurationError(f"unknown sections in run plan: {unknown}")

    dataset_values = dict(data.get("dataset") or {})
    world_keys = {f.name for f in fields(WorldConfig)}
    world = _section(WorldConfig, {k: dataset_values.pop(k) for k in list(dataset_values) if k in world_keys}, "dataset")
    checks_raw = (data.get("gradcheck") or {}).get("checks")
    gradcheck_values = {k: v for k, v in (data.get("gradcheck") or {}).items() if k != "checks"}
    checks = None
    if checks_raw is not None:
        if not isinstance(checks_raw, list):
            raise ConfigurationError("gradcheck.checks must be a list")
        checks = tuple(_section(CheckSpec, c, "gradcheck.checks") for c in checks_raw)

    config = RunConfig(
        run=_section(RunSection, data.get("run"), "run"),
        dataset=_section(DatasetSection, dataset_values, "dataset", world=world),
        backbone=_section(BackboneConfig, data.get("backbone"), "backbone"),
        model=_section(ModelSection, data.get("model"), "model"),
        optimizer=_section(OptimizerSection, data.get("optimizer"), "optimizer"),
        evaluation=_section(EvaluationSection, data.get("evaluation"), "evaluation"),
        ablation=_section(AblationSection, data.get("ablation"), "ablation"),
        gradcheck=_section(GradcheckSection, gradcheck_values, "gradcheck", **({"checks": checks} if checks else {})),
        paths=_section(PathsSection, data.get("paths"), "paths"),
    )
    validate(config)
    return config


def validate(config: RunConfig) -> None:
    _positive(config.model, "model", "num_heads", "ffn_hidden", "num_classes", "model_dim")
    _positive(config.optimizer, "optimizer", "lr", "batch_size")
    _positive(config.evaluation, "evaluation", "eval_every")
    _positive(config.gradcheck, "gradcheck", "eps")
    if config.dataset.num_clips < 0:
        raise ConfigurationError(f"dataset.num_clips must be non-negative, got {config.dataset.num_clips}")
    if not 0.0 <= config.dataset.train_fraction <= 1.0:
        raise ConfigurationError(f"dataset.train_fraction must lie in [0, 1], got {config.dataset.train_fraction}")
    if config.optimizer.steps < 0:
        raise ConfigurationError(f"optimizer.steps must be non-negative, got {config.optimizer.steps}")
    if not 0.0 <= config.optimizer.momentum < 1.0:
        raise ConfigurationError(f"optimizer.momentum must lie in [0, 1), got {config.optimizer.momentum}")
    for key in ("proposal_threshold", "iou_threshold"):
        value = getattr(config.evaluation, key)
        if not 0.0 <= value <= 1.0:
            raise ConfigurationError(f"evaluation.{key} must lie in [0, 1], got {value}")
    if config.model.num_classes != len(CLASS_NAMES):
        raise ConfigurationError(
            f"model.num_classes is {config.model.num_classes} but the synthetic world labels {len(CLASS_NAMES)} classes"
        )
    world, backbone = config.dataset.world, config.backbone
    if world.frames % backbone.slow_stride or world.frames % backbone.fast_stride:
        raise ConfigurationError(
            f"{world.frames} frames are not divisible by strides {backbone.slow_stride}/{backbone.fast_stride}"
        )
    if world.image_size % backbone.grid_size:
        raise ConfigurationError(f"image size {world.image_size} is not divisible by grid size {backbone.grid_size}")
    dims = config.head_dims()
    if config.model.model_dim is not None and config.model.model_dim != dims.model_dim:
        raise ConfigurationError(
            f"model.model_dim {config.model.model_dim} must equal slow + fast channels ({dims.model_dim})"
        )
    for variant in (config.model.variant,) + tuple(config.ablation.variants):
        if variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant flag {variant!r}; expected one of {VARIANTS}")
    if not config.ablation.seeds:
        raise ConfigurationError("ablation.seeds must list at least one seed")
    for spec in config.gradcheck.checks:
        if spec.tolerance <= 0.0 or spec.linear_tolerance <= 0.0:
            raise ConfigurationError(f"check '{spec.name}' needs positive tolerances")


def ensure_writable(config: RunConfig) -> None:
    """Create output locations and fail early when they cannot be written."""
    paths = config.paths
    for directory in (Path(paths.data_dir), Path(paths.checkpoint).parent, Path(paths.report_dir)):
        directory.mkdir(parents=True, exist_ok=True)
        if not os.access(directory, os.W_OK):
            raise PermissionError(f"{directory} is not writable")


class ConfigLoader:
    """Loads and validates run plans from YAML."""

    def __init__(self, config_path: str):
        self.config_path = Path(config_path)
        if not self.config_path.exists():
            raise FileNotFoundError(f"Config file not found: {config_path}")

    def load(self) -> RunConfig:
        with open(self.config_path, "r") as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigurationError(f"{self.config_path}: {e}") from e
        return config_from_dict(data or {})
