#!/usr/bin/env python3
"""
stcx CLI entry point.
Generates the synthetic world, trains and evaluates context heads, runs the
wiring ablation and the gradient-check suite.
"""

import functools
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Callable, Optional

import click

from core.errors import GradientCheckError, StcxError, TrainingDivergenceError
from runner.ablation import AblationRunner
from runner.check_orchestrator import CheckOrchestrator
from runner.checkpoint import Checkpoint, load_checkpoint, restore_params, save_checkpoint
from runner.config_loader import ConfigLoader, RunConfig, ensure_writable
from runner.dataset_store import DatasetStore
from runner.evaluation_runner import EvaluationRunner
from runner.feature_cache import FeatureCache
from runner.reporting import format_ablation_report, write_json, write_training_log
from runner.trainer import Trainer
from simulators.backbone_simulator import create_backbone

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class NumericalFailure(Exception):
    """A run finished but its numbers did not pass."""


def setup_logging(run_name: str, output_dir: Path) -> logging.Logger:
    """Configure structured logging for one invocation."""
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_file = output_dir / f"{run_name}_{timestamp}.log"

    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s [%(levelname)s] %(name)s: %(message)s',
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler(sys.stdout)
        ],
        force=True,
    )

    logger = logging.getLogger("stcx")
    logger.info(f"Logging to {log_file}")
    return logger


def _prepare(config_path: str, command_name: str, seed: Optional[int], checkpoint: Optional[str],
             out: Optional[str]) -> RunConfig:
    # generate writes a dataset, every other command writes reports
    target = {"data_dir": out} if command_name == "generate" else {"report_dir": out}
    config = ConfigLoader(config_path).load().with_overrides(seed=seed, checkpoint=checkpoint, **target)
    ensure_writable(config)
    return config


def command(func: Callable) -> Callable:
    """Shared options plus the exception-to-exit-code mapping."""

    @click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False), help='Run plan YAML')
    @click.option('--checkpoint', default=None, help='Checkpoint path (overrides paths.checkpoint)')
    @click.option('--out', default=None, help='Output directory (overrides the plan\'s output location)')
    @click.option('--seed', default=None, type=int, help='Run seed (overrides run.seed)')
    @functools.wraps(func)
    def wrapper(config_path: str, checkpoint: Optional[str], out: Optional[str], seed: Optional[int]):
        logger = logging.getLogger("stcx")
        try:
            config = _prepare(config_path, func.__name__, seed, checkpoint, out)
            logger = setup_logging(f"{config.run.name}_{func.__name__}", Path(config.paths.report_dir))
            func(config, logger)
        except (TrainingDivergenceError, GradientCheckError, NumericalFailure) as e:
            logger.error(f"✗ numerical failure: {e}")
            sys.exit(EXIT_NUMERICAL)
        except StcxError as e:
            logger.error(f"✗ {type(e).__name__}: {e}")
            sys.exit(EXIT_INVALID)
        except OSError as e:
            logger.error(f"✗ I/O error: {e}")
            sys.exit(EXIT_IO)
        except Exception as e:
            logger.exception(f"Run failed with exception: {e}")
            sys.exit(EXIT_INVALID)
        sys.exit(EXIT_OK)

    return wrapper


def _cache(config: RunConfig) -> FeatureCache:
    backbone = create_backbone(config.backbone, config.dataset.world.image_size)
    return FeatureCache(backbone, config.evaluation.proposal_threshold)


@click.group()
def cli():
    """stcx - spatio-temporal context head for actor-centric action detection."""
    pass


@cli.command()
@command
def generate(config: RunConfig, logger: logging.Logger):
    """Write the synthetic give/receive dataset (--out overrides the data directory)."""
    ds = config.dataset
    manifest = DatasetStore(config.paths.data_dir).generate(ds.num_clips, config.run.seed, ds.split, ds.world)
    logger.info(f"✓ {len(manifest)} clips written to {config.paths.data_dir}")


@cli.command()
@command
def train(config: RunConfig, logger: logging.Logger):
    """Train the configured head variant and write a checkpoint."""
    store = DatasetStore(config.paths.data_dir)
    train_clips, val_clips = store.load("train"), store.load("val")
    result = Trainer(config, _cache(config)).fit(train_clips, val_clips)

    save_checkpoint(config.paths.checkpoint, Checkpoint.capture(config, result.params, result.velocities, result.steps))
    report_dir = Path(config.paths.report_dir)
    write_training_log(report_dir / f"{config.run.name}_training_log.csv", result.log)
    write_json(report_dir / f"{config.run.name}_train_summary.json", {
        "run": config.run.name,
        "variant": config.model.variant,
        "seed": config.run.seed,
        "steps": result.steps,
        "initial_loss": result.initial_loss,
        "final_loss": result.final_loss,
        "checkpoint": config.paths.checkpoint,
    })
    logger.info(f"✓ trained {result.steps} steps, checkpoint {config.paths.checkpoint}")


@cli.command(name="eval")
@command
def evaluate(config: RunConfig, logger: logging.Logger):
    """Evaluate a checkpoint on the validation split."""
    ckpt = load_checkpoint(config.paths.checkpoint)
    params = restore_params(ckpt, config)
    clips = DatasetStore(config.paths.data_dir).load("val")
    outcome = EvaluationRunner(config, _cache(config)).run(params, clips, Path(config.paths.report_dir))
    click.echo(outcome.result.to_report(), nl=False)
    logger.info(f"✓ mAP {100.0 * outcome.result.mean_ap:.2f}")


@cli.command()
@command
def ablate(config: RunConfig, logger: logging.Logger):
    """Train and evaluate every head wiring over the plan's seeds."""
    store = DatasetStore(config.paths.data_dir)
    train_clips, val_clips = store.load("train"), store.load("val")
    table = AblationRunner(config, _cache(config)).run(train_clips, val_clips, Path(config.paths.report_dir))
    click.echo(format_ablation_report(table), nl=False)
    logger.info(f"✓ ablation over {len(table)} variants")


@cli.command()
@command
def gradcheck(config: RunConfig, logger: logging.Logger):
    """Run the plan's gradient checks; exits 2 when any check fails."""
    results = CheckOrchestrator(config.run.name, config.gradcheck, Path(config.paths.report_dir)).run()
    for check in results['checks']:
        click.echo(f"{check['name']}: {check['status']} (max error {check.get('max_error', float('nan')):.3e})")
    if results['overall_status'] != 'PASS':
        summary = results.get('failure_summary', {})
        logger.error(f"  Component: {summary.get('component')}")
        logger.error(f"  Root cause: {summary.get('root_cause')}")
        raise NumericalFailure(f"gradient check plan {config.run.name} failed")
    logger.info("✓ gradient checks passed")


if __name__ == '__main__':
    cli()
