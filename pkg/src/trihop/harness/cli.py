"""Command-line interface: train, eval, run-baseline, replay,
inspect-checkpoint.

Exit codes: 0 success, 2 configuration error, 3 simulation divergence or an
experiment with no valid episodes, 4 checkpoint/task incompatibility.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from ..config import ConfigError, load_config
from ..dynamics import SimulationDiverged
from ..learn.checkpoint import CheckpointError
from .experiment import ExperimentSpec, IncompatibilityError, NoValidEpisodesError, run_experiment

EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_INCOMPATIBLE = 4

TASKS = ["free_float", "gimbal", "jump", "counterweight"]


def _out_root() -> Path:
    return Path(os.environ.get("TRIHOP_OUT", "trihop_out"))


def _load_cfg(config, overrides):
    try:
        return load_config(config, overrides)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
def main():
    """Hopper simulation, training, and experiment tooling."""


@main.command()
@click.option("--task", type=click.Choice(TASKS[:3]), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--iterations", type=int, default=300, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="output directory")
@click.option("--desk/--paper", default=False,
              help="desk-scale [128, 64] network instead of [512, 256, 128]")
@click.option("--num-envs", type=int, default=None)
@click.option("--checkpoint-every", type=int, default=0)
@click.option("--torch-threads", type=int, default=1, show_default=True)
@click.option("--command-radius", type=float, default=None,
              help="jump task: goal circle radius in meters")
@click.option("--set", "overrides", multiple=True,
              help="config override, e.g. --set actuation.kp=4.0")
def train(task, config, seed, iterations, out, desk, num_envs, checkpoint_every,
          torch_threads, command_radius, overrides):
    """Train a PPO policy for a task."""
    from ..learn.ppo import train as train_fn

    cfg = _load_cfg(config, overrides)
    out = Path(out) if out else _out_root() / f"train_{task}_seed{seed}"
    env_kwargs = {}
    if task == "jump" and command_radius is not None:
        env_kwargs["command_radius"] = command_radius
    try:
        result = train_fn(task, cfg, seed=seed, out_dir=out, iterations=iterations,
                          desk=desk, num_envs=num_envs,
                          checkpoint_every=checkpoint_every,
                          torch_threads=torch_threads, env_kwargs=env_kwargs)
    except SimulationDiverged as exc:
        click.echo(f"simulation diverged during training: {exc}", err=True)
        sys.exit(EXIT_DIVERGED)
    click.echo(json.dumps(result, indent=2))


@main.command("eval")
@click.option("--task", type=click.Choice(TASKS[:3]), required=True)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--episodes", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=1000, show_default=True,
              help="base seed; episode i uses seed+i")
@click.option("--out", type=click.Path(), default=None)
@click.option("--command-radius", type=float, default=None)
@click.option("--episode-seconds", type=float, default=None)
@click.option("--randomize/--no-randomize", default=False,
              help="apply domain randomization during evaluation")
@click.option("--set", "overrides", multiple=True)
def eval_cmd(task, checkpoint, config, episodes, seed, out, command_radius,
             episode_seconds, randomize, overrides):
    """Evaluate a checkpoint over seeded episodes; writes CSV logs + metrics."""
    cfg = _load_cfg(config, overrides)
    out = Path(out) if out else _out_root() / f"eval_{task}"
    spec = ExperimentSpec(
        task=task, controller=checkpoint, episodes=episodes, seed_base=seed,
        out_dir=out, command_radius=command_radius,
        episode_seconds=episode_seconds, randomize=randomize)
    _run_and_report(spec, cfg)


@main.command("run-baseline")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--episodes", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=1000, show_default=True)
@click.option("--seconds", type=float, default=30.0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.option("--set", "overrides", multiple=True)
def run_baseline(config, episodes, seed, seconds, out, overrides):
    """Run the open-loop counterweight jump controller."""
    cfg = _load_cfg(config, overrides)
    out = Path(out) if out else _out_root() / "baseline"
    spec = ExperimentSpec(
        task="counterweight", controller="baseline", episodes=episodes,
        seed_base=seed, out_dir=out, episode_seconds=seconds)
    _run_and_report(spec, cfg)


def _run_and_report(spec, cfg):
    try:
        report = run_experiment(spec, cfg)
    except NoValidEpisodesError as exc:
        click.echo(f"experiment failed: {exc}", err=True)
        sys.exit(EXIT_DIVERGED)
    except IncompatibilityError as exc:
        click.echo(f"incompatible checkpoint: {exc}", err=True)
        sys.exit(EXIT_INCOMPATIBLE)
    except CheckpointError as exc:
        click.echo(f"bad checkpoint: {exc}", err=True)
        sys.exit(EXIT_INCOMPATIBLE)
    click.echo(json.dumps(report.summary, indent=2))
    click.echo(f"wrote {spec.out_dir}/metrics.json")


@main.command()
@click.option("--log", type=click.Path(exists=True), required=True)
@click.option("--verify-rewards/--no-verify-rewards", default=False,
              help="recompute step rewards from logged state and compare")
def replay(log, verify_rewards):
    """Re-emit a logged trajectory; optionally verify logged rewards."""
    from .episode_log import read_episode_log
    from .replay_check import recompute_rewards

    try:
        parsed = read_episode_log(log)
    except Exception as exc:
        click.echo(f"cannot replay: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"# replaying {log}: {parsed.rows.shape[0]} rows, "
               f"task={parsed.meta.get('task')}, seed={parsed.meta.get('seed')}")
    if verify_rewards:
        cfg = _load_cfg(None, ())
        err = recompute_rewards(parsed, cfg)
        click.echo(f"max |reward - recomputed| = {err:.3e}")
        if err > 1e-9:
            click.echo("reward mismatch beyond 1e-9", err=True)
            sys.exit(1)
    else:
        for t, row in zip(parsed.column("t"), parsed.rows):
            click.echo(",".join(repr(v) for v in row))


@main.command("inspect-checkpoint")
@click.argument("path", type=click.Path(exists=True))
def inspect_checkpoint(path):
    """Print checkpoint metadata and tensor shapes."""
    from ..learn.checkpoint import load_checkpoint

    try:
        tensors, meta = load_checkpoint(path)
    except CheckpointError as exc:
        click.echo(f"bad checkpoint: {exc}", err=True)
        sys.exit(EXIT_INCOMPATIBLE)
    click.echo(json.dumps(meta, indent=2))
    total = 0
    for name in sorted(tensors):
        shape = tensors[name].shape
        count = int(np.prod(shape)) if shape else 1
        total += count
        click.echo(f"  {name}: {list(shape)} ({count} params)")
    click.echo(f"total parameters: {total}")


if __name__ == "__main__":
    main()
