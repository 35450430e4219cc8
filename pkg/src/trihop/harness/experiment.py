"""Experiment orchestration: seeded evaluation episodes with per-episode CSV
logs and a metrics summary file."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..baseline import BaselineJumpController, JumpTrajectory
from ..config import config_hash
from ..envs import make_env
from ..envs.tasks import TaskKind
from ..learn.checkpoint import build_policy
from ..model import GEOM_FOOT
from .episode_log import SCHEMA_VERSION, EpisodeLogWriter
from .metrics import MetricsReport, episode_metrics, summarize


class IncompatibilityError(RuntimeError):
    """Checkpoint and task/environment do not fit together."""


class NoValidEpisodesError(RuntimeError):
    """Every episode diverged; the report would be empty."""


@dataclass
class ExperimentSpec:
    task: str
    controller: str                  # "baseline" or a checkpoint path
    episodes: int = 20
    seeds: list | None = None        # defaults to seed_base + range(episodes)
    seed_base: int = 1000
    out_dir: str | Path = "trihop_out/experiment"
    episode_seconds: float | None = None
    command_radius: float | None = None   # jump task override
    randomize: bool = False          # domain randomization during evaluation
    stochastic_policy: bool = False

    def resolve_seeds(self) -> list[int]:
        if self.episodes < 1:
            raise ValueError("episode count must be >= 1")
        seeds = self.seeds if self.seeds is not None else [
            self.seed_base + i for i in range(self.episodes)]
        if len(seeds) != self.episodes:
            raise ValueError("seed list length must equal the episode count")
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be unique")
        return list(seeds)


def _make_controller(spec: ExperimentSpec, cfg: dict, env):
    if spec.controller == "baseline":
        if env.task is not TaskKind.COUNTERWEIGHT_VERTICAL:
            raise IncompatibilityError(
                "the baseline controller only drives the counterweight task")
        traj = JumpTrajectory.from_config(cfg, env.model)
        ctrl = BaselineJumpController(traj, env.n)

        def act(obs):
            return ctrl.step(env.last_est_height, env.control_dt)

        return act

    policy, meta = build_policy(spec.controller)
    if meta.get("task") != env.task.value:
        raise IncompatibilityError(
            f"checkpoint was trained for task {meta.get('task')!r}, not {env.task.value!r}")
    if policy.obs_dim != env.obs_dim:
        raise IncompatibilityError(
            f"checkpoint observation dim {policy.obs_dim} != env {env.obs_dim}")

    import torch

    gen = torch.Generator().manual_seed(0)

    def act(obs):
        action, _, _ = policy.act(obs, deterministic=not spec.stochastic_policy,
                                  generator=gen)
        return action

    return act


def run_experiment(spec: ExperimentSpec, cfg: dict) -> MetricsReport:
    """Run the experiment; writes one episode CSV per seed plus metrics.json.

    Deterministic for a fixed seed list (single stream, one env per episode).
    """
    seeds = spec.resolve_seeds()
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)

    episodes = []
    log_paths = []
    for episode_idx, seed in enumerate(seeds):
        env_kwargs = {}
        if spec.task == "jump" and spec.command_radius is not None:
            env_kwargs["command_radius"] = spec.command_radius
        env = make_env(spec.task, cfg, num_envs=1, randomize=spec.randomize,
                       **env_kwargs)
        env.auto_reset = False
        controller = _make_controller(spec, cfg, env)
        obs = env.reset(seed=seed)

        if spec.episode_seconds is not None:
            env.max_steps = int(round(spec.episode_seconds / env.control_dt))

        writer = EpisodeLogWriter(
            out_dir / f"episode_{episode_idx:03d}.csv",
            {
                "task": env.task.value,
                "seed": seed,
                "config_hash": chash,
                "control_dt": env.control_dt,
                "schema_note": f"schema v{SCHEMA_VERSION}; row 0 is the reset state",
            },
        )
        foot_geoms = np.where(env.world.geom_kinds == GEOM_FOOT)[0]
        writer.append(_row(env, action=np.zeros(9), reward=0.0, done=False,
                           components=None, group_forces=None, foot_forces=None))
        diverged = False
        for _ in range(env.max_steps):
            action = controller(obs)
            obs, reward, done, info = env.step(action)
            comp = {k: v[0] for k, v in info["components"].items()}
            writer.append(_row(
                env, action=action[0] if action.ndim == 2 else action,
                reward=float(reward[0]), done=bool(done[0]), components=comp,
                group_forces=info["contact_forces"][0],
                foot_forces=info["geom_forces"][0][foot_geoms],
            ))
            if info["diverged"][0]:
                diverged = True
                break
            if done[0]:
                break
        log_paths.append(writer.write())

        from .episode_log import read_episode_log

        log = read_episode_log(log_paths[-1])
        episodes.append(episode_metrics(
            log, control_dt=env.control_dt,
            final_window_s=cfg["harness"]["final_window_s"],
            upright_deg=cfg["harness"]["upright_threshold_deg"],
            upright_hold_s=cfg["harness"]["upright_hold_s"],
            seed=seed, diverged=diverged))

    report = MetricsReport(
        task=spec.task, config_hash=chash, seeds=seeds, episodes=episodes,
        summary=summarize(episodes))
    if report.summary.get("valid_count", 0) == 0:
        report.write(out_dir / "metrics.json")
        raise NoValidEpisodesError(
            f"all {len(seeds)} episodes diverged; failure report written to {out_dir}")
    report.write(out_dir / "metrics.json")
    return report


def _row(env, *, action, reward, done, components, group_forces, foot_forces) -> dict:
    s = env.state
    row = {
        "t": s.t[0],
        "r_b_x": s.r_b[0, 0], "r_b_y": s.r_b[0, 1], "r_b_z": s.r_b[0, 2],
        "q_b_w": s.q_b[0, 0], "q_b_x": s.q_b[0, 1],
        "q_b_y": s.q_b[0, 2], "q_b_z": s.q_b[0, 3],
        "v_b_x": s.v_b[0, 0], "v_b_y": s.v_b[0, 1], "v_b_z": s.v_b[0, 2],
        "w_b_x": s.w_b[0, 0], "w_b_y": s.w_b[0, 1], "w_b_z": s.w_b[0, 2],
        "reward": reward,
        "done": float(done),
    }
    for i in range(9):
        row[f"q_{i}"] = s.q[0, i]
        row[f"qd_{i}"] = s.qd[0, i]
        row[f"action_{i}"] = action[i]
        row[f"tau_{i}"] = env.last_tau[0, i]
    if s.gimbal_q is not None:
        row["theta"] = s.gimbal_q[0, 0]
        row["phi"] = s.gimbal_q[0, 1]
    if getattr(env, "command", None) is not None:
        row["cmd_x"], row["cmd_y"], row["cmd_z"] = env.command[0]
    for i in range(3):
        row[f"lrf_{i}"] = env.last_lrf[0, i] if env.lrf is not None else float("nan")
    row["est_height"] = env.last_est_height[0]
    if group_forces is not None:
        row["contact_base"] = group_forces[0]
        for leg in range(3):
            row[f"contact_thigh_{leg}"] = group_forces[1 + 2 * leg]
            row[f"contact_shin_{leg}"] = group_forces[2 + 2 * leg]
        for leg in range(3):
            row[f"contact_foot_{leg}"] = foot_forces[leg]
    else:
        row["contact_base"] = 0.0
        for leg in range(3):
            row[f"contact_thigh_{leg}"] = 0.0
            row[f"contact_shin_{leg}"] = 0.0
            row[f"contact_foot_{leg}"] = 0.0
    if components is not None:
        for name, val in components.items():
            row[f"comp_{name}"] = val
    else:
        # reset row: state-dependent components reflect the initial state,
        # action/torque-dependent ones are zero by construction
        from ..rotations import rotation_angle

        for name in ("action_rate", "torques", "dof_vel", "dof_acc", "collision",
                     "dof_limits", "orientation_2d", "pos_cmd"):
            row[f"comp_{name}"] = 0.0
        row["comp_orientation_3d"] = float(rotation_angle(s.q_b)[0])
        row["comp_height"] = abs(float(s.r_b[0, 2]))
        if s.gimbal_q is not None:
            row["comp_orientation_2d"] = 7.0 - abs(row["theta"]) - abs(row["phi"])
    return row
