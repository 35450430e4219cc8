"""Recompute step rewards from logged rows (replay verification)."""

from __future__ import annotations

import numpy as np

from ..envs.rewards import (
    COLLISION_FORCE_THRESHOLD,
    FREE_FLOAT_COMPONENTS,
    GIMBAL_COMPONENTS,
    JUMP_COMPONENTS,
    compute_reward_components,
    total_reward,
)
from ..model import build_robot_model
from .episode_log import EpisodeLog

_TASK_TABLE = {
    "free_float": ("free_float", FREE_FLOAT_COMPONENTS),
    "gimbal": ("gimbal", GIMBAL_COMPONENTS),
    "jump": ("jump", JUMP_COMPONENTS),
    "counterweight": (None, FREE_FLOAT_COMPONENTS),
}


def recompute_rewards(log: EpisodeLog, cfg: dict) -> float:
    """Max abs difference between logged rewards and rewards recomputed from
    the logged state/action/torque columns."""
    task = log.meta.get("task")
    cfg_key, components = _TASK_TABLE[task]
    weights = (np.zeros(len(components)) if cfg_key is None
               else np.asarray(cfg["tasks"][cfg_key]["reward_weights"]))
    model = build_robot_model(cfg)
    control_dt = float(log.meta["control_dt"])

    rows = log.rows
    n = rows.shape[0]
    if n < 2:
        return 0.0
    q_b = log.columns(["q_b_w", "q_b_x", "q_b_y", "q_b_z"])
    q = log.columns([f"q_{i}" for i in range(9)])
    qd = log.columns([f"qd_{i}" for i in range(9)])
    tau = log.columns([f"tau_{i}" for i in range(9)])
    action = log.columns([f"action_{i}" for i in range(9)])
    r_b = log.columns(["r_b_x", "r_b_y", "r_b_z"])
    theta = log.column("theta")
    phi = log.column("phi")
    cmd = log.columns(["cmd_x", "cmd_y", "cmd_z"])
    groups = log.columns(
        ["contact_base"] + [f"contact_{part}_{leg}" for leg in range(3)
                            for part in ("thigh", "shin")])
    qdd = np.zeros_like(qd)
    qdd[1:] = (qd[1:] - qd[:-1]) / control_dt

    comp = compute_reward_components(
        q_b=q_b[1:],
        q=q[1:],
        qd=qd[1:],
        qdd=qdd[1:],
        tau=tau[1:],
        a_t=action[1:],
        a_prev=action[:-1],
        q_l=model.limits.q_l,
        q_u=model.limits.q_u,
        r_b=r_b[1:],
        command=cmd[1:] if not np.all(np.isnan(cmd)) else None,
        theta=theta[1:] if not np.all(np.isnan(theta)) else None,
        phi=phi[1:] if not np.all(np.isnan(phi)) else None,
        yaw_free=cfg["tasks"]["free_float"].get("yaw_free_orientation", False),
    )
    comp["collision"] = (groups[1:] > COLLISION_FORCE_THRESHOLD).sum(axis=1).astype(float)
    recomputed = total_reward(comp, weights, components)
    return float(np.abs(recomputed - log.column("reward")[1:]).max())
