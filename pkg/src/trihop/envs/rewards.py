"""Reward components and task weight vectors.

The ten step-reward components (all (n,) arrays):

    orientation_3d = ||rot_vec(q_b)||            smallest-angle deviation from upright
    orientation_2d = 7 - (|theta| + |phi|)       gimbal ring angles, radians
    action_rate    = ||a_t - a_{t-1}||
    torques        = ||tau||^2
    dof_vel        = ||qd||
    dof_acc        = ||qdd||
    collision      = #bodies with ||f_j|| > 0.2  (body/thigh/shin, feet excluded)
    height         = |r_b,z|
    pos_cmd        = 1 - ||r_b - r*|| / ||r*||
    dof_limits     = ||relu(q_l - q)||_1 + ||relu(q - q_u)||_1
"""

from __future__ import annotations

import numpy as np

from ..model import GEOM_BASE, GEOM_FOOT, GEOM_SHIN, GEOM_THIGH
from ..rotations import quat_to_rotation_vector, quat_yaw_removed

COLLISION_FORCE_THRESHOLD = 0.2  # N

FREE_FLOAT_COMPONENTS = ("orientation_3d", "action_rate", "torques", "dof_limits")
GIMBAL_COMPONENTS = (
    "orientation_2d", "action_rate", "torques", "dof_limits", "dof_acc", "dof_vel")
JUMP_COMPONENTS = (
    "pos_cmd", "orientation_3d", "action_rate", "torques", "collision", "height")

COMPONENT_NAMES = (
    "orientation_3d", "orientation_2d", "action_rate", "torques", "dof_vel",
    "dof_acc", "collision", "height", "pos_cmd", "dof_limits",
)


def collision_body_groups(geom_kinds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map collision geoms onto reward bodies: the base (all its spheres),
    each thigh, and each shin; feet never count."""
    groups = np.full(len(geom_kinds), -1, dtype=int)
    next_id = 0
    base_id = None
    leg_counters = {}
    for i, kind in enumerate(geom_kinds):
        if kind == GEOM_BASE:
            if base_id is None:
                base_id = next_id
                next_id += 1
            groups[i] = base_id
        elif kind in (GEOM_THIGH, GEOM_SHIN):
            groups[i] = next_id
            next_id += 1
        elif kind == GEOM_FOOT:
            groups[i] = -1
    return groups, np.arange(next_id)


def count_collisions(contact_forces_geom: np.ndarray, groups: np.ndarray) -> np.ndarray:
    """Number of non-foot bodies whose aggregated contact force exceeds the
    threshold, per env."""
    n, G, _ = contact_forces_geom.shape
    n_groups = groups.max() + 1
    agg = np.zeros((n, n_groups, 3))
    for g, grp in enumerate(groups):
        if grp >= 0:
            agg[:, grp] += contact_forces_geom[:, g]
    mags = np.linalg.norm(agg, axis=2)
    return (mags > COLLISION_FORCE_THRESHOLD).sum(axis=1).astype(float)


def compute_reward_components(
    *,
    q_b: np.ndarray,
    q: np.ndarray,
    qd: np.ndarray,
    qdd: np.ndarray,
    tau: np.ndarray,
    a_t: np.ndarray,
    a_prev: np.ndarray,
    q_l: np.ndarray,
    q_u: np.ndarray,
    r_b: np.ndarray | None = None,
    command: np.ndarray | None = None,
    contact_forces_geom: np.ndarray | None = None,
    collision_groups: np.ndarray | None = None,
    theta: np.ndarray | None = None,
    phi: np.ndarray | None = None,
    yaw_free: bool = False,
) -> dict[str, np.ndarray]:
    """All ten components; entries whose inputs are absent are zero."""
    n = q.shape[0]
    zeros = np.zeros(n)
    rv = quat_to_rotation_vector(quat_yaw_removed(q_b) if yaw_free else q_b)
    comp = {
        "orientation_3d": np.linalg.norm(rv, axis=1),
        "orientation_2d": 7.0 - (np.abs(theta) + np.abs(phi)) if theta is not None else zeros.copy(),
        "action_rate": np.linalg.norm(a_t - a_prev, axis=1),
        "torques": np.sum(tau**2, axis=1),
        "dof_vel": np.linalg.norm(qd, axis=1),
        "dof_acc": np.linalg.norm(qdd, axis=1),
        "height": np.abs(r_b[:, 2]) if r_b is not None else zeros.copy(),
        "dof_limits": (
            np.maximum(0.0, q_l - q).sum(axis=1) + np.maximum(0.0, q - q_u).sum(axis=1)
        ),
    }
    if command is not None and r_b is not None:
        cmd_norm = np.linalg.norm(command, axis=1)
        comp["pos_cmd"] = 1.0 - np.linalg.norm(r_b - command, axis=1) / cmd_norm
    else:
        comp["pos_cmd"] = zeros.copy()
    if contact_forces_geom is not None and collision_groups is not None:
        comp["collision"] = count_collisions(contact_forces_geom, collision_groups)
    else:
        comp["collision"] = zeros.copy()
    return comp


def total_reward(components: dict[str, np.ndarray], weights, task_components) -> np.ndarray:
    """Weighted sum over the task's component list."""
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(task_components):
        raise ValueError(
            f"{len(task_components)} components but {len(weights)} weights")
    out = np.zeros_like(components[task_components[0]])
    for w, name in zip(weights, task_components):
        out = out + w * components[name]
    return out
