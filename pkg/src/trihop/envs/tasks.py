"""The four task environments: free-float attitude control, gimbal attitude
control, jump-to-target in Ceres gravity, and the counterweight vertical rig.

Environments are vectorized: every array carries a leading env axis, each
env owns its own randomized physical parameters, and episodes reset
independently. Policies run at the control rate (physics rate / decimation);
actions are position offsets around the default stance tracked by a PD loop.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..actuation import saturate_joint_torques
from ..config import config_hash
from ..dynamics import World, WorldMode
from ..model import RobotModel, build_robot_model, clamp_to_rom, default_pose
from ..rotations import random_unit_quaternion
from ..sensors import LrfArray, StateEstimator
from . import observations as obs_mod
from .randomize import DomainRandomization, sample_params
from .rewards import (
    FREE_FLOAT_COMPONENTS,
    GIMBAL_COMPONENTS,
    JUMP_COMPONENTS,
    collision_body_groups,
    compute_reward_components,
    total_reward,
)


class TaskKind(str, Enum):
    ATTITUDE_FREE_FLOAT = "free_float"
    ATTITUDE_GIMBAL = "gimbal"
    JUMP_CERES = "jump"
    COUNTERWEIGHT_VERTICAL = "counterweight"


def sample_command(rng: np.random.Generator, origin: np.ndarray, radius: float) -> np.ndarray:
    """Goal body position: uniform heading on a horizontal circle of the given
    radius around the origin position."""
    heading = rng.uniform(0.0, 2.0 * np.pi, size=origin.shape[0])
    offset = np.stack([np.cos(heading), np.sin(heading), np.zeros_like(heading)], axis=1)
    return origin + radius * offset


class VecTaskEnv:
    """Shared machinery: PD tracking, decimation, rewards, resets, logging."""

    task: TaskKind
    obs_dim: int
    act_dim = 9

    def __init__(self, cfg: dict, num_envs: int = 1, randomize: bool | None = None):
        self.cfg = cfg
        self.config_hash = config_hash(cfg)
        self.n = num_envs
        self.model = build_robot_model(cfg)
        self.world = World(self.model, self._mode(cfg), cfg, num_envs)
        tc = cfg["tasks"]
        self.decimation = int(tc["control_decimation"])
        self.control_dt = self.world.dt * self.decimation
        self.action_scale = float(tc["action_scale_rad"])
        self.max_steps = int(round(self._episode_length_s(cfg) / self.control_dt))
        self.dr = DomainRandomization.from_config(cfg)
        if randomize is not None and not randomize:
            self.dr = self.dr.disabled()
        self.kp0 = float(cfg["actuation"]["kp"])
        self.kd0 = float(cfg["actuation"]["kd"])
        self.kp = np.full((num_envs, 9), self.kp0)
        self.kd = np.full((num_envs, 9), self.kd0)
        self.default_q = default_pose(self.model)
        self.collision_groups, _ = collision_body_groups(self.world.geom_kinds)
        self.auto_reset = True
        self.rng = np.random.default_rng(0)

        self.state = None
        self.a_prev = np.zeros((num_envs, 9))
        self.last_action = np.zeros((num_envs, 9))
        self.last_tau = np.zeros((num_envs, 9))
        self.qd_prev = np.zeros((num_envs, 9))
        self.last_components = None
        self.ep_steps = np.zeros(num_envs, dtype=int)
        self.ep_return = np.zeros(num_envs)
        self.command = None

        self.lrf = None
        self.estimator = None
        if self.world.mode.ground:
            self.lrf = LrfArray(cfg, np.random.default_rng(0))
        self.last_lrf = np.full((num_envs, 3), np.nan)
        self.last_est_height = np.full(num_envs, np.nan)

    # hooks -----------------------------------------------------------------

    def _mode(self, cfg) -> WorldMode:
        raise NotImplementedError

    def _episode_length_s(self, cfg) -> float:
        raise NotImplementedError

    def _sample_initial(self, idx):
        raise NotImplementedError

    def _observe(self) -> np.ndarray:
        raise NotImplementedError

    def _task_components(self):
        raise NotImplementedError

    def _weights(self):
        raise NotImplementedError

    def _terminated(self) -> np.ndarray:
        return np.zeros(self.n, dtype=bool)

    # lifecycle ---------------------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
            if self.lrf is not None:
                self.lrf.rng = self.rng
        self.state = self.world.make_state()
        self._reset_idx(np.arange(self.n))
        return self._observe()

    def _apply_randomization(self, idx):
        masses, coms, inertias, friction, gains = sample_params(
            self.model, self.dr, self.rng, len(idx))
        self.world.set_model_params(idx, masses, coms, inertias, friction)
        self.kp[idx] = self.kp0 * gains
        self.kd[idx] = self.kd0 * gains

    def _reset_idx(self, idx):
        if len(idx) == 0:
            return
        self._apply_randomization(idx)
        self._sample_initial(idx)
        self.a_prev[idx] = 0.0
        self.last_action[idx] = 0.0
        self.last_tau[idx] = 0.0
        self.qd_prev[idx] = self.state.qd[idx]
        self.ep_steps[idx] = 0
        self.ep_return[idx] = 0.0

    def _action_to_target(self, actions: np.ndarray):
        a = np.clip(np.asarray(actions, dtype=float).reshape(self.n, 9), -1.0, 1.0)
        return a, clamp_to_rom(self.model, self.default_q + self.action_scale * a)

    def step(self, actions: np.ndarray):
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        a, q_des = self._action_to_target(actions)
        self.qd_prev = self.state.qd.copy()

        group_ids = self.collision_groups
        n_groups = group_ids.max() + 1
        max_group_force = np.zeros((self.n, n_groups))
        max_geom_force = np.zeros((self.n, self.world.n_geoms))
        diverged = np.zeros(self.n, dtype=bool)
        for _ in range(self.decimation):
            tau = self.kp * (q_des - self.state.q) - self.kd * self.state.qd
            tau = saturate_joint_torques(tau, self.model.torque_limits)
            tau = np.where(diverged[:, None], 0.0, tau)
            self.world.step(self.state, tau, raise_on_divergence=False)
            diverged |= self.state.diverged
            self._substep_hook()
            if self.world.mode.ground:
                agg = np.zeros((self.n, n_groups, 3))
                for g, grp in enumerate(group_ids):
                    if grp >= 0:
                        agg[:, grp] += self.state.contact_forces[:, g]
                np.maximum(max_group_force, np.linalg.norm(agg, axis=2), out=max_group_force)
                np.maximum(max_geom_force, np.linalg.norm(self.state.contact_forces, axis=2),
                           out=max_geom_force)
        self.last_tau = tau
        self._control_hook()

        qdd = (self.state.qd - self.qd_prev) / self.control_dt
        comp = self._components(a, qdd, max_group_force)
        reward = total_reward(comp, self._weights(), self._task_components())
        reward = np.where(diverged, 0.0, reward)
        self.last_components = comp

        self.ep_steps += 1
        self.ep_return += reward
        time_out = self.ep_steps >= self.max_steps
        terminated = self._terminated() | diverged
        done = time_out | terminated

        info = {
            "components": comp,
            "time_out": time_out & ~terminated,
            "diverged": diverged,
            "episode_return": self.ep_return.copy(),
            "episode_length": self.ep_steps.copy(),
            "contact_forces": max_group_force,
            "geom_forces": max_geom_force,
        }
        self.a_prev = a
        self.last_action = a

        if done.any() and self.auto_reset:
            info["terminal_observation"] = self._observe()
            self._reset_idx(np.where(done)[0])
        obs = self._observe()
        return obs, reward, done, info

    # helpers -----------------------------------------------------------------

    def _substep_hook(self):
        pass

    def _control_hook(self):
        if self.lrf is not None:
            reading = self.lrf.measure(self.state.r_b, self.state.q_b)
            self.last_lrf = reading.ranges

    def _components(self, a, qdd, max_group_force):
        comp = compute_reward_components(
            q_b=self._attitude_for_reward(),
            q=self.state.q,
            qd=self.state.qd,
            qdd=qdd,
            tau=self.last_tau,
            a_t=a,
            a_prev=self.a_prev,
            q_l=self.model.limits.q_l,
            q_u=self.model.limits.q_u,
            r_b=self.state.r_b,
            command=self.command,
            theta=self.state.gimbal_q[:, 0] if self.state.gimbal_q is not None else None,
            phi=self.state.gimbal_q[:, 1] if self.state.gimbal_q is not None else None,
            yaw_free=self.cfg["tasks"]["free_float"].get("yaw_free_orientation", False),
        )
        comp["collision"] = (
            max_group_force > 0.2).sum(axis=1).astype(float)
        return comp

    def _attitude_for_reward(self):
        return self.state.q_b


class FreeFloatAttitudeEnv(VecTaskEnv):
    """Zero-gravity reorientation from a random initial attitude to upright."""

    task = TaskKind.ATTITUDE_FREE_FLOAT
    obs_dim = obs_mod.FREE_FLOAT_DIM

    def _mode(self, cfg):
        return WorldMode.zero_g(ground=False)

    def _episode_length_s(self, cfg):
        return cfg["tasks"]["free_float"]["episode_length_s"]

    def _weights(self):
        return self.cfg["tasks"]["free_float"]["reward_weights"]

    def _task_components(self):
        return FREE_FLOAT_COMPONENTS

    def _sample_initial(self, idx):
        q_b = random_unit_quaternion(self.rng, len(idx))
        self.world.reset_rows(self.state, idx, q_b=q_b)

    def _observe(self):
        s = self.state
        return obs_mod.free_float_obs(s.q, s.qd, s.q_b, s.w_b, self.a_prev)


class GimbalAttitudeEnv(VecTaskEnv):
    """Reorientation inside the 2-DOF gimbal; terminates on self or ring
    collision. Observations use the mocap-simulated attitude unless the
    ground-truth flag is set."""

    task = TaskKind.ATTITUDE_GIMBAL
    obs_dim = obs_mod.GIMBAL_DIM

    def __init__(self, cfg, num_envs=1, randomize=None):
        super().__init__(cfg, num_envs, randomize)
        gc = cfg["tasks"]["gimbal"]
        self.ground_truth = bool(gc["ground_truth_attitude"])
        self.init_range = np.deg2rad(float(gc["init_angle_range_deg"]))
        self.estimator = StateEstimator(
            cfg, num_envs, self.rng, self.world.dt, np.zeros((3, 3)))
        self._est_attitude = np.tile([1.0, 0, 0, 0], (num_envs, 1))
        self._est_omega = np.zeros((num_envs, 3))

    def _mode(self, cfg):
        return WorldMode.gimbal_rig(cfg)

    def _episode_length_s(self, cfg):
        return cfg["tasks"]["gimbal"]["episode_length_s"]

    def _weights(self):
        return self.cfg["tasks"]["gimbal"]["reward_weights"]

    def _task_components(self):
        return GIMBAL_COMPONENTS

    def reset(self, seed=None):
        out = super().reset(seed)
        self.estimator.rng = self.rng
        return out

    def _sample_initial(self, idx):
        for attempt in range(20):
            gq = self.rng.uniform(-self.init_range, self.init_range, (len(idx), 2))
            self.world.reset_rows(self.state, idx, gimbal_q=gq)
            colliding = self.world.self_collision(self.state)[idx]
            if not colliding.any():
                break
        else:
            raise RuntimeError("could not sample a collision-free gimbal start")
        self._est_attitude[idx] = self.state.q_b[idx]
        self._est_omega[idx] = self.state.w_b[idx]

    def _substep_hook(self):
        if self.ground_truth:
            return
        from ..sensors import LrfReading

        empty = LrfReading(
            ranges=np.full((self.n, 3), np.nan), valid=np.zeros((self.n, 3), dtype=bool))
        est = self.estimator.update(empty, self.state.q_b, self.state.w_b)
        self._est_attitude = est.attitude
        self._est_omega = est.angular_velocity

    def _terminated(self):
        return self.world.self_collision(self.state)

    def _observe(self):
        s = self.state
        if self.ground_truth:
            return obs_mod.gimbal_obs(s.q, s.q_b, s.w_b, self.a_prev)
        return obs_mod.gimbal_obs(s.q, self._est_attitude, self._est_omega, self.a_prev)


class JumpCeresEnv(VecTaskEnv):
    """Jump to a commanded position on a horizontal circle, reorient, and
    land on the feet, all under Ceres gravity."""

    task = TaskKind.JUMP_CERES
    obs_dim = obs_mod.JUMP_DIM

    def __init__(self, cfg, num_envs=1, randomize=None, command_radius=None):
        super().__init__(cfg, num_envs, randomize)
        jc = cfg["tasks"]["jump"]
        self.command_radius = float(
            jc["command_radius_m"] if command_radius is None else command_radius)
        self.stand_z = self._standing_height()
        self.command = np.zeros((num_envs, 3))
        self.start_pos = np.zeros((num_envs, 3))

    def _standing_height(self):
        """Base height that puts the feet at the static equilibrium
        penetration of the contact spring."""
        from ..model import GEOM_FOOT

        probe = self.world.make_state(r_b=np.array([0.0, 0.0, 0.0]))
        per_geom, forces, x, active = self.world.compute_contacts(probe)
        foot_mask = self.world.geom_kinds[self.world.pt_geom] == GEOM_FOOT
        foot_bottom = (x[0, :, 2] - self.world.pt_radius)[foot_mask].min()
        settle = self.model.total_mass * self.world.mode.g / (
            3.0 * self.world.contact_kp)
        return -foot_bottom - settle

    def _mode(self, cfg):
        return WorldMode.ceres(ground=True)

    def _episode_length_s(self, cfg):
        return cfg["tasks"]["jump"]["episode_length_s"]

    def _weights(self):
        return self.cfg["tasks"]["jump"]["reward_weights"]

    def _task_components(self):
        return JUMP_COMPONENTS

    def _sample_initial(self, idx):
        r_b = np.zeros((len(idx), 3))
        r_b[:, 2] = self.stand_z
        self.world.reset_rows(self.state, idx, r_b=r_b)
        self.start_pos[idx] = r_b
        self.command[idx] = sample_command(self.rng, r_b, self.command_radius)

    def _observe(self):
        s = self.state
        return obs_mod.jump_obs(
            s.q, s.qd, s.r_b, self.command, s.v_b, s.q_b, s.w_b, self.a_prev)


class CounterweightEnv(VecTaskEnv):
    """Vertical jumping rig: Earth gravity with the rope offload. Actions are
    absolute joint targets (the open-loop baseline commands poses directly);
    there is no learned reward, so the weight vector is zero."""

    task = TaskKind.COUNTERWEIGHT_VERTICAL
    obs_dim = obs_mod.FREE_FLOAT_DIM

    def __init__(self, cfg, num_envs=1, randomize=False):
        super().__init__(cfg, num_envs, randomize=randomize)
        bc = cfg["baseline"]

        def per_joint(spec):
            if isinstance(spec, dict):
                return np.tile([spec["haa"], spec["hfe"], spec["kfe"]], 3)
            return np.full(9, float(spec))

        self.kp = np.tile(per_joint(bc["kp"]), (num_envs, 1))
        self.kd = np.tile(per_joint(bc["kd"]), (num_envs, 1))
        self.estimator = StateEstimator(
            cfg, num_envs, self.rng, self.world.dt * self.decimation, self.lrf.mounts)
        self.stand_z = JumpCeresEnv._standing_height(self)

    def _mode(self, cfg):
        return WorldMode.counterweight_rig(cfg)

    def _episode_length_s(self, cfg):
        return 40.0

    def _weights(self):
        return np.zeros(len(FREE_FLOAT_COMPONENTS))

    def _task_components(self):
        return FREE_FLOAT_COMPONENTS

    def reset(self, seed=None):
        out = super().reset(seed)
        self.estimator.rng = self.rng
        self.estimator.reset(self.stand_z)
        self.last_est_height = np.full(self.n, self.stand_z)
        return out

    def _sample_initial(self, idx):
        r_b = np.zeros((len(idx), 3))
        r_b[:, 2] = self.stand_z
        self.world.reset_rows(self.state, idx, r_b=r_b)

    def _action_to_target(self, actions: np.ndarray):
        """Counterweight actions are absolute joint targets in radians."""
        q_des = clamp_to_rom(self.model, np.asarray(actions, dtype=float).reshape(self.n, 9))
        a = np.clip((q_des - self.default_q) / self.action_scale, -1.0, 1.0)
        return a, q_des

    def _control_hook(self):
        super()._control_hook()
        if self.lrf is not None:
            from .. import sensors

            reading = sensors.LrfReading(
                ranges=self.last_lrf,
                valid=np.isfinite(self.last_lrf),
            )
            est = self.estimator.update(reading, self.state.q_b, self.state.w_b)
            self.last_est_height = est.height

    def _observe(self):
        s = self.state
        return obs_mod.free_float_obs(s.q, s.qd, s.q_b, s.w_b, self.a_prev)


TASK_ENVS = {
    TaskKind.ATTITUDE_FREE_FLOAT: FreeFloatAttitudeEnv,
    TaskKind.ATTITUDE_GIMBAL: GimbalAttitudeEnv,
    TaskKind.JUMP_CERES: JumpCeresEnv,
    TaskKind.COUNTERWEIGHT_VERTICAL: CounterweightEnv,
}


def make_env(task: TaskKind | str, cfg: dict, num_envs: int = 1, **kwargs) -> VecTaskEnv:
    task = TaskKind(task)
    return TASK_ENVS[task](cfg, num_envs, **kwargs)
