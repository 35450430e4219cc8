"""Hand-crafted open-loop vertical jump controller for the counterweight rig.

A height-triggered phase machine: hold the crouch until the body estimate
drops below the trigger height, command a full leg extension for a fixed
duration, then a contraction (back to the crouch) during flight, identical
on all three legs. The PD layer tracks the commanded waypoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import RobotModel, clamp_to_rom

IDLE, EXTEND, CONTRACT = 0, 1, 2


@dataclass
class JumpTrajectory:
    crouch_q: np.ndarray        # (9,) crouch hold / contraction target
    extend_q: np.ndarray        # (9,) extension target
    trigger_height: float       # m, body height that fires the jump
    extend_duration: float      # s
    contract_duration: float    # s
    retrigger_delay: float = 0.0  # s in IDLE before the trigger may fire again
    ramp_waypoints: bool = False  # interpolate toward waypoints instead of stepping

    @classmethod
    def from_config(cls, cfg: dict, model: RobotModel) -> "JumpTrajectory":
        bc = cfg["baseline"]

        def pose(spec):
            q = np.tile([spec["haa"], spec["hfe"], spec["kfe"]], 3)
            return clamp_to_rom(model, np.deg2rad(q))

        traj = cls(
            crouch_q=pose(bc["crouch_pose_deg"]),
            extend_q=pose(bc["extend_pose_deg"]),
            trigger_height=float(bc["trigger_height_m"]),
            extend_duration=float(bc["extend_duration_s"]),
            contract_duration=float(bc["contract_duration_s"]),
            retrigger_delay=float(bc.get("retrigger_delay_s", 0.0)),
            ramp_waypoints=bool(bc.get("ramp_waypoints", False)),
        )
        # extension must actually extend the knees relative to the crouch
        knee = [2, 5, 8]
        if not np.all(np.abs(traj.extend_q[knee]) < np.abs(traj.crouch_q[knee])):
            raise ValueError("extension target must straighten the knees")
        return traj


class BaselineJumpController:
    """One controller per environment batch; fully deterministic."""

    def __init__(self, traj: JumpTrajectory, num_envs: int = 1):
        self.traj = traj
        self.n = num_envs
        self.phase = np.full(num_envs, IDLE, dtype=int)
        self.t_in_phase = np.zeros(num_envs)

    def reset(self):
        self.phase[:] = IDLE
        self.t_in_phase[:] = 0.0

    def step(self, height_estimate: np.ndarray, dt: float) -> np.ndarray:
        """Commanded joint targets for one control tick.

        Waypoints are reached by linear interpolation over each phase's
        duration, so the legs push in coordination with the body instead of
        sprinting ahead of it. A degraded height estimate holds its last
        value upstream, which freezes the phase machine - safe behavior.
        """
        tr = self.traj
        self.t_in_phase += dt

        fire = ((self.phase == IDLE) & (height_estimate < tr.trigger_height)
                & (self.t_in_phase >= tr.retrigger_delay))
        self.phase[fire] = EXTEND
        self.t_in_phase[fire] = 0.0

        to_contract = (self.phase == EXTEND) & (self.t_in_phase >= tr.extend_duration)
        self.phase[to_contract] = CONTRACT
        self.t_in_phase[to_contract] = 0.0

        to_idle = (self.phase == CONTRACT) & (self.t_in_phase >= tr.contract_duration)
        self.phase[to_idle] = IDLE
        self.t_in_phase[to_idle] = 0.0

        if tr.ramp_waypoints:
            frac_ext = np.clip(self.t_in_phase / max(tr.extend_duration, 1e-9), 0.0, 1.0)
            frac_con = np.clip(self.t_in_phase / max(tr.contract_duration, 1e-9), 0.0, 1.0)
        else:
            # step targets: the legs sprint ahead of the body and hand their
            # momentum over in the catch, which out-jumps a coordinated ramp
            # under the knee's small torque budget
            frac_ext = np.ones(self.n)
            frac_con = np.ones(self.n)
        q_des = np.where(
            (self.phase == EXTEND)[:, None],
            tr.crouch_q + frac_ext[:, None] * (tr.extend_q - tr.crouch_q),
            np.where(
                (self.phase == CONTRACT)[:, None],
                tr.extend_q + frac_con[:, None] * (tr.crouch_q - tr.extend_q),
                tr.crouch_q,
            ),
        )
        return q_des
