"""Simulation state containers and world-mode descriptors.

All state arrays carry a leading environment axis; a single simulation is the
n=1 case. `SimState` is mutated in place by the dynamics engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CERES_G = 0.029 * 9.81  # 0.28449 m/s^2
EARTH_G = 9.81


class SimulationDiverged(RuntimeError):
    """Instability sentinel: some state magnitude exceeded 1e6."""


@dataclass
class GimbalParams:
    outer_axis: np.ndarray        # world, horizontal
    ring_mass: float
    inner_ring_radius: float
    outer_ring_radius: float
    ring_tube_radius: float
    joint_friction: float         # N*m*s/rad viscous on both ring joints
    imbalance_offset: float       # body COM below the pivot, m
    pivot_height: float

    @classmethod
    def from_config(cls, cfg: dict) -> "GimbalParams":
        g = cfg["world"]["gimbal"]
        axis = np.asarray(g["outer_axis"], dtype=float)
        axis = axis / np.linalg.norm(axis)
        if abs(axis[2]) > 1e-9:
            raise ValueError("gimbal outer axis must be horizontal")
        if g["ring_mass_kg"] <= 0:
            raise ValueError("ring mass must be positive")
        return cls(
            outer_axis=axis,
            ring_mass=g["ring_mass_kg"],
            inner_ring_radius=g["inner_ring_radius_m"],
            outer_ring_radius=g["outer_ring_radius_m"],
            ring_tube_radius=g["ring_tube_radius_m"],
            joint_friction=g["joint_friction"],
            imbalance_offset=g["imbalance_offset_m"],
            pivot_height=g["pivot_height_m"],
        )


@dataclass
class CounterweightParams:
    mass: float
    effective_gravity: float | None  # None -> physical rope model (tension m_cw * g)
    rope_slack_model: bool
    start_height: float

    @classmethod
    def from_config(cls, cfg: dict) -> "CounterweightParams":
        c = cfg["world"]["counterweight"]
        eff = c["effective_gravity_override_mps2"]
        if eff is not None and not (0.0 < eff < EARTH_G):
            raise ValueError("effective gravity must lie in (0, 9.81)")
        return cls(
            mass=c["mass_kg"],
            effective_gravity=eff,
            rope_slack_model=c["rope_slack_model"],
            start_height=c["counterweight_start_height_m"],
        )


@dataclass
class WorldMode:
    """World variant: gravity, ground plane, and rig parameters."""

    kind: str                     # zero_g | uniform | gimbal | counterweight
    g: float = 0.0
    ground: bool = False
    gimbal: GimbalParams | None = None
    counterweight: CounterweightParams | None = None

    @classmethod
    def zero_g(cls, ground: bool = False) -> "WorldMode":
        return cls(kind="zero_g", g=0.0, ground=ground)

    @classmethod
    def uniform(cls, g: float, ground: bool = True) -> "WorldMode":
        return cls(kind="uniform", g=g, ground=ground)

    @classmethod
    def ceres(cls, ground: bool = True) -> "WorldMode":
        return cls.uniform(CERES_G, ground=ground)

    @classmethod
    def gimbal_rig(cls, cfg: dict) -> "WorldMode":
        return cls(kind="gimbal", g=EARTH_G, ground=False, gimbal=GimbalParams.from_config(cfg))

    @classmethod
    def counterweight_rig(cls, cfg: dict) -> "WorldMode":
        return cls(
            kind="counterweight", g=EARTH_G, ground=True,
            counterweight=CounterweightParams.from_config(cfg),
        )

    @property
    def free_base(self) -> bool:
        return self.kind != "gimbal"


@dataclass
class ContactPoint:
    body: int                 # body index carrying the contact
    geom_kind: int            # model.GEOM_* classification
    position: np.ndarray      # world
    normal_force: float       # N, along +z
    tangential_force: np.ndarray  # world xy plane
    force_magnitude: float    # ||f||_2 of the full contact force


@dataclass
class SimState:
    """Batched simulation state; all arrays share the leading env axis."""

    r_b: np.ndarray               # (n, 3) base position
    q_b: np.ndarray               # (n, 4) base orientation, unit (w, x, y, z)
    v_b: np.ndarray               # (n, 3) base linear velocity (derived in free modes)
    w_b: np.ndarray               # (n, 3) base angular velocity, world frame
    q: np.ndarray                 # (n, 9) joint positions
    qd: np.ndarray                # (n, 9) joint velocities
    t: np.ndarray                 # (n,) time
    p6: np.ndarray | None = None  # (n, 6) total (linear, angular-about-origin) momentum
    gimbal_q: np.ndarray | None = None    # (n, 2) [theta, phi] when in gimbal mode
    gimbal_qd: np.ndarray | None = None
    cw_height: np.ndarray | None = None   # virtual counterweight height
    cw_vel: np.ndarray | None = None
    cw_taut: np.ndarray | None = None     # (n,) bool
    rope_sum: np.ndarray | None = None    # attachment z + counterweight z while taut
    contact_forces: np.ndarray | None = None  # (n, n_geoms, 3) per-geom world force
    diverged: np.ndarray | None = None    # (n,) instability flags (non-raising mode)

    @property
    def num_envs(self) -> int:
        return self.r_b.shape[0]

    def copy(self) -> "SimState":
        fields = {}
        for name, val in vars(self).items():
            fields[name] = val.copy() if isinstance(val, np.ndarray) else val
        return SimState(**fields)
