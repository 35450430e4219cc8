"""Robot morphology: masses, limits, gear ratios, and the kinematic tree.

The robot is a triangular body with one leg per corner; each leg has three
revolute joints (HAA yaw about body z, HFE pitch, KFE knee pitch). Bodies are
indexed base=0 then hip/thigh/shin per leg, joints leg-major:
[haa0, hfe0, kfe0, haa1, ...]. Joint frames are canonical per leg (the 120
degree corner rotation is baked into the hip joint offset), so at q=0 every
leg hangs straight down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

N_LEGS = 3
N_JOINTS = 9
N_BODIES = 10
HAA, HFE, KFE = 0, 1, 2
HAA_IDX = np.array([0, 3, 6])
HFE_IDX = np.array([1, 4, 7])
KFE_IDX = np.array([2, 5, 8])

BODY_NAMES = ["base"] + [f"{part}_{leg}" for leg in range(3) for part in ("hip", "thigh", "shin")]
JOINT_NAMES = [f"{name}_{leg}" for leg in range(3) for name in ("haa", "hfe", "kfe")]

# contact geometry kinds
GEOM_BASE = 0
GEOM_THIGH = 1
GEOM_SHIN = 2
GEOM_FOOT = 3


class ModelError(ValueError):
    """Raised when a model config violates a construction invariant."""


@dataclass(frozen=True)
class JointLimits:
    q_l: np.ndarray  # rad, (9,)
    q_u: np.ndarray  # rad, (9,)
    degrees: dict = field(default_factory=dict)  # exact config values for round-trip


@dataclass(frozen=True)
class TorqueLimits:
    knee_joint: float
    hip_pitch: float
    hip_yaw: float
    hip_combined: float
    knee_motor: float
    hip_motor: float


@dataclass(frozen=True)
class GearRatios:
    i_hd: float  # differential
    i_hr: float  # right-angle stage (pitch gets twice the yaw torque)
    i_hp: float  # planetary
    i_knee: float


@dataclass(frozen=True)
class ContactGeom:
    """A collision primitive attached to a body: sphere (point a) or capsule (a-b)."""

    body: int
    kind: int          # GEOM_* classification for reward accounting
    a: np.ndarray      # body-frame endpoint
    b: np.ndarray      # == a for spheres
    radius: float


@dataclass(frozen=True)
class RobotModel:
    body_mass: float
    leg_mass: float
    total_mass: float
    masses: np.ndarray          # (10,)
    inertias: np.ndarray        # (10, 3, 3) body-frame, about each body COM
    coms: np.ndarray            # (10, 3) body-frame COM offsets
    parents: np.ndarray         # (10,) parent body index, -1 for base
    joint_body: np.ndarray      # (9,) body moved by each joint (== joint index + 1)
    joint_anchors: np.ndarray   # (9, 3) anchor in parent body frame
    joint_offsets: np.ndarray   # (9, 3, 3) fixed rotation parent -> joint frame
    joint_axes: np.ndarray      # (9, 3) axis in the joint (child) frame
    limits: JointLimits
    torque_limits: TorqueLimits
    gear_ratios: GearRatios
    default_pose_rad: np.ndarray  # (9,)
    geoms: tuple                # ContactGeom list used for ground + self collision
    foot_positions: np.ndarray  # (3, 3) foot sphere centers in shin frames
    body_size: float
    attachment_offset: np.ndarray  # counterweight rope attachment, body frame


def _box_inertia(m: float, lx: float, ly: float, lz: float) -> np.ndarray:
    return m / 12.0 * np.diag([ly**2 + lz**2, lx**2 + lz**2, lx**2 + ly**2])


def _capsule_inertia(m: float, length: float, radius: float) -> np.ndarray:
    """Uniform-density capsule, axis along z, about its COM."""
    v_cyl = math.pi * radius**2 * length
    v_sph = 4.0 / 3.0 * math.pi * radius**3
    m_cyl = m * v_cyl / (v_cyl + v_sph)
    m_sph = m - m_cyl
    izz = 0.5 * m_cyl * radius**2 + 0.4 * m_sph * radius**2
    ixx = (
        m_cyl * (length**2 / 12.0 + radius**2 / 4.0)
        + m_sph * (0.4 * radius**2 + 0.375 * length * radius + 0.25 * length**2)
    )
    return np.diag([ixx, ixx, izz])


def _sphere_inertia(m: float, radius: float) -> np.ndarray:
    return np.eye(3) * (0.4 * m * radius**2)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_spd(inertia: np.ndarray, name: str) -> None:
    if not np.allclose(inertia, inertia.T, atol=1e-12):
        raise ModelError(f"inertia of {name} is not symmetric")
    eigvals = np.linalg.eigvalsh(inertia)
    if np.any(eigvals <= 0):
        raise ModelError(f"inertia of {name} is not positive definite (eig {eigvals.min():g})")


def build_robot_model(config: dict) -> RobotModel:
    """Construct the robot from the `model` section of a config tree."""
    mc = config["model"] if "model" in config else config
    body = mc["body"]
    leg = mc["leg"]

    for key, val in [("body mass", body["mass_kg"]), ("hip mass", leg["hip_mass_kg"]),
                     ("thigh mass", leg["thigh_mass_kg"]), ("shin mass", leg["shin_mass_kg"]),
                     ("body size", body["size_m"]), ("body height", body["height_m"]),
                     ("thigh length", leg["thigh_length_m"]), ("shin length", leg["shin_length_m"]),
                     ("thigh radius", leg["thigh_radius_m"]), ("shin radius", leg["shin_radius_m"]),
                     ("hip radius", leg["hip_radius_m"]), ("foot radius", leg["foot_radius_m"])]:
        if val <= 0:
            raise ModelError(f"{key} must be positive, got {val}")

    leg_mass = leg["hip_mass_kg"] + leg["thigh_mass_kg"] + leg["shin_mass_kg"]
    total = body["mass_kg"] + N_LEGS * leg_mass
    if mc.get("strict_total_mass", True) and abs(total - mc["total_mass_kg"]) > 1e-9:
        raise ModelError(
            f"total mass {total:.9f} kg differs from required {mc['total_mass_kg']} kg "
            "(set model.strict_total_mass=false to study variants)"
        )

    corner_radius = body["size_m"] / 2.0
    thigh_len = leg["thigh_length_m"]
    shin_len = leg["shin_length_m"]

    masses = np.empty(N_BODIES)
    inertias = np.empty((N_BODIES, 3, 3))
    coms = np.empty((N_BODIES, 3))
    parents = np.full(N_BODIES, -1, dtype=int)
    joint_anchors = np.zeros((N_JOINTS, 3))
    joint_offsets = np.zeros((N_JOINTS, 3, 3))
    joint_axes = np.zeros((N_JOINTS, 3))

    masses[0] = body["mass_kg"]
    inertias[0] = _box_inertia(masses[0], body["size_m"], body["size_m"], body["height_m"])
    coms[0] = 0.0

    hip_drop = leg["hip_drop_m"]
    for l in range(N_LEGS):
        psi = 2.0 * math.pi * l / N_LEGS
        rz = np.array(
            [
                [math.cos(psi), -math.sin(psi), 0.0],
                [math.sin(psi), math.cos(psi), 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        hip_b, thigh_b, shin_b = 1 + 3 * l, 2 + 3 * l, 3 + 3 * l
        j_haa, j_hfe, j_kfe = 3 * l, 3 * l + 1, 3 * l + 2

        parents[hip_b] = 0
        parents[thigh_b] = hip_b
        parents[shin_b] = thigh_b

        # HAA: yaw about base z at the body corner; corner rotation baked here
        joint_anchors[j_haa] = rz @ np.array([corner_radius, 0.0, 0.0])
        joint_offsets[j_haa] = rz
        joint_axes[j_haa] = [0.0, 0.0, 1.0]
        masses[hip_b] = leg["hip_mass_kg"]
        inertias[hip_b] = _sphere_inertia(masses[hip_b], leg["hip_radius_m"])
        coms[hip_b] = [0.02, 0.0, -hip_drop]

        # HFE: pitch about leg-local -y; positive swings the thigh tip outward
        joint_anchors[j_hfe] = [0.03, 0.0, -hip_drop]
        joint_offsets[j_hfe] = np.eye(3)
        joint_axes[j_hfe] = [0.0, -1.0, 0.0]
        masses[thigh_b] = leg["thigh_mass_kg"]
        inertias[thigh_b] = _capsule_inertia(masses[thigh_b], thigh_len, leg["thigh_radius_m"])
        coms[thigh_b] = [0.0, 0.0, -thigh_len / 2.0]

        # KFE: same axis convention at the knee
        joint_anchors[j_kfe] = [0.0, 0.0, -thigh_len]
        joint_offsets[j_kfe] = np.eye(3)
        joint_axes[j_kfe] = [0.0, -1.0, 0.0]
        masses[shin_b] = leg["shin_mass_kg"]
        inertias[shin_b] = _capsule_inertia(masses[shin_b], shin_len, leg["shin_radius_m"])
        coms[shin_b] = [0.0, 0.0, -shin_len / 2.0]

    for i in range(N_BODIES):
        _check_spd(inertias[i], BODY_NAMES[i])

    lim_deg = mc["limits_deg"]
    per_type = [lim_deg["haa"], lim_deg["hfe"], lim_deg["kfe"]]
    for name, v in zip(("haa", "hfe", "kfe"), per_type):
        if v <= 0:
            raise ModelError(f"ROM for {name} must be positive (symmetric limits)")
    q_u = np.deg2rad(np.tile(per_type, N_LEGS))
    limits = JointLimits(q_l=_freeze(-q_u), q_u=_freeze(q_u), degrees=dict(lim_deg))

    tl = mc["torque_limits_nm"]
    torque_limits = TorqueLimits(
        knee_joint=tl["knee_joint"], hip_pitch=tl["hip_pitch"], hip_yaw=tl["hip_yaw"],
        hip_combined=tl["hip_combined"], knee_motor=tl["knee_motor"], hip_motor=tl["hip_motor"],
    )
    if min(vars(torque_limits).values()) <= 0:
        raise ModelError("torque limits must be positive")

    gr = mc["gear_ratios"]
    gear_ratios = GearRatios(
        i_hd=gr["differential"], i_hr=gr["right_angle"], i_hp=gr["planetary"], i_knee=gr["knee"],
    )
    if abs(gear_ratios.i_knee - torque_limits.knee_joint / torque_limits.knee_motor) > 1e-6:
        raise ModelError("knee gear ratio must equal knee joint / motor torque ratio")

    pose = mc["default_pose_deg"]
    default_pose = np.deg2rad(np.tile([pose["haa"], pose["hfe"], pose["kfe"]], N_LEGS))
    if np.any(default_pose <= limits.q_l) or np.any(default_pose >= limits.q_u):
        raise ModelError("default pose must lie strictly inside the ROM")

    # collision geometry: body spheres, thigh/shin capsules, foot spheres
    geoms = []
    body_r = body["collision_radius_m"]
    geoms.append(ContactGeom(0, GEOM_BASE, _freeze([0.0, 0.0, 0.0]), _freeze([0.0, 0.0, 0.0]), body_r))
    for l in range(N_LEGS):
        psi = 2.0 * math.pi * l / N_LEGS
        corner = np.array([math.cos(psi), math.sin(psi), 0.0]) * corner_radius * 0.85
        geoms.append(ContactGeom(0, GEOM_BASE, _freeze(corner), _freeze(corner), body_r))
    foot_positions = np.zeros((N_LEGS, 3))
    for l in range(N_LEGS):
        thigh_b, shin_b = 2 + 3 * l, 3 + 3 * l
        geoms.append(
            ContactGeom(thigh_b, GEOM_THIGH, _freeze([0.0, 0.0, -0.01]),
                        _freeze([0.0, 0.0, -thigh_len + 0.01]), leg["thigh_radius_m"])
        )
        # shin shaft stops short of the foot so grazing foot touches stay foot-only
        geoms.append(
            ContactGeom(shin_b, GEOM_SHIN, _freeze([0.0, 0.0, -0.01]),
                        _freeze([0.0, 0.0, -shin_len + 0.03]), leg["shin_radius_m"])
        )
        foot = np.array([0.0, 0.0, -shin_len])
        geoms.append(ContactGeom(shin_b, GEOM_FOOT, _freeze(foot), _freeze(foot), leg["foot_radius_m"]))
        foot_positions[l] = foot

    attach = np.array(config.get("world", {}).get("counterweight", {}).get(
        "attachment_offset_m", [0.0, 0.0, body["height_m"]]), dtype=float)

    return RobotModel(
        body_mass=float(masses[0]),
        leg_mass=float(leg_mass),
        total_mass=float(total),
        masses=_freeze(masses),
        inertias=_freeze(inertias),
        coms=_freeze(coms),
        parents=_freeze(parents).astype(int),
        joint_body=_freeze(np.arange(1, N_BODIES)).astype(int),
        joint_anchors=_freeze(joint_anchors),
        joint_offsets=_freeze(joint_offsets),
        joint_axes=_freeze(joint_axes),
        limits=limits,
        torque_limits=torque_limits,
        gear_ratios=gear_ratios,
        default_pose_rad=_freeze(default_pose),
        geoms=tuple(geoms),
        foot_positions=_freeze(foot_positions),
        body_size=float(body["size_m"]),
        attachment_offset=_freeze(attach),
    )


def default_pose(model: RobotModel) -> np.ndarray:
    """Nominal stance, strictly inside the ROM and identical across legs."""
    return model.default_pose_rad.copy()


def clamp_to_rom(model: RobotModel, q: np.ndarray) -> np.ndarray:
    return np.clip(q, model.limits.q_l, model.limits.q_u)


def rom_to_config(model: RobotModel) -> dict:
    """Serialize ROM limits back to their config (degree) representation."""
    return dict(model.limits.degrees)
