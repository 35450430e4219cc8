"""PD control, joint/motor torque limits, and the hip differential mapping.

The two hip motors drive pitch and yaw through a differential stage: motor
torques are (gamma_1, gamma_2) = B @ (tau_pitch, tau_yaw) with

    B = [[ 1/(2 i_hd i_hr i_hp), 1/(2 i_hp)],
         [-1/(2 i_hd i_hr i_hp), 1/(2 i_hp)]]

Gear ratios are fitted so the pure-pitch and pure-yaw joint maxima equal the
motor limit through this mapping (see fit_hip_ratios); the right-angle stage
doubles pitch torque relative to yaw.

Joint-torque saturation: knee clamps to its joint limit; the hip (pitch,
yaw) pair is confined to the convex hull of (+-2.8, 0), (0, +-1.5),
(+-1, +-1) via coupled per-axis limits, so a simultaneous out-of-range
command like (2.0, 1.2) saturates to (1.0, 1.0) while pure-axis commands
keep their full range. The clamp is continuous and idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import HAA_IDX, HFE_IDX, KFE_IDX, GearRatios, RobotModel, TorqueLimits


@dataclass
class PdGains:
    kp: np.ndarray  # (9,) N*m/rad
    kd: np.ndarray  # (9,) N*m*s/rad

    @classmethod
    def uniform(cls, kp: float, kd: float) -> "PdGains":
        if kp < 0 or kd < 0:
            raise ValueError("PD gains must be non-negative")
        return cls(kp=np.full(9, float(kp)), kd=np.full(9, float(kd)))


def pd_torque(q_des, q, qd, gains: PdGains, limits: TorqueLimits) -> np.ndarray:
    """tau = kp*(q_des - q) - kd*qd, saturated to the joint torque limits.

    Accepts (9,) or batched (n, 9) arrays.
    """
    tau = gains.kp * (np.asarray(q_des) - np.asarray(q)) - gains.kd * np.asarray(qd)
    return saturate_joint_torques(tau, limits)


def saturate_joint_torques(tau, limits: TorqueLimits) -> np.ndarray:
    """Clamp knee torques to the knee joint limit and each hip (pitch, yaw)
    pair to the combined-command region (see module docstring)."""
    tau = np.array(tau, dtype=float, copy=True)
    tau[..., KFE_IDX] = np.clip(tau[..., KFE_IDX], -limits.knee_joint, limits.knee_joint)
    pitch = tau[..., HFE_IDX]
    yaw = tau[..., HAA_IDX]
    pitch_cap, yaw_cap = _hip_caps(np.abs(pitch), np.abs(yaw), limits)
    tau[..., HFE_IDX] = np.clip(pitch, -pitch_cap, pitch_cap)
    tau[..., HAA_IDX] = np.clip(yaw, -yaw_cap, yaw_cap)
    return tau


def _hip_caps(abs_pitch, abs_yaw, limits: TorqueLimits):
    """Coupled per-axis hip limits from the requested magnitudes.

    The fixed-point set is the hull of (pitch_only, 0), (0, yaw_only) and
    (combined, combined); each cap shrinks linearly in the other axis's
    request and floors at the combined value.
    """
    c = limits.hip_combined
    pitch_cap = np.maximum(c, limits.hip_pitch - (limits.hip_pitch - c) / c * abs_yaw)
    yaw_cap = np.maximum(c, limits.hip_yaw - (limits.hip_yaw - c) / c * abs_pitch)
    return pitch_cap, yaw_cap


def saturate_hip_pair(tau_p, tau_y, limits: TorqueLimits):
    """Saturate a single hip (pitch, yaw) request; scalar or array inputs."""
    tau_p = np.asarray(tau_p, dtype=float)
    tau_y = np.asarray(tau_y, dtype=float)
    pitch_cap, yaw_cap = _hip_caps(np.abs(tau_p), np.abs(tau_y), limits)
    return np.clip(tau_p, -pitch_cap, pitch_cap), np.clip(tau_y, -yaw_cap, yaw_cap)


def motor_from_joint(tau_p, tau_y, ratios: GearRatios):
    """Hip differential: joint (pitch, yaw) torques -> motor (g1, g2) torques."""
    _check_ratios(ratios)
    a = 1.0 / (2.0 * ratios.i_hd * ratios.i_hr * ratios.i_hp)
    b = 1.0 / (2.0 * ratios.i_hp)
    tau_p = np.asarray(tau_p, dtype=float)
    tau_y = np.asarray(tau_y, dtype=float)
    return a * tau_p + b * tau_y, -a * tau_p + b * tau_y


def joint_from_motor(g1, g2, ratios: GearRatios):
    """Exact inverse of motor_from_joint."""
    _check_ratios(ratios)
    a = 1.0 / (2.0 * ratios.i_hd * ratios.i_hr * ratios.i_hp)
    b = 1.0 / (2.0 * ratios.i_hp)
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    return (g1 - g2) / (2.0 * a), (g1 + g2) / (2.0 * b)


def saturate_motor_torques(g1, g2, gk, limits: TorqueLimits):
    """Clamp motor torques to their physical maxima (hip pair + knee)."""
    hm, km = limits.hip_motor, limits.knee_motor
    return (
        np.clip(g1, -hm, hm),
        np.clip(g2, -hm, hm),
        np.clip(gk, -km, km),
    )


def fit_hip_ratios(limits: TorqueLimits, i_hr: float = 2.0) -> GearRatios:
    """Fit the planetary and differential ratios so pure-yaw and pure-pitch
    joint maxima map exactly onto the motor torque limit.

    Pure yaw tau_y saturates both motors at tau_y / (2 i_hp), so
    i_hp = yaw_max / (2 motor_max); pure pitch saturates at
    tau_p / (2 i_hd i_hr i_hp), fixing i_hd given i_hr.
    """
    i_hp = limits.hip_yaw / (2.0 * limits.hip_motor)
    i_hd = limits.hip_pitch / (2.0 * limits.hip_motor * i_hr * i_hp)
    i_knee = limits.knee_joint / limits.knee_motor
    return GearRatios(i_hd=i_hd, i_hr=i_hr, i_hp=i_hp, i_knee=i_knee)


def _check_ratios(ratios: GearRatios) -> None:
    if min(ratios.i_hd, ratios.i_hr, ratios.i_hp, ratios.i_knee) <= 0:
        raise ValueError("gear ratios must be positive")


def gains_from_config(cfg: dict) -> PdGains:
    a = cfg["actuation"]
    return PdGains.uniform(a["kp"], a["kd"])
