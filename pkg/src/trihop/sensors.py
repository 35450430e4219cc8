"""Simulated perception: downward laser range finders and the body-state
estimator (median height from tilt-corrected ranges + mocap attitude
passthrough with latency and noise)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import quat_exp_map, quat_multiply, quat_normalize, quat_rotate


@dataclass
class LrfReading:
    ranges: np.ndarray  # (n, 3) m
    valid: np.ndarray   # (n, 3) bool


@dataclass
class EstimatedState:
    height: np.ndarray       # (n,)
    attitude: np.ndarray     # (n, 4) unit quaternion
    angular_velocity: np.ndarray  # (n, 3)
    degraded: np.ndarray     # (n,) bool: no valid LRF since last good reading


class LrfArray:
    """Three time-of-flight rangefinders mounted under the body corners,
    pointing along body -z at a flat ground plane (z = 0)."""

    def __init__(self, cfg: dict, rng: np.random.Generator):
        sc = cfg["sensors"]["lrf"]
        self.max_range = float(sc["max_range_m"])
        self.noise_std = float(sc["noise_std_m"])
        r = float(sc["mount_radius_m"])
        h = float(sc["mount_height_m"])
        angles = 2.0 * np.pi * np.arange(3) / 3.0
        self.mounts = np.stack([r * np.cos(angles), r * np.sin(angles), np.full(3, h)], axis=1)
        self.rng = rng

    def measure(self, r_b: np.ndarray, q_b: np.ndarray) -> LrfReading:
        n = r_b.shape[0]
        origins = r_b[:, None, :] + quat_rotate(q_b[:, None, :], self.mounts[None, :, :])
        direction = quat_rotate(q_b, np.array([0.0, 0.0, -1.0]))[:, None, :]
        dz = direction[..., 2]
        pointing_down = dz < -1e-6
        t = np.where(pointing_down, -origins[..., 2] / np.where(pointing_down, dz, -1.0), np.inf)
        valid = pointing_down & (t >= 0.0) & (t <= self.max_range)
        noise = self.rng.normal(0.0, self.noise_std, size=(n, 3))
        ranges = np.where(valid, t + noise, np.nan)
        return LrfReading(ranges=ranges, valid=valid)


class StateEstimator:
    """Height from the median of tilt-corrected LRF ranges (first-order
    low-pass), attitude and rates passed through from simulated mocap with
    one-step latency and Gaussian noise."""

    def __init__(self, cfg: dict, num_envs: int, rng: np.random.Generator, dt: float,
                 mounts: np.ndarray):
        ec = cfg["sensors"]["estimator"]
        self.tau = float(ec["height_filter_tau_s"])
        self.latency = int(ec["mocap_latency_steps"])
        self.att_noise = np.deg2rad(float(ec["mocap_attitude_noise_deg"]))
        self.gyro_noise = float(ec["mocap_gyro_noise_radps"])
        self.dt = dt
        self.alpha = dt / (self.tau + dt)
        self.n = num_envs
        self.rng = rng
        self.mounts = mounts
        self.reset()

    def reset(self, height: float | np.ndarray = 0.0):
        self.height = np.broadcast_to(np.asarray(height, dtype=float), (self.n,)).copy()
        self.degraded = np.zeros(self.n, dtype=bool)
        self._mocap_buf: list[tuple[np.ndarray, np.ndarray]] = []

    def update(self, lrf: LrfReading, q_b: np.ndarray, w_b: np.ndarray,
               noise: bool = True) -> EstimatedState:
        # tilt correction: body origin height = range * cos(beta) - mount z drop
        cos_tilt = np.clip(1.0 - 2.0 * (q_b[:, 1] ** 2 + q_b[:, 2] ** 2), -1.0, 1.0)
        mount_z = quat_rotate(q_b[:, None, :], self.mounts[None, :, :])[..., 2]
        heights = lrf.ranges * cos_tilt[:, None] - mount_z
        any_valid = lrf.valid.any(axis=1)
        safe = np.where(lrf.valid, heights, np.nan)
        safe = np.where(any_valid[:, None], safe, 0.0)  # avoid all-NaN warnings
        med = np.where(any_valid, np.nanmedian(safe, axis=1), self.height)
        self.height = self.height + self.alpha * (med - self.height)
        self.degraded = np.where(any_valid, False, self.degraded | ~any_valid)

        if noise and self.att_noise > 0:
            dq = quat_exp_map(self.rng.normal(0.0, self.att_noise, size=(self.n, 3)))
            q_meas = quat_normalize(quat_multiply(dq, q_b))
            w_meas = w_b + self.rng.normal(0.0, self.gyro_noise, size=(self.n, 3))
        else:
            q_meas = q_b.copy()
            w_meas = w_b.copy()
        self._mocap_buf.append((q_meas, w_meas))
        if len(self._mocap_buf) > self.latency + 1:
            self._mocap_buf.pop(0)
        q_out, w_out = self._mocap_buf[0]
        return EstimatedState(
            height=self.height.copy(),
            attitude=q_out,
            angular_velocity=w_out,
            degraded=self.degraded.copy(),
        )
