"""Quaternion and rotation-vector utilities.

Conventions used throughout the package:

* quaternions are (w, x, y, z), unit norm, stored as the last axis of an
  ndarray so every function works on arbitrary batch shapes;
* rotation matrices map body-frame vectors into the world frame;
* rotation vectors are axis * angle with the smallest angle in [0, pi].
"""

from __future__ import annotations

import numpy as np

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b (apply b's rotation first, then a's)."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )

def quat_conjugate(q: np.ndarray) -> np.ndarray:
    out = q.copy()
    out[..., 1:] *= -1.0
    return out


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion(s) q (body -> world)."""
    w = q[..., :1]
    u = q[..., 1:]
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    m = np.empty(q.shape[:-1] + (3, 3), dtype=q.dtype)
    m[..., 0, 0] = 1.0 - 2.0 * (yy + zz)
    m[..., 0, 1] = 2.0 * (xy - wz)
    m[..., 0, 2] = 2.0 * (xz + wy)
    m[..., 1, 0] = 2.0 * (xy + wz)
    m[..., 1, 1] = 1.0 - 2.0 * (xx + zz)
    m[..., 1, 2] = 2.0 * (yz - wx)
    m[..., 2, 0] = 2.0 * (xz - wy)
    m[..., 2, 1] = 2.0 * (yz + wx)
    m[..., 2, 2] = 1.0 - 2.0 * (xx + yy)
    return m


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Shepperd's method, stable for all rotation matrices."""
    m = np.asarray(m)
    batch = m.shape[:-2]
    q = np.empty(batch + (4,), dtype=m.dtype)
    t = np.einsum("...ii->...", m)
    cand = np.stack([t, m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]], axis=-1)
    case = np.argmax(cand, axis=-1)

    def fill(mask, vals):
        if np.any(mask):
            q[mask] = vals[mask]

    r = np.sqrt(np.maximum(1.0 + t, 0.0))
    w0 = np.stack(
        [
            0.5 * r,
            0.5 * np.divide(m[..., 2, 1] - m[..., 1, 2], r, where=r > 0),
            0.5 * np.divide(m[..., 0, 2] - m[..., 2, 0], r, where=r > 0),
            0.5 * np.divide(m[..., 1, 0] - m[..., 0, 1], r, where=r > 0),
        ],
        axis=-1,
    )
    fill(case == 0, w0)
    for i, (j, k) in enumerate([(1, 2), (2, 0), (0, 1)]):
        ri = np.sqrt(np.maximum(1.0 + m[..., i, i] - m[..., j, j] - m[..., k, k], 0.0))
        safe = np.where(ri > 0, ri, 1.0)
        wi = np.empty(batch + (4,), dtype=m.dtype)
        wi[..., 0] = 0.5 * (m[..., k, j] - m[..., j, k]) / safe
        wi[..., 1 + i] = 0.5 * ri
        wi[..., 1 + j] = 0.5 * (m[..., j, i] + m[..., i, j]) / safe
        wi[..., 1 + k] = 0.5 * (m[..., k, i] + m[..., i, k]) / safe
        fill(case == 1 + i, wi)
    # canonical sign: w >= 0
    q = np.where(q[..., :1] < 0, -q, q)
    return quat_normalize(q)


def quat_from_axis_angle(axis: np.ndarray, angle: np.ndarray) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    half = 0.5 * angle
    s = np.sin(half)
    return np.concatenate(
        [np.cos(half)[..., None], axis * s[..., None]], axis=-1
    )


def quat_exp_map(omega_dt: np.ndarray) -> np.ndarray:
    """Quaternion for a rotation-vector increment (exact exponential map)."""
    angle = np.linalg.norm(omega_dt, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sinc form avoids the 0/0 at angle -> 0
    small = angle < 1e-12
    k = np.where(small, 0.5, np.divide(np.sin(half), np.where(small, 1.0, angle)))
    return np.concatenate([np.cos(half), k * omega_dt], axis=-1)


def quat_integrate(q: np.ndarray, omega_world: np.ndarray, dt: float) -> np.ndarray:
    """Advance orientation by world-frame angular velocity over dt."""
    dq = quat_exp_map(omega_world * dt)
    return quat_normalize(quat_multiply(dq, q))


def quat_to_rotation_vector(q: np.ndarray) -> np.ndarray:
    """Smallest-angle rotation vector (axis * angle, angle in [0, pi])."""
    q = np.asarray(q)
    # force w >= 0 so the angle is the smallest one
    q = np.where(q[..., :1] < 0, -q, q)
    w = np.clip(q[..., 0], -1.0, 1.0)
    v = q[..., 1:]
    s = np.linalg.norm(v, axis=-1)
    angle = 2.0 * np.arctan2(s, w)
    small = s < 1e-12
    scale = np.where(small, 2.0, np.divide(angle, np.where(small, 1.0, s)))
    return scale[..., None] * v


def rotation_angle(q: np.ndarray) -> np.ndarray:
    """Smallest rotation angle of q, in radians."""
    w = np.abs(np.clip(q[..., 0], -1.0, 1.0))
    return 2.0 * np.arccos(w)


def quat_yaw_removed(q: np.ndarray) -> np.ndarray:
    """Remove the world-z yaw component, leaving the tilt-only rotation."""
    # yaw = rotation of body x-axis projected on the world xy-plane
    bx = quat_rotate(q, np.array([1.0, 0.0, 0.0]))
    yaw = np.arctan2(bx[..., 1], bx[..., 0])
    qz_inv = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), -yaw)
    return quat_multiply(qz_inv, q)


def random_unit_quaternion(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Uniform random rotation(s): normalized 4-d Gaussian samples."""
    shape = (4,) if n is None else (n, 4)
    q = rng.standard_normal(shape)
    q = quat_normalize(q)
    return np.where(q[..., :1] < 0, -q, q)


def euler_xyz_extrinsic(q: np.ndarray) -> np.ndarray:
    """Extrinsic x-y-z Euler angles (roll, pitch, yaw) of q."""
    m = quat_to_matrix(q)
    pitch = np.arcsin(np.clip(-m[..., 2, 0], -1.0, 1.0))
    roll = np.arctan2(m[..., 2, 1], m[..., 2, 2])
    yaw = np.arctan2(m[..., 1, 0], m[..., 0, 0])
    return np.stack([roll, pitch, yaw], axis=-1)


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(v) @ u == cross(v, u)."""
    out = np.zeros(v.shape[:-1] + (3, 3), dtype=v.dtype)
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out
