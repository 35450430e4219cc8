"""Batched distance queries used by contact and self-collision checks."""

from __future__ import annotations

import numpy as np


def segment_segment_distance(
    p1: np.ndarray, q1: np.ndarray, p2: np.ndarray, q2: np.ndarray
) -> np.ndarray:
    """Minimum distance between segments [p1,q1] and [p2,q2], batched on the
    leading axes. Clamped closest-point computation (Ericson, ch. 5)."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    denom = a * e - b * b

    # general case; degenerate (parallel/point) cases fall out of the clamps
    s = np.where(denom > 1e-12, (b * f - c * e) / np.where(denom > 1e-12, denom, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    e_safe = np.where(e > 1e-12, e, 1.0)
    tt = (b * s + f) / e_safe
    t_clamped = np.clip(tt, 0.0, 1.0)
    # re-project s for clamped t
    a_safe = np.where(a > 1e-12, a, 1.0)
    s = np.clip((b * t_clamped - c) / a_safe, 0.0, 1.0)
    tt = np.clip((b * s + f) / e_safe, 0.0, 1.0)

    closest1 = p1 + s[..., None] * d1
    closest2 = p2 + tt[..., None] * d2
    return np.linalg.norm(closest1 - closest2, axis=-1)


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = np.sum(ab * ab, axis=-1)
    t = np.sum((p - a) * ab, axis=-1) / np.where(denom > 1e-12, denom, 1.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1)


def point_circle_distance(
    p: np.ndarray, center: np.ndarray, normal: np.ndarray, radius: float
) -> np.ndarray:
    """Distance from point(s) to a circle (ring centerline) in 3-d."""
    rel = p - center
    h = np.sum(rel * normal, axis=-1)
    in_plane = rel - h[..., None] * normal
    rho = np.linalg.norm(in_plane, axis=-1)
    return np.sqrt(h * h + (rho - radius) ** 2)
