"""Generalized advantage estimation."""

from __future__ import annotations

import numpy as np


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
        gamma: float, lam: float):
    """Backward GAE recursion.

    rewards, dones: (T, ...) per step; values: (T+1, ...) including the
    bootstrap value for the non-terminal tail. Returns (advantages, returns)
    with returns = advantages + values[:-1].
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    T = rewards.shape[0]
    if values.shape[0] != T + 1 or dones.shape[0] != T:
        raise ValueError("expected rewards (T,...), values (T+1,...), dones (T,...)")
    not_done = 1.0 - dones.astype(np.float64)
    advantages = np.zeros_like(rewards)
    acc = np.zeros_like(rewards[0] if rewards.ndim > 1 else np.float64(0.0))
    for t in range(T - 1, -1, -1):
        delta = rewards[t] + gamma * values[t + 1] * not_done[t] - values[t]
        acc = delta + gamma * lam * not_done[t] * acc
        advantages[t] = acc
    return advantages, advantages + values[:-1]
