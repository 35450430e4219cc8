"""Policy observation layouts, one per task.

Vectors are concatenated in a fixed order; the gimbal task deliberately
carries no joint velocities.
"""

from __future__ import annotations

import numpy as np

FREE_FLOAT_DIM = 34   # q(9) qd(9) q_b(4) w_b(3) a_prev(9)
GIMBAL_DIM = 25       # q(9) q_b(4) w_b(3) a_prev(9)
JUMP_DIM = 43         # q(9) qd(9) r_b(3) r_cmd(3) v_b(3) q_b(4) w_b(3) a_prev(9)


def free_float_obs(q, qd, q_b, w_b, a_prev) -> np.ndarray:
    return np.concatenate([q, qd, q_b, w_b, a_prev], axis=1)


def gimbal_obs(q, q_b, w_b, a_prev) -> np.ndarray:
    return np.concatenate([q, q_b, w_b, a_prev], axis=1)


def jump_obs(q, qd, r_b, r_cmd, v_b, q_b, w_b, a_prev) -> np.ndarray:
    return np.concatenate([q, qd, r_b, r_cmd, v_b, q_b, w_b, a_prev], axis=1)
