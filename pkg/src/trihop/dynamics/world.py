"""Batched articulated-body dynamics for the hopper under four world modes.

The robot is simulated in generalized coordinates (free 6-DOF base + 9
revolute joints, or two gimbal ring joints + 9 joints when mounted). Mass
matrix and bias forces are assembled from body Jacobians (numba kernels, see
kernels.py); contacts use a spring-damper penalty with a Coulomb friction
cap.

Integrator: momentum-form semi-implicit Euler. Joint rates advance
explicitly from the full forward dynamics, but the base twist is never
integrated directly: the total spatial momentum (linear + angular about the
world origin) is the integrated quantity, updated only by external wrenches,
and the base twist is re-solved from the momentum matrix at the current
configuration every step. In zero gravity with no contacts the momentum is
therefore conserved to roundoff. Positions use a trapezoidal velocity
update, which reproduces constant-gravity parabolas exactly.
"""

from __future__ import annotations

import numpy as np

from .. import model as mdl
from ..rotations import matrix_to_quat, quat_integrate, quat_rotate, quat_to_matrix
from . import kernels
from .geometry import point_circle_distance, point_segment_distance, segment_segment_distance
from .state import ContactPoint, SimState, SimulationDiverged, WorldMode

_DIVERGENCE_LIMIT = 1.0e6


def _cross(a, b):
    """np.cross without its axis-juggling overhead (last-axis 3-vectors)."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


class World:
    """A simulation world: one robot morphology batch in one world mode."""

    def __init__(self, model: mdl.RobotModel, mode: WorldMode, cfg: dict, num_envs: int = 1):
        self.model = model
        self.mode = mode
        self.cfg = cfg
        self.n = num_envs
        wc = cfg["world"]
        self.dt = float(wc["timestep_s"])
        self.limit_mode = wc["joint_limit_mode"]
        self.limit_k = float(wc["joint_limit_stiffness"])
        self.limit_d = float(wc["joint_limit_damping"])
        cc = wc["contact"]
        self.contact_kp = float(cc["stiffness"])
        self.contact_kd = float(cc["damping"])
        self.friction_mu = float(cc["friction_mu"])
        self.tangential_k = float(cc["tangential_stiffness"])

        self._build_tree()
        self._build_contact_points()
        self._init_model_arrays(wc)
        self._alloc_buffers()
        self._cache_key = None

    # ------------------------------------------------------------------ tree

    def _build_tree(self):
        m = self.model
        gp = self.mode.gimbal
        if self.mode.free_base:
            nb = mdl.N_BODIES
            self.base_slot = 0
            self.robot_slots = np.arange(nb)
            parents = m.parents.copy()
            anchors = np.vstack([np.zeros(3), m.joint_anchors])
            offsets = np.concatenate([np.eye(3)[None], m.joint_offsets], axis=0)
            axes = np.vstack([np.zeros(3), m.joint_axes])
            self.ndof = 15
            self.joint_dofs = 6 + np.arange(9)
            self.rev_bodies = np.arange(1, nb)
            self.rev_dofs = 6 + np.arange(9)
        else:
            # outer ring, inner ring, then the robot with its base welded on
            nb = mdl.N_BODIES + 2
            self.base_slot = 2
            self.robot_slots = 2 + np.arange(mdl.N_BODIES)
            parents = np.concatenate([[-1, 0, 1], self.robot_slots[m.parents[1:]]])
            pivot = np.array([0.0, 0.0, gp.pivot_height])
            anchors = np.vstack([pivot, np.zeros(3), np.zeros(3), m.joint_anchors])
            # outer axis horizontal (config), inner axis perpendicular in the ring frame
            ax_o = gp.outer_axis
            ax_i = np.array([-ax_o[1], ax_o[0], 0.0])
            offsets = np.concatenate(
                [np.eye(3)[None], np.eye(3)[None], np.eye(3)[None], m.joint_offsets], axis=0
            )
            axes = np.vstack([ax_o, ax_i, np.zeros(3), m.joint_axes])
            self.ndof = 11
            self.joint_dofs = 2 + np.arange(9)
            self.rev_bodies = np.concatenate([[0, 1], self.robot_slots[1:]])
            self.rev_dofs = np.concatenate([[0, 1], 2 + np.arange(9)])

        self.nb = nb
        self.parents = parents.astype(np.int64)
        self.anchors = np.ascontiguousarray(anchors)
        self.offsets = np.ascontiguousarray(offsets)
        self.nrev = len(self.rev_bodies)
        self.rev_bodies = self.rev_bodies.astype(np.int64)
        self.rev_dofs = np.asarray(self.rev_dofs, dtype=np.int64)
        self.axes_rev = np.ascontiguousarray(axes[self.rev_bodies])
        rev_of_body = np.full(nb, -1, dtype=np.int64)
        for r, b in enumerate(self.rev_bodies):
            rev_of_body[b] = r
        self.rev_of_body = rev_of_body

        # subtree[i, r] = revolute joint r lies on the path from the root to body i
        sub = np.zeros((nb, self.nrev), dtype=bool)
        for i in range(nb):
            b = i
            while b >= 0:
                if rev_of_body[b] >= 0:
                    sub[i, rev_of_body[b]] = True
                b = self.parents[b]
        self.subtree = sub

    def _init_model_arrays(self, wc):
        n, nb, m = self.n, self.nb, self.model
        self.masses = np.zeros((n, nb))
        self.coms = np.zeros((n, nb, 3))
        self.inertias = np.zeros((n, nb, 3, 3))
        self.joint_friction = np.full((n, 9), float(wc["joint_friction_viscous"]))
        if not self.mode.free_base:
            # both hoops lie in their frame's x-y plane (they carry both
            # gimbal axes); the inner hoop is the robot's rigid mount
            gp = self.mode.gimbal
            normal = np.array([0.0, 0.0, 1.0])
            nn = np.outer(normal, normal)
            for slot, radius in enumerate([gp.outer_ring_radius, gp.inner_ring_radius]):
                self.masses[:, slot] = gp.ring_mass
                self.inertias[:, slot] = gp.ring_mass * radius**2 * (nn + 0.5 * (np.eye(3) - nn))
        self.set_model_params(np.arange(n), m.masses, m.coms, m.inertias)

    def set_model_params(self, env_idx, masses, coms, inertias, joint_friction=None):
        """Install (possibly randomized) robot parameters for selected envs."""
        slots = self.robot_slots
        self.masses[np.ix_(env_idx, slots)] = masses
        self.coms[np.ix_(env_idx, slots)] = coms
        self.inertias[np.ix_(env_idx, slots)] = inertias
        if not self.mode.free_base:
            # body COM shifted below the pivot by the imbalance offset
            self.coms[env_idx, self.base_slot, 2] -= self.mode.gimbal.imbalance_offset
        if joint_friction is not None:
            self.joint_friction[env_idx] = joint_friction
        self._cache_key = None

    def _build_contact_points(self):
        """Flatten collision geoms into candidate points (capsules -> 2 ends)."""
        pts_body, pts_local, pts_radius, pts_geom = [], [], [], []
        kinds = []
        for g_id, g in enumerate(self.model.geoms):
            kinds.append(g.kind)
            ends = [g.a] if np.array_equal(g.a, g.b) else [g.a, g.b]
            for e in ends:
                pts_body.append(self.robot_slots[g.body] if not self.mode.free_base else g.body)
                pts_local.append(e)
                pts_radius.append(g.radius)
                pts_geom.append(g_id)
        self.pt_body = np.array(pts_body, dtype=np.int64)
        self.pt_local = np.ascontiguousarray(pts_local, dtype=float)
        self.pt_radius = np.array(pts_radius, dtype=float)
        self.pt_geom = np.array(pts_geom, dtype=np.int64)
        self.n_geoms = len(self.model.geoms)
        self.geom_kinds = np.array(kinds, dtype=int)

    def _alloc_buffers(self):
        n, nb, nd, nr, P = self.n, self.nb, self.ndof, self.nrev, len(self.pt_body)
        self._R = np.zeros((n, nb, 3, 3))
        self._o = np.zeros((n, nb, 3))
        self._com_w = np.zeros((n, nb, 3))
        self._axis_w = np.zeros((n, nr, 3))
        self._J_v = np.zeros((n, nb, 3, nd))
        self._J_w = np.zeros((n, nb, 3, nd))
        self._Iw = np.zeros((n, nb, 3, 3))
        self._A = np.zeros((n, 6, nd))
        self._M = np.zeros((n, nd, nd))
        self._rhs = np.zeros((n, nd))
        self._W_ext = np.zeros((n, 6))
        self._omega = np.zeros((n, nb, 3))
        self._vcom = np.zeros((n, nb, 3))
        self._forces = np.zeros((n, P, 3))
        self._x_pts = np.zeros((n, P, 3))
        self._per_geom = np.zeros((n, self.n_geoms, 3))

    # ----------------------------------------------------------------- state

    def make_state(self, r_b=None, q_b=None, q=None, qd=None, v_b=None, w_b=None,
                   gimbal_q=None, gimbal_qd=None) -> SimState:
        """Build a consistent SimState (free modes: momentum derived from twist)."""
        n = self.n

        def arr(x, shape):
            if x is None:
                return np.zeros((n,) + shape)
            out = np.asarray(x, dtype=float)
            if out.shape == shape:
                return np.broadcast_to(out, (n,) + shape).copy()
            return out.reshape((n,) + shape).copy()

        state = SimState(
            r_b=arr(r_b, (3,)),
            q_b=arr(q_b if q_b is not None else np.array([1.0, 0, 0, 0]), (4,)),
            v_b=arr(v_b, (3,)),
            w_b=arr(w_b, (3,)),
            q=arr(q if q is not None else self.model.default_pose_rad, (9,)),
            qd=arr(qd, (9,)),
            t=np.zeros(n),
        )
        state._version = 0
        if not self.mode.free_base:
            state.gimbal_q = arr(gimbal_q, (2,))
            state.gimbal_qd = arr(gimbal_qd, (2,))
        state.contact_forces = np.zeros((n, self.n_geoms, 3))
        self._refresh(state, from_twist=True)
        if self.mode.kind == "counterweight":
            cw = self.mode.counterweight
            state.cw_height = np.full(n, cw.start_height)
            state.cw_taut = np.ones(n, dtype=bool)
            attach = self._attachment_point(state)
            state.rope_sum = attach[:, 2] + state.cw_height
            state.cw_vel = -self._attachment_velocity(state)[:, 2]
        return state

    # ------------------------------------------------------------ kinematics

    def _run_kinematics(self, state: SimState):
        if self.mode.free_base:
            coords = state.q
            base_R = quat_to_matrix(state.q_b)
            base_o = state.r_b
        else:
            coords = np.concatenate([state.gimbal_q, state.q], axis=1)
            base_R = np.zeros((self.n, 3, 3))
            base_o = np.zeros((self.n, 3))
        kernels.kin_kernel(
            self.parents, self.anchors, self.offsets, self.axes_rev, self.rev_of_body,
            self.rev_dofs, self.subtree, self.mode.free_base, base_R, base_o,
            np.ascontiguousarray(coords), self.coms, self.inertias, self.masses,
            self._R, self._o, self._com_w, self._axis_w, self._J_v, self._J_w,
            self._Iw, self._A,
        )

    def _generalized_velocity(self, state: SimState):
        if self.mode.free_base:
            return np.concatenate([state.v_b, state.w_b, state.qd], axis=1)
        return np.concatenate([state.gimbal_qd, state.qd], axis=1)

    def _refresh(self, state: SimState, from_twist=False):
        """Rebuild kinematics; in free modes re-solve the base twist from the
        stored momentum (or derive the momentum from a given twist).
        `from_twist` may be a bool or a row mask."""
        self._run_kinematics(state)
        n = self.n
        if self.mode.free_base:
            A = self._A
            derive = np.broadcast_to(
                np.asarray(True if state.p6 is None else from_twist), (n,))
            if derive.any():
                u = self._generalized_velocity(state)
                p_twist = np.matmul(A, u[:, :, None])[..., 0]
                if state.p6 is None:
                    state.p6 = p_twist
                else:
                    state.p6 = np.where(derive[:, None], p_twist, state.p6)
            if not derive.all():
                rhs = state.p6 - np.matmul(A[:, :, 6:], state.qd[:, :, None])[..., 0]
                ub = np.linalg.solve(A[:, :, :6], rhs[..., None])[..., 0]
                state.v_b = np.where(derive[:, None], state.v_b, ub[:, :3])
                state.w_b = np.where(derive[:, None], state.w_b, ub[:, 3:])
        else:
            state.r_b = self._o[:, self.base_slot].copy()
            state.q_b = matrix_to_quat(self._R[:, self.base_slot])
        u = self._generalized_velocity(state)
        self._u = u
        self._omega[:] = np.matmul(
            self._J_w.reshape(n, -1, self.ndof), u[:, :, None])[..., 0].reshape(n, self.nb, 3)
        self._vcom[:] = np.matmul(
            self._J_v.reshape(n, -1, self.ndof), u[:, :, None])[..., 0].reshape(n, self.nb, 3)
        if not self.mode.free_base:
            state.w_b = self._omega[:, self.base_slot].copy()
            state.v_b = self._vcom[:, self.base_slot] + _cross(
                self._omega[:, self.base_slot],
                state.r_b - self._com_w[:, self.base_slot],
            )
        self._cache_key = (id(state), getattr(state, "_version", 0))

    def _ensure_cache(self, state: SimState):
        if self._cache_key != (id(state), getattr(state, "_version", 0)):
            self._refresh(state, from_twist=self.mode.free_base and state.p6 is None)

    def reset_rows(self, state: SimState, idx: np.ndarray, r_b=None, q_b=None, q=None,
                   qd=None, v_b=None, w_b=None, gimbal_q=None, gimbal_qd=None):
        """Re-initialize selected env rows in place (velocities given as a
        twist; momentum is re-derived for those rows)."""
        def put(field, val):
            if val is not None:
                getattr(state, field)[idx] = val
            else:
                getattr(state, field)[idx] = 0.0 if field != "q_b" else np.array([1.0, 0, 0, 0])

        put("r_b", r_b)
        put("q_b", q_b)
        state.q[idx] = q if q is not None else self.model.default_pose_rad
        put("qd", qd)
        put("v_b", v_b)
        put("w_b", w_b)
        if not self.mode.free_base:
            put("gimbal_q", gimbal_q)
            put("gimbal_qd", gimbal_qd)
        state.t[idx] = 0.0
        state._version = getattr(state, "_version", 0) + 1
        derive = np.zeros(self.n, dtype=bool)
        derive[idx] = True
        self._refresh(state, from_twist=derive)
        if self.mode.kind == "counterweight":
            attach = self._attachment_point(state)
            state.cw_height[idx] = self.mode.counterweight.start_height
            state.cw_taut[idx] = True
            state.rope_sum[idx] = attach[idx, 2] + state.cw_height[idx]
            state.cw_vel[idx] = -self._attachment_velocity(state)[idx, 2]

    # ------------------------------------------------------------- contacts

    def compute_contacts(self, state: SimState):
        """Per-geom aggregated world contact forces at the current configuration.

        Inspection entry point: uses scratch accumulators, does not affect
        stepping."""
        self._ensure_cache(state)
        rhs = np.zeros((self.n, self.ndof))
        wext = np.zeros((self.n, 6))
        kernels.contact_kernel(
            self.pt_body, self.pt_local, self.pt_radius, self.pt_geom,
            self.contact_kp, self.contact_kd, self.friction_mu, self.tangential_k,
            self._R, self._o, self._com_w, self._omega, self._vcom, self._J_v, self._J_w,
            self._forces, self._x_pts, self._per_geom, rhs, wext,
        )
        active = self._forces[..., 2] > 0.0
        return self._per_geom.copy(), self._forces.copy(), self._x_pts.copy(), active

    def detect_contacts(self, state: SimState, env: int = 0):
        """Contact list for one env row (ground plane must be on)."""
        if not self.mode.ground:
            raise ValueError("detect_contacts requires the ground plane")
        per_geom, forces, x, active = self.compute_contacts(state)
        norms = np.linalg.norm(per_geom[env], axis=-1)
        out = []
        for p in range(len(self.pt_body)):
            if not active[env, p]:
                continue
            g = self.pt_geom[p]
            body = self.pt_body[p] - (0 if self.mode.free_base else 2)
            out.append(
                ContactPoint(
                    body=int(body),
                    geom_kind=int(self.geom_kinds[g]),
                    position=x[env, p].copy(),
                    normal_force=float(forces[env, p, 2]),
                    tangential_force=forces[env, p, :2].copy(),
                    force_magnitude=float(norms[g]),
                )
            )
        return out

    # ------------------------------------------------------------- stepping

    def step(self, state: SimState, joint_torques: np.ndarray, dt: float | None = None,
             raise_on_divergence: bool = True) -> SimState:
        """Advance the world by one physics step. Mutates and returns `state`.

        With raise_on_divergence=False, unstable envs are flagged in
        state.diverged instead (callers must reset those rows before the
        next step)."""
        dt = self.dt if dt is None else float(dt)
        if not 0.0 < dt <= 0.005:
            raise ValueError(f"dt must lie in (0, 5 ms], got {dt}")
        tau = np.asarray(joint_torques, dtype=float)
        if tau.shape == (9,):
            tau = np.broadcast_to(tau, (self.n, 9))
        if not np.all(np.isfinite(tau)):
            raise ValueError("joint torques must be finite")

        self._ensure_cache(state)
        n = self.n

        # joint-space applied torques: actuation, viscous friction, ROM springs
        tau_applied = tau - self.joint_friction * state.qd
        if self.limit_mode == "spring":
            over_u = np.maximum(0.0, state.q - self.model.limits.q_u)
            over_l = np.maximum(0.0, self.model.limits.q_l - state.q)
            in_violation = (over_u > 0) | (over_l > 0)
            tau_applied = tau_applied - self.limit_k * over_u + self.limit_k * over_l \
                - self.limit_d * state.qd * in_violation
        tau_gen = np.zeros((n, self.ndof))
        tau_gen[:, self.joint_dofs] = tau_applied
        if not self.mode.free_base:
            tau_gen[:, :2] -= self.mode.gimbal.joint_friction * state.gimbal_qd

        if self.mode.free_base:
            coords_qd = state.qd
            base_o = state.r_b
        else:
            coords_qd = np.concatenate([state.gimbal_qd, state.qd], axis=1)
            base_o = np.zeros((n, 3))

        kernels.dyn_kernel(
            self.parents, self.rev_of_body, self.rev_dofs, self.mode.free_base,
            self.mode.g, self.masses, self.coms, self.inertias, base_o,
            self._R, self._o, self._com_w, self._axis_w, self._J_v, self._J_w, self._Iw,
            self._u, np.ascontiguousarray(coords_qd), tau_gen,
            self._M, self._rhs, self._W_ext, self._omega, self._vcom,
        )
        M, rhs, W_ext = self._M, self._rhs, self._W_ext

        if self.mode.ground:
            kernels.contact_kernel(
                self.pt_body, self.pt_local, self.pt_radius, self.pt_geom,
                self.contact_kp, self.contact_kd, self.friction_mu, self.tangential_k,
                self._R, self._o, self._com_w, self._omega, self._vcom, self._J_v, self._J_w,
                self._forces, self._x_pts, self._per_geom, rhs, W_ext,
            )
            state.contact_forces = self._per_geom.copy()
        else:
            state.contact_forces = np.zeros((n, self.n_geoms, 3))

        # counterweight rope (external, vertical force at the attachment)
        physical_rope = False
        if self.mode.kind == "counterweight":
            cw = self.mode.counterweight
            x_att = self._attachment_point(state)
            rel_a = x_att - self._com_w[:, self.base_slot]
            J_att_z = (
                self._J_v[:, self.base_slot, 2, :]
                + self._J_w[:, self.base_slot, 0, :] * rel_a[:, 1, None]
                - self._J_w[:, self.base_slot, 1, :] * rel_a[:, 0, None]
            )
            taut = state.cw_taut.astype(float)
            if cw.effective_gravity is not None:
                rope_T = self.model.total_mass * (self.mode.g - cw.effective_gravity) * taut
            else:
                physical_rope = True
                rope_T = cw.mass * self.mode.g * taut
                Jz = J_att_z * taut[:, None]
                M = M + cw.mass * Jz[:, :, None] * Jz[:, None, :]
                om_b = self._omega[:, self.base_slot]
                # bias acceleration of a point fixed on the base (u_dot = 0)
                a_att_bias = _cross(om_b, _cross(om_b, x_att - state.r_b))[:, 2]
                rhs = rhs - cw.mass * a_att_bias[:, None] * Jz
            rhs = rhs + J_att_z * rope_T[:, None]

        # forward dynamics, explicit velocity update
        udot = np.linalg.solve(M, rhs[..., None])[..., 0]
        qd_new = state.qd + dt * udot[:, self.joint_dofs]

        if self.mode.free_base:
            if self.mode.kind == "counterweight":
                if physical_rope:
                    a_att_z = np.einsum("nd,nd->n", J_att_z, udot) + a_att_bias
                    rope_T = np.maximum(
                        self.mode.counterweight.mass * (self.mode.g - a_att_z), 0.0
                    ) * state.cw_taut
                W_ext[:, 2] += rope_T
                W_ext[:, 3] += x_att[:, 1] * rope_T
                W_ext[:, 4] += -x_att[:, 0] * rope_T
            p_new = state.p6 + dt * W_ext
            A = self._A
            rhs_m = p_new - np.matmul(A[:, :, 6:], qd_new[:, :, None])[..., 0]
            ub_new = np.linalg.solve(A[:, :, :6], rhs_m[..., None])[..., 0]
            state.r_b = state.r_b + dt * 0.5 * (state.v_b + ub_new[:, :3])
            state.q_b = quat_integrate(state.q_b, 0.5 * (state.w_b + ub_new[:, 3:]), dt)
            state.p6 = p_new
        else:
            g_qd_new = state.gimbal_qd + dt * udot[:, :2]
            state.gimbal_q = state.gimbal_q + dt * 0.5 * (state.gimbal_qd + g_qd_new)
            state.gimbal_qd = g_qd_new

        state.q = state.q + dt * 0.5 * (state.qd + qd_new)
        state.qd = qd_new
        if self.limit_mode == "clamp":
            below = state.q < self.model.limits.q_l
            above = state.q > self.model.limits.q_u
            state.q = np.clip(state.q, self.model.limits.q_l, self.model.limits.q_u)
            state.qd = np.where(below & (state.qd < 0), 0.0, state.qd)
            state.qd = np.where(above & (state.qd > 0), 0.0, state.qd)
        state.t = state.t + dt

        state._version = getattr(state, "_version", 0) + 1
        self._refresh(state)
        if self.mode.kind == "counterweight":
            self._update_counterweight(state, dt)

        per_env = np.stack([
            np.abs(state.r_b).max(axis=1), np.abs(state.q).max(axis=1),
            np.abs(state.qd).max(axis=1), np.abs(state.v_b).max(axis=1),
            np.abs(state.w_b).max(axis=1),
        ]).max(axis=0)
        bad = ~np.isfinite(per_env) | (per_env > _DIVERGENCE_LIMIT)
        if bad.any():
            if raise_on_divergence:
                worst = per_env[np.isfinite(per_env)].max() if np.isfinite(per_env).any() else np.inf
                raise SimulationDiverged(
                    f"state magnitude {worst:.3e} exceeds {_DIVERGENCE_LIMIT:.0e} "
                    f"in envs {np.where(bad)[0].tolist()}")
            state.diverged = bad
        else:
            state.diverged = bad
        return state

    # --------------------------------------------------------- counterweight

    def _attachment_point(self, state: SimState):
        off = np.broadcast_to(self.model.attachment_offset, (self.n, 3))
        return state.r_b + quat_rotate(state.q_b, off)

    def _attachment_velocity(self, state: SimState):
        x = self._attachment_point(state)
        return self._vcom[:, self.base_slot] + _cross(
            self._omega[:, self.base_slot], x - self._com_w[:, self.base_slot])

    def _update_counterweight(self, state: SimState, dt: float):
        """Advance the virtual counterweight; the rope slackens when the
        attachment rises faster than the counterweight pays out rope in free
        fall, and snaps taut again when the slack is consumed."""
        cw = self.mode.counterweight
        x_att_z = self._attachment_point(state)[:, 2]
        v_ff = state.cw_vel - self.mode.g * dt
        h_ff = state.cw_height + dt * v_ff
        h_taut = state.rope_sum - x_att_z
        if cw.rope_slack_model:
            slack = h_ff > h_taut + 1e-12
        else:
            slack = np.zeros(self.n, dtype=bool)
        state.cw_height = np.where(slack, h_ff, h_taut)
        state.cw_vel = np.where(slack, v_ff, -self._attachment_velocity(state)[:, 2])
        state.cw_taut = ~slack

    # -------------------------------------------------------------- metrics

    def com(self, state: SimState) -> np.ndarray:
        """Mass-weighted mean of link COM positions, (n, 3)."""
        self._ensure_cache(state)
        m = self.masses
        return (m[:, :, None] * self._com_w).sum(axis=1) / m.sum(axis=1, keepdims=True)

    def momenta(self, state: SimState):
        """Brute-force per-link momentum sums: (linear, angular about the COM)."""
        return self._momenta(state, self.com(state))

    def momenta_origin(self, state: SimState):
        """Like momenta, but angular momentum taken about the world origin."""
        return self._momenta(state, np.zeros((self.n, 3)))

    def _momenta(self, state: SimState, about: np.ndarray):
        self._ensure_cache(state)
        m = self.masses
        p = (m[:, :, None] * self._vcom).sum(axis=1)
        rel = self._com_w - about[:, None, :]
        L = (
            np.matmul(self._Iw, self._omega[..., None])[..., 0]
            + _cross(rel, m[:, :, None] * self._vcom)
        ).sum(axis=1)
        return p, L

    def energy(self, state: SimState) -> np.ndarray:
        """Kinetic + gravitational + penalty-spring potential energy."""
        self._ensure_cache(state)
        m = self.masses
        ke = 0.5 * (m * np.sum(self._vcom**2, axis=-1)).sum(axis=1)
        ke += 0.5 * np.einsum("nbi,nbij,nbj->n", self._omega, self._Iw, self._omega)
        pe = self.mode.g * (m * self._com_w[..., 2]).sum(axis=1)
        if self.mode.ground:
            pb = self.pt_body
            x = self._o[:, pb] + np.einsum("npij,pj->npi", self._R[:, pb], self.pt_local)
            depth = np.maximum(0.0, self.pt_radius[None, :] - x[..., 2])
            pe += 0.5 * self.contact_kp * (depth**2).sum(axis=1)
        if self.limit_mode == "spring":
            over_u = np.maximum(0.0, state.q - self.model.limits.q_u)
            over_l = np.maximum(0.0, self.model.limits.q_l - state.q)
            pe += 0.5 * self.limit_k * ((over_u**2).sum(axis=1) + (over_l**2).sum(axis=1))
        return ke + pe

    def gimbal_angles(self, state: SimState):
        """(phi, theta): inner and outer ring angles. Gimbal mode only."""
        if self.mode.kind != "gimbal":
            raise ValueError("gimbal_angles is only defined in gimbal mode")
        return state.gimbal_q[:, 1].copy(), state.gimbal_q[:, 0].copy()

    # -------------------------------------------------------- self collision

    def _leg_segments(self):
        m = self.model
        segs_a, segs_b, radii, leg_of = [], [], [], []
        for g in m.geoms:
            if g.kind in (mdl.GEOM_THIGH, mdl.GEOM_SHIN):
                slot = self.robot_slots[g.body]
                a = self._o[:, slot] + np.einsum("nij,j->ni", self._R[:, slot], g.a)
                b = self._o[:, slot] + np.einsum("nij,j->ni", self._R[:, slot], g.b)
                segs_a.append(a)
                segs_b.append(b)
                radii.append(g.radius)
                leg_of.append((g.body - 1) // 3)
        return np.stack(segs_a, axis=1), np.stack(segs_b, axis=1), np.array(radii), np.array(leg_of)

    def self_collision(self, state: SimState) -> np.ndarray:
        """True per env when legs collide with each other, the body, or (in
        gimbal mode) one of the rings."""
        self._ensure_cache(state)
        m = self.model
        segs_a, segs_b, radii, leg_of = self._leg_segments()
        hit = np.zeros(self.n, dtype=bool)
        ns = segs_a.shape[1]
        for i in range(ns):
            for j in range(i + 1, ns):
                if leg_of[i] == leg_of[j]:
                    continue
                d = segment_segment_distance(segs_a[:, i], segs_b[:, i], segs_a[:, j], segs_b[:, j])
                hit |= d < (radii[i] + radii[j])

        base = self.robot_slots[0]
        for g in m.geoms:
            if g.kind != mdl.GEOM_BASE:
                continue
            center = self._o[:, base] + np.einsum("nij,j->ni", self._R[:, base], g.a)
            for i in range(ns):
                d = point_segment_distance(center, segs_a[:, i], segs_b[:, i])
                hit |= d < (g.radius + radii[i])

        if self.mode.kind == "gimbal":
            gp = self.mode.gimbal
            pivot = np.array([0.0, 0.0, gp.pivot_height])
            # the robot is rigid with the inner ring, so only the outer
            # hoop is a collision partner (relative motion = inner angle)
            rings = [
                (np.einsum("nij,j->ni", self._R[:, 0], np.array([0.0, 0.0, 1.0])),
                 gp.outer_ring_radius),
            ]
            ts = np.linspace(0.0, 1.0, 5)
            samples = (
                segs_a[:, :, None, :] + ts[None, None, :, None] * (segs_b - segs_a)[:, :, None, :]
            ).reshape(self.n, -1, 3)
            pt_r = np.repeat(radii, len(ts))
            feet = [g for g in m.geoms if g.kind == mdl.GEOM_FOOT]
            foot_pts = np.stack(
                [self._o[:, self.robot_slots[g.body]] + np.einsum(
                    "nij,j->ni", self._R[:, self.robot_slots[g.body]], g.a) for g in feet], axis=1)
            pts = np.concatenate([samples, foot_pts], axis=1)
            pt_r = np.concatenate([pt_r, [g.radius for g in feet]])
            for normal, radius in rings:
                d = point_circle_distance(pts, pivot[None, None, :], normal[:, None, :], radius)
                hit |= np.any(d < (pt_r[None, :] + gp.ring_tube_radius), axis=1)
        return hit
