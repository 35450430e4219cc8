"""Numba kernels for the per-step hot path of the dynamics engine.

Everything here is straight-line arithmetic over explicit loops; the World
class owns all logic and calls these with preallocated outputs. Kernels are
serial per environment (deterministic) and cached on disk after first
compilation.
"""

from __future__ import annotations

import numpy as np
from numba import njit

F = "float64"


@njit(cache=True, fastmath=False)
def kin_kernel(parents, anchors, offsets, axes, rev_of_body, rev_dofs, subtree,
               free_base, base_R, base_o, coords, coms, inertias, masses,
               R, o, com_w, axis_w, J_v, J_w, Iw, A):
    """Forward kinematics, COM Jacobians, world inertias, momentum matrix."""
    n = coords.shape[0]
    nb = parents.shape[0]
    nrev = rev_dofs.shape[0]
    ndof = J_v.shape[3]

    for e in range(n):
        for i in range(nb):
            par = parents[i]
            if par < 0 and free_base:
                for a in range(3):
                    o[e, i, a] = base_o[e, a]
                    for b in range(3):
                        R[e, i, a, b] = base_R[e, a, b]
            else:
                # anchor position and fixed offset in the parent frame
                for a in range(3):
                    acc = 0.0
                    for b in range(3):
                        rp = R[e, par, a, b] if par >= 0 else (1.0 if a == b else 0.0)
                        acc += rp * anchors[i, b]
                    o[e, i, a] = (o[e, par, a] if par >= 0 else 0.0) + acc
                r = rev_of_body[i]
                for a in range(3):
                    for b in range(3):
                        acc = 0.0
                        for k in range(3):
                            rp = R[e, par, a, k] if par >= 0 else (1.0 if a == k else 0.0)
                            acc += rp * offsets[i, k, b]
                        Iw[e, i, a, b] = acc  # scratch: parent @ offset
                if r >= 0:
                    cq = np.cos(coords[e, r])
                    sq = np.sin(coords[e, r])
                    ax = axes[r]
                    # Rodrigues: rot = I c + (1-c) aa^T + s [a]x
                    for a in range(3):
                        for b in range(3):
                            rod = (1.0 - cq) * ax[a] * ax[b]
                            if a == b:
                                rod += cq
                            rot_ab = rod
                            if a == 0 and b == 1:
                                rot_ab += -sq * ax[2]
                            elif a == 0 and b == 2:
                                rot_ab += sq * ax[1]
                            elif a == 1 and b == 0:
                                rot_ab += sq * ax[2]
                            elif a == 1 and b == 2:
                                rot_ab += -sq * ax[0]
                            elif a == 2 and b == 0:
                                rot_ab += -sq * ax[1]
                            elif a == 2 and b == 1:
                                rot_ab += sq * ax[0]
                            J_v[e, i, a, b] = rot_ab  # scratch
                    for a in range(3):
                        for b in range(3):
                            acc = 0.0
                            for k in range(3):
                                acc += Iw[e, i, a, k] * J_v[e, i, k, b]
                            R[e, i, a, b] = acc
                else:
                    for a in range(3):
                        for b in range(3):
                            R[e, i, a, b] = Iw[e, i, a, b]
            # world COM
            for a in range(3):
                acc = o[e, i, a]
                for b in range(3):
                    acc += R[e, i, a, b] * coms[e, i, b]
                com_w[e, i, a] = acc

        # world joint axes
        for rj in range(nrev):
            body = -1
            for i in range(nb):
                if rev_of_body[i] == rj:
                    body = i
                    break
            for a in range(3):
                acc = 0.0
                for b in range(3):
                    acc += R[e, body, a, b] * axes[rj, b]
                axis_w[e, rj, a] = acc

        # Jacobians
        for i in range(nb):
            for a in range(3):
                for d in range(ndof):
                    J_v[e, i, a, d] = 0.0
                    J_w[e, i, a, d] = 0.0
            if free_base:
                for a in range(3):
                    J_v[e, i, a, a] = 1.0
                    J_w[e, i, a, 3 + a] = 1.0
                # -skew(com - r_b) columns for base angular velocity
                rx = com_w[e, i, 0] - base_o[e, 0]
                ry = com_w[e, i, 1] - base_o[e, 1]
                rz = com_w[e, i, 2] - base_o[e, 2]
                J_v[e, i, 0, 4] = rz
                J_v[e, i, 0, 5] = -ry
                J_v[e, i, 1, 3] = -rz
                J_v[e, i, 1, 5] = rx
                J_v[e, i, 2, 3] = ry
                J_v[e, i, 2, 4] = -rx
            for rj in range(nrev):
                if not subtree[i, rj]:
                    continue
                d = rev_dofs[rj]
                jb = -1
                for bidx in range(nb):
                    if rev_of_body[bidx] == rj:
                        jb = bidx
                        break
                px = com_w[e, i, 0] - o[e, jb, 0]
                py = com_w[e, i, 1] - o[e, jb, 1]
                pz = com_w[e, i, 2] - o[e, jb, 2]
                ax, ay, az = axis_w[e, rj, 0], axis_w[e, rj, 1], axis_w[e, rj, 2]
                J_v[e, i, 0, d] = ay * pz - az * py
                J_v[e, i, 1, d] = az * px - ax * pz
                J_v[e, i, 2, d] = ax * py - ay * px
                J_w[e, i, 0, d] = ax
                J_w[e, i, 1, d] = ay
                J_w[e, i, 2, d] = az

        # world inertia
        for i in range(nb):
            for a in range(3):
                for b in range(3):
                    acc = 0.0
                    for k in range(3):
                        rik = 0.0
                        for m in range(3):
                            rik += R[e, i, a, m] * inertias[e, i, m, k]
                        acc += rik * R[e, i, b, k]
                    Iw[e, i, a, b] = acc

        # momentum matrix A = sum_i [m J_v ; Iw J_w + c x (m J_v)]
        for x in range(6):
            for d in range(ndof):
                A[e, x, d] = 0.0
        for i in range(nb):
            mi = masses[e, i]
            cx, cy, cz = com_w[e, i, 0], com_w[e, i, 1], com_w[e, i, 2]
            for d in range(ndof):
                jx = mi * J_v[e, i, 0, d]
                jy = mi * J_v[e, i, 1, d]
                jz = mi * J_v[e, i, 2, d]
                A[e, 0, d] += jx
                A[e, 1, d] += jy
                A[e, 2, d] += jz
                wx = (Iw[e, i, 0, 0] * J_w[e, i, 0, d] + Iw[e, i, 0, 1] * J_w[e, i, 1, d]
                      + Iw[e, i, 0, 2] * J_w[e, i, 2, d])
                wy = (Iw[e, i, 1, 0] * J_w[e, i, 0, d] + Iw[e, i, 1, 1] * J_w[e, i, 1, d]
                      + Iw[e, i, 1, 2] * J_w[e, i, 2, d])
                wz = (Iw[e, i, 2, 0] * J_w[e, i, 0, d] + Iw[e, i, 2, 1] * J_w[e, i, 1, d]
                      + Iw[e, i, 2, 2] * J_w[e, i, 2, d])
                A[e, 3, d] += wx + cy * jz - cz * jy
                A[e, 4, d] += wy + cz * jx - cx * jz
                A[e, 5, d] += wz + cx * jy - cy * jx


@njit(cache=True, fastmath=False)
def dyn_kernel(parents, rev_of_body, rev_dofs, free_base, g,
               masses, coms, inertias, base_o,
               R, o, com_w, axis_w, J_v, J_w, Iw,
               u, coords_qd, tau_gen,
               M, rhs, W_ext, omega, vcom):
    """Mass matrix, bias forces, gravity: fills M, rhs = Q - h, W_ext, and the
    per-body spatial velocities."""
    n = u.shape[0]
    nb = parents.shape[0]
    ndof = u.shape[1]

    for e in range(n):
        # body velocities from Jacobians
        for i in range(nb):
            for a in range(3):
                sv = 0.0
                sw = 0.0
                for d in range(ndof):
                    sv += J_v[e, i, a, d] * u[e, d]
                    sw += J_w[e, i, a, d] * u[e, d]
                vcom[e, i, a] = sv
                omega[e, i, a] = sw

        # bias accelerations with zero generalized acceleration
        alpha = np.zeros((nb, 3))
        acom = np.zeros((nb, 3))
        for i in range(nb):
            par = parents[i]
            if par < 0 and free_base:
                wx, wy, wz = omega[e, i, 0], omega[e, i, 1], omega[e, i, 2]
                rx = com_w[e, i, 0] - base_o[e, 0]
                ry = com_w[e, i, 1] - base_o[e, 1]
                rz = com_w[e, i, 2] - base_o[e, 2]
                c1x = wy * rz - wz * ry
                c1y = wz * rx - wx * rz
                c1z = wx * ry - wy * rx
                acom[i, 0] = wy * c1z - wz * c1y
                acom[i, 1] = wz * c1x - wx * c1z
                acom[i, 2] = wx * c1y - wy * c1x
                continue
            if par >= 0:
                opx, opy, opz = omega[e, par, 0], omega[e, par, 1], omega[e, par, 2]
                apx, apy, apz = alpha[par, 0], alpha[par, 1], alpha[par, 2]
                rx = o[e, i, 0] - com_w[e, par, 0]
                ry = o[e, i, 1] - com_w[e, par, 1]
                rz = o[e, i, 2] - com_w[e, par, 2]
                wxr_x = opy * rz - opz * ry
                wxr_y = opz * rx - opx * rz
                wxr_z = opx * ry - opy * rx
                anc_x = acom[par, 0] + (apy * rz - apz * ry) + (opy * wxr_z - opz * wxr_y)
                anc_y = acom[par, 1] + (apz * rx - apx * rz) + (opz * wxr_x - opx * wxr_z)
                anc_z = acom[par, 2] + (apx * ry - apy * rx) + (opx * wxr_y - opy * wxr_x)
            else:
                opx = opy = opz = 0.0
                apx = apy = apz = 0.0
                anc_x = anc_y = anc_z = 0.0
            r = rev_of_body[i]
            if r >= 0:
                qd_i = coords_qd[e, r]
                sx = axis_w[e, r, 0] * qd_i
                sy = axis_w[e, r, 1] * qd_i
                sz = axis_w[e, r, 2] * qd_i
                alpha[i, 0] = apx + opy * sz - opz * sy
                alpha[i, 1] = apy + opz * sx - opx * sz
                alpha[i, 2] = apz + opx * sy - opy * sx
            else:
                alpha[i, 0] = apx
                alpha[i, 1] = apy
                alpha[i, 2] = apz
            rx = com_w[e, i, 0] - o[e, i, 0]
            ry = com_w[e, i, 1] - o[e, i, 1]
            rz = com_w[e, i, 2] - o[e, i, 2]
            wx, wy, wz = omega[e, i, 0], omega[e, i, 1], omega[e, i, 2]
            wxr_x = wy * rz - wz * ry
            wxr_y = wz * rx - wx * rz
            wxr_z = wx * ry - wy * rx
            acom[i, 0] = anc_x + (alpha[i, 1] * rz - alpha[i, 2] * ry) + (wy * wxr_z - wz * wxr_y)
            acom[i, 1] = anc_y + (alpha[i, 2] * rx - alpha[i, 0] * rz) + (wz * wxr_x - wx * wxr_z)
            acom[i, 2] = anc_z + (alpha[i, 0] * ry - alpha[i, 1] * rx) + (wx * wxr_y - wy * wxr_x)

        # generalized rhs: joint torques already in tau_gen; add gravity minus bias
        for d in range(ndof):
            rhs[e, d] = tau_gen[e, d]
        for x in range(6):
            W_ext[e, x] = 0.0

        for i in range(nb):
            mi = masses[e, i]
            wx, wy, wz = omega[e, i, 0], omega[e, i, 1], omega[e, i, 2]
            # f = m * (g_vec - acom); gravity along -z
            fx = mi * (-acom[i, 0])
            fy = mi * (-acom[i, 1])
            fz = mi * (-g - acom[i, 2])
            # Iw @ omega
            hx = Iw[e, i, 0, 0] * wx + Iw[e, i, 0, 1] * wy + Iw[e, i, 0, 2] * wz
            hy = Iw[e, i, 1, 0] * wx + Iw[e, i, 1, 1] * wy + Iw[e, i, 1, 2] * wz
            hz = Iw[e, i, 2, 0] * wx + Iw[e, i, 2, 1] * wy + Iw[e, i, 2, 2] * wz
            # tq = -(Iw @ alpha + w x Iw w)
            tx = -(Iw[e, i, 0, 0] * alpha[i, 0] + Iw[e, i, 0, 1] * alpha[i, 1]
                   + Iw[e, i, 0, 2] * alpha[i, 2] + wy * hz - wz * hy)
            ty = -(Iw[e, i, 1, 0] * alpha[i, 0] + Iw[e, i, 1, 1] * alpha[i, 1]
                   + Iw[e, i, 1, 2] * alpha[i, 2] + wz * hx - wx * hz)
            tz = -(Iw[e, i, 2, 0] * alpha[i, 0] + Iw[e, i, 2, 1] * alpha[i, 1]
                   + Iw[e, i, 2, 2] * alpha[i, 2] + wx * hy - wy * hx)
            for d in range(ndof):
                rhs[e, d] += (J_v[e, i, 0, d] * fx + J_v[e, i, 1, d] * fy + J_v[e, i, 2, d] * fz
                              + J_w[e, i, 0, d] * tx + J_w[e, i, 1, d] * ty + J_w[e, i, 2, d] * tz)
            # external wrench: gravity only here (contacts added by caller)
            W_ext[e, 2] += -mi * g
            W_ext[e, 3] += com_w[e, i, 1] * (-mi * g)
            W_ext[e, 4] += -com_w[e, i, 0] * (-mi * g)

        # mass matrix (symmetric)
        for a in range(ndof):
            for b in range(a, ndof):
                acc = 0.0
                for i in range(nb):
                    mi = masses[e, i]
                    acc += mi * (J_v[e, i, 0, a] * J_v[e, i, 0, b]
                                 + J_v[e, i, 1, a] * J_v[e, i, 1, b]
                                 + J_v[e, i, 2, a] * J_v[e, i, 2, b])
                    i0 = (Iw[e, i, 0, 0] * J_w[e, i, 0, b] + Iw[e, i, 0, 1] * J_w[e, i, 1, b]
                          + Iw[e, i, 0, 2] * J_w[e, i, 2, b])
                    i1 = (Iw[e, i, 1, 0] * J_w[e, i, 0, b] + Iw[e, i, 1, 1] * J_w[e, i, 1, b]
                          + Iw[e, i, 1, 2] * J_w[e, i, 2, b])
                    i2 = (Iw[e, i, 2, 0] * J_w[e, i, 0, b] + Iw[e, i, 2, 1] * J_w[e, i, 1, b]
                          + Iw[e, i, 2, 2] * J_w[e, i, 2, b])
                    acc += J_w[e, i, 0, a] * i0 + J_w[e, i, 1, a] * i1 + J_w[e, i, 2, a] * i2
                M[e, a, b] = acc
                M[e, b, a] = acc


@njit(cache=True, fastmath=False)
def contact_kernel(pt_body, pt_local, pt_radius, pt_geom,
                   kp, kd, mu, kt,
                   R, o, com_w, omega, vcom, J_v, J_w,
                   forces, x_pts, per_geom, rhs, W_ext):
    """Penalty contact forces at candidate points; accumulates generalized
    forces and the external wrench, and aggregates per-geom forces."""
    n = R.shape[0]
    P = pt_body.shape[0]
    ndof = J_v.shape[3]
    for e in range(n):
        for p in range(P):
            i = pt_body[p]
            # world point
            xx = o[e, i, 0]
            xy = o[e, i, 1]
            xz = o[e, i, 2]
            for b in range(3):
                xx += R[e, i, 0, b] * pt_local[p, b]
                xy += R[e, i, 1, b] * pt_local[p, b]
                xz += R[e, i, 2, b] * pt_local[p, b]
            x_pts[e, p, 0] = xx
            x_pts[e, p, 1] = xy
            x_pts[e, p, 2] = xz
            depth = pt_radius[p] - xz
            if depth <= 0.0:
                forces[e, p, 0] = 0.0
                forces[e, p, 1] = 0.0
                forces[e, p, 2] = 0.0
                continue
            rx = xx - com_w[e, i, 0]
            ry = xy - com_w[e, i, 1]
            rz = xz - com_w[e, i, 2]
            wx, wy, wz = omega[e, i, 0], omega[e, i, 1], omega[e, i, 2]
            vx = vcom[e, i, 0] + wy * rz - wz * ry
            vy = vcom[e, i, 1] + wz * rx - wx * rz
            vz = vcom[e, i, 2] + wx * ry - wy * rx
            fn = kp * depth - kd * vz
            if fn < 0.0:
                fn = 0.0
            vt = np.sqrt(vx * vx + vy * vy)
            ft = kt * vt
            cap = mu * fn
            if ft > cap:
                ft = cap
            if vt > 1e-9:
                fx = -ft * vx / vt
                fy = -ft * vy / vt
            else:
                fx = 0.0
                fy = 0.0
            forces[e, p, 0] = fx
            forces[e, p, 1] = fy
            forces[e, p, 2] = fn
            # generalized force via the point Jacobian
            for d in range(ndof):
                jpx = J_v[e, i, 0, d] + (J_w[e, i, 1, d] * rz - J_w[e, i, 2, d] * ry)
                jpy = J_v[e, i, 1, d] + (J_w[e, i, 2, d] * rx - J_w[e, i, 0, d] * rz)
                jpz = J_v[e, i, 2, d] + (J_w[e, i, 0, d] * ry - J_w[e, i, 1, d] * rx)
                rhs[e, d] += jpx * fx + jpy * fy + jpz * fn
            W_ext[e, 0] += fx
            W_ext[e, 1] += fy
            W_ext[e, 2] += fn
            W_ext[e, 3] += xy * fn - xz * fy
            W_ext[e, 4] += xz * fx - xx * fn
            W_ext[e, 5] += xx * fy - xy * fx
        for g_ in range(per_geom.shape[1]):
            per_geom[e, g_, 0] = 0.0
            per_geom[e, g_, 1] = 0.0
            per_geom[e, g_, 2] = 0.0
        for p in range(P):
            g_ = pt_geom[p]
            per_geom[e, g_, 0] += forces[e, p, 0]
            per_geom[e, g_, 1] += forces[e, p, 1]
            per_geom[e, g_, 2] += forces[e, p, 2]
