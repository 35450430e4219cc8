"""Per-episode domain randomization of the robot's physical parameters."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..model import RobotModel


@dataclass
class DomainRandomization:
    enabled: bool
    mass_scale: tuple[float, float]
    com_offset: float          # m, uniform cube half-width
    joint_friction: tuple[float, float]
    gain_scale: tuple[float, float]

    @classmethod
    def from_config(cls, cfg: dict) -> "DomainRandomization":
        dr = cfg["tasks"]["domain_randomization"]
        out = cls(
            enabled=bool(dr["enabled"]),
            mass_scale=tuple(dr["mass_scale"]),
            com_offset=float(dr["com_offset_m"]),
            joint_friction=tuple(dr["joint_friction_range"]),
            gain_scale=tuple(dr["gain_scale"]),
        )
        if out.mass_scale[0] <= 0 or out.mass_scale[0] > out.mass_scale[1]:
            raise ValueError("mass scale range must be positive and ordered")
        if out.joint_friction[0] < 0 or out.joint_friction[0] > out.joint_friction[1]:
            raise ValueError("joint friction range must be non-negative and ordered")
        if out.gain_scale[0] <= 0 or out.gain_scale[0] > out.gain_scale[1]:
            raise ValueError("gain scale range must be positive and ordered")
        return out

    def disabled(self) -> "DomainRandomization":
        return replace(self, enabled=False)


def sample_params(model: RobotModel, dr: DomainRandomization, rng: np.random.Generator,
                  n: int):
    """Randomized physical parameters for n environments.

    Returns (masses, coms, inertias, joint_friction, gain_scale); masses scale
    per link with inertias following (uniform density), COMs shift within a
    cube, PD gains get one multiplicative factor per env.
    """
    nb = len(model.masses)
    if not dr.enabled:
        masses = np.broadcast_to(model.masses, (n, nb)).copy()
        coms = np.broadcast_to(model.coms, (n, nb, 3)).copy()
        inertias = np.broadcast_to(model.inertias, (n, nb, 3, 3)).copy()
        return masses, coms, inertias, None, np.ones((n, 1))
    scale = rng.uniform(dr.mass_scale[0], dr.mass_scale[1], size=(n, nb))
    masses = model.masses * scale
    coms = model.coms + rng.uniform(-dr.com_offset, dr.com_offset, size=(n, nb, 3))
    inertias = model.inertias * scale[:, :, None, None]
    friction = rng.uniform(dr.joint_friction[0], dr.joint_friction[1], size=(n, 9))
    gains = rng.uniform(dr.gain_scale[0], dr.gain_scale[1], size=(n, 1))
    return masses, coms, inertias, friction, gains


def randomize_domain(model: RobotModel, dr: DomainRandomization,
                     rng: np.random.Generator) -> RobotModel:
    """A randomized copy of the model (single instance, spec operation)."""
    masses, coms, inertias, _, _ = sample_params(model, dr, rng, 1)
    if np.any(masses <= 0):
        raise ValueError("randomized masses must stay positive")
    out = replace(
        model,
        masses=masses[0],
        coms=coms[0],
        inertias=inertias[0],
        body_mass=float(masses[0, 0]),
        total_mass=float(masses[0].sum()),
    )
    eigs = np.linalg.eigvalsh(out.inertias)
    if np.any(eigs <= 0):
        raise ValueError("randomized inertia lost positive definiteness")
    return out
