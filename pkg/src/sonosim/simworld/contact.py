"""Probe-tissue contact: linear spring normal force, Coulomb-style friction
opposing the last tip motion, and a contact-patch lever-arm torque. The
wrench is expressed in the probe-local frame and is zero out of contact."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geom import Pose
from .phantom import PhantomVolume

__all__ = ["Wrench", "contact_wrench"]


@dataclass
class Wrench:
    force: np.ndarray  # N, probe-local
    torque: np.ndarray  # N*mm, probe-local

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=np.float64).reshape(3)
        self.torque = np.asarray(self.torque, dtype=np.float64).reshape(3)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    @classmethod
    def from_array(cls, v) -> "Wrench":
        v = np.asarray(v, dtype=np.float64).reshape(6)
        return cls(force=v[:3].copy(), torque=v[3:].copy())

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(force=np.zeros(3), torque=np.zeros(3))


def penetration_depth(volume: PhantomVolume, probe: Pose) -> float:
    tip = probe.translation
    s = float(volume.surface_height(tip[0], tip[1]))
    return max(0.0, s - tip[2])


def contact_wrench(volume: PhantomVolume, probe: Pose, last_motion=None) -> Wrench:
    """Measured wrench at the probe for the current pose.

    ``last_motion`` is an optional world-frame tip displacement (mm) used for
    the friction direction; without it the tangential term is zero.
    """
    c = volume.config
    d = penetration_depth(volume, probe)
    if d <= 0.0:
        return Wrench.zero()

    normal_force = c.contact_stiffness * d
    f_world = np.array([0.0, 0.0, normal_force])

    if last_motion is not None:
        tangent = np.asarray(last_motion, dtype=np.float64).copy()
        tangent[2] = 0.0
        norm = np.linalg.norm(tangent)
        if norm > 1e-9:
            f_world -= c.friction * normal_force * (tangent / norm)

    R = probe.rotation
    f_local = R.T @ f_world

    # Contact patch shifts toward the low edge of the tilted probe face.
    up_local = R.T @ np.array([0.0, 0.0, 1.0])
    tilt = np.array([up_local[0], up_local[1], 0.0])
    offset_local = -c.probe_radius * tilt
    torque_local = np.cross(offset_local, f_local)

    return Wrench(force=f_local, torque=torque_local)
