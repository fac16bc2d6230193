"""Kinematic model of the 6-DoF cable-driven end-effector.

Joint order: radial slide l (mm), base turn theta (deg), vertical slide z
(mm), gimbal pitch alpha (deg), yaw beta (deg), roll gamma (deg). The tool
pose is Rz(theta) * Tx(l) * Tz(z) * Rx(alpha) * Ry(beta) * Rz(gamma); all
joints zero is the identity pose at the workspace origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..geom import Pose, rot_x, rot_y, rot_z

__all__ = ["JointState", "JointLimits", "BacklashModel", "JOINT_NAMES",
           "forward_kinematics", "actuate"]

JOINT_NAMES = ("l", "theta", "z", "alpha", "beta", "gamma")

# Prismatic joints are mm, revolute are degrees.
REVOLUTE = ("theta", "alpha", "beta", "gamma")


@dataclass(frozen=True)
class JointState:
    l: float = 0.0
    theta: float = 0.0
    z: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.l, self.theta, self.z, self.alpha, self.beta, self.gamma])

    @classmethod
    def from_array(cls, v) -> "JointState":
        v = np.asarray(v, dtype=np.float64).reshape(6)
        return cls(*[float(x) for x in v])


@dataclass(frozen=True)
class JointLimits:
    l: tuple = (-16.0, 16.0)
    theta: tuple = (-100.0, 100.0)
    z: tuple = (-8.0, 4.0)
    alpha: tuple = (-15.0, 15.0)
    beta: tuple = (-25.0, 25.0)
    gamma: tuple = (-100.0, 100.0)

    def bounds(self, name: str) -> tuple:
        return getattr(self, name)

    def contains(self, j: JointState, tol: float = 1e-9) -> bool:
        return all(
            self.bounds(n)[0] - tol <= getattr(j, n) <= self.bounds(n)[1] + tol
            for n in JOINT_NAMES
        )

    def clamp(self, j: JointState) -> JointState:
        vals = {
            n: float(np.clip(getattr(j, n), *self.bounds(n))) for n in JOINT_NAMES
        }
        return JointState(**vals)

    def lo_hi_arrays(self) -> tuple:
        lo = np.array([self.bounds(n)[0] for n in JOINT_NAMES])
        hi = np.array([self.bounds(n)[1] for n in JOINT_NAMES])
        return lo, hi


def forward_kinematics(j: JointState) -> Pose:
    th, al, be, ga = (np.radians(getattr(j, n)) for n in REVOLUTE)
    R = rot_z(th) @ rot_x(al) @ rot_y(be) @ rot_z(ga)
    t = rot_z(th) @ np.array([j.l, 0.0, j.z])
    return Pose(R, t, validate=False)


@dataclass
class BacklashModel:
    """Cable-drive play: a direction reversal loses up to the deadband of
    travel. The tension regulator pre-winds slack cables when the modeled
    sensor reads below ``tension_threshold``, shrinking the effective
    deadband by ``compensation``; the vertical slide has no regulator."""

    deadband: dict = field(
        default_factory=lambda: {
            "l": 0.3, "theta": 1.5, "z": 0.3, "alpha": 1.5, "beta": 1.5, "gamma": 1.5,
        }
    )
    regulator_enabled: bool = True
    tension_threshold: float = 2.5  # N
    compensation: float = 0.75

    def __post_init__(self):
        if any(v < 0 for v in self.deadband.values()):
            raise ValueError("deadband must be non-negative")

    def effective_deadband(self, name: str) -> float:
        band = self.deadband.get(name, 0.0)
        if self.regulator_enabled and name != "z":
            band *= 1.0 - self.compensation
        return band

    @classmethod
    def ideal(cls) -> "BacklashModel":
        return cls(deadband={n: 0.0 for n in JOINT_NAMES}, regulator_enabled=False)


def actuate(
    current: JointState,
    command: JointState,
    model: BacklashModel,
    limits: JointLimits | None = None,
) -> JointState:
    """Move each joint through its play window toward the commanded value.

    The output tracks the command with a lag of half the effective deadband;
    a command reversal smaller than the deadband produces no motion.
    """
    limits = limits or JointLimits()
    if not limits.contains(command):
        raise ValueError(f"command {command} outside joint limits")
    out = {}
    for name in JOINT_NAMES:
        b = model.effective_deadband(name) / 2.0
        cur = getattr(current, name)
        cmd = getattr(command, name)
        out[name] = min(max(cur, cmd - b), cmd + b)
    return limits.clamp(JointState(**out))
