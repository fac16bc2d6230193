"""Scripted expert: a clamped geodesic servo toward the ground-truth plane.

Each step moves at most 5 mm and 3 degrees along the relative-pose geodesic,
with optional zero-mean jitter (0.5 mm / 0.5 deg), and commands an axial
force ramping from 1 N far out (> 30 mm) to 3 N on the target plane.
Success is translation error < 2 mm and angular error < 2 deg.
"""

from __future__ import annotations

import numpy as np

from ..geom import (
    Pose,
    compose,
    from_vec6,
    matrix_to_rotvec,
    pose_error,
    rel_pose,
)
from ..simworld import TargetPlane, Wrench

__all__ = ["SUCCESS_TOL", "expert_action", "expert_success", "ExpertPolicy"]

SUCCESS_TOL = (2.0, 2.0)  # mm, deg
MAX_STEP_MM = 5.0
MAX_STEP_DEG = 3.0
JITTER_MM = 0.5
JITTER_DEG = 0.5
FORCE_FAR_MM = 30.0
FORCE_NEAR = 3.0  # N, on the plane
FORCE_FAR = 1.0  # N, far from the plane


def expert_force(distance_mm: float) -> float:
    frac = min(distance_mm, FORCE_FAR_MM) / FORCE_FAR_MM
    return FORCE_NEAR - (FORCE_NEAR - FORCE_FAR) * frac


def expert_action(target: TargetPlane, current: Pose, rng=None):
    """(target pose, target wrench) for one servo step toward the plane.

    The force command is evaluated at the commanded pose's distance to the
    plane (the state the step ends in), so the admittance depth tracks the
    approach instead of lagging it by one step.
    """
    rel = rel_pose(target.gt_pose, current)
    dt = rel.translation
    dist = float(np.linalg.norm(dt))
    if dist > MAX_STEP_MM:
        dt = dt * (MAX_STEP_MM / dist)
    rv = matrix_to_rotvec(rel.rotation)
    ang = np.degrees(np.linalg.norm(rv))
    if ang > MAX_STEP_DEG:
        rv = rv * (MAX_STEP_DEG / ang)
    if rng is not None:
        dt = dt + rng.normal(0.0, JITTER_MM, 3)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        rv = rv + axis * np.radians(rng.normal(0.0, JITTER_DEG))
    step = from_vec6(np.concatenate([dt, rv]))
    pose_cmd = compose(current, step)
    dist_after = max(0.0, dist - float(np.linalg.norm(dt)))
    force_z = expert_force(dist_after)
    return pose_cmd, Wrench(force=[0.0, 0.0, force_z], torque=[0.0, 0.0, 0.0])


def expert_success(target: TargetPlane, current: Pose) -> bool:
    trans, ang = pose_error(current, target.gt_pose)
    return trans < SUCCESS_TOL[0] and ang < SUCCESS_TOL[1]


class ExpertPolicy:
    """Oracle with the policy interface used by the evaluation harness."""

    def __init__(self, target: TargetPlane, jitter: bool = False):
        self.target = target
        self.jitter = jitter

    def reset(self):
        pass

    def act(self, history, tcp_pose: Pose, rng=None):
        step_rng = rng if (self.jitter and rng is not None) else None
        return [expert_action(self.target, tcp_pose, step_rng)]
