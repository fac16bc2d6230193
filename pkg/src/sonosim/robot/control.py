"""Simulated robot: owns the achieved joint state (the backlash hysteresis
state) and executes Cartesian pose+force commands against a phantom world
via IK, the cable play model, and admittance force tracking on the vertical
slide."""

from __future__ import annotations

import numpy as np

from ..geom import Pose
from ..simworld import PhantomVolume, Wrench, contact_wrench
from .ik import NotReachable, inverse_kinematics
from .model import BacklashModel, JointLimits, JointState, actuate, forward_kinematics

__all__ = ["Robot", "ForceUnreachable", "NotReachable"]

FORCE_TOL = 0.2  # N
_MAX_ADMITTANCE_ITERS = 25


class ForceUnreachable(RuntimeError):
    """Vertical-slide limit reached before the commanded contact force."""

    def __init__(self, achieved, message):
        self.achieved = achieved
        super().__init__(message)


class Robot:
    def __init__(
        self,
        world: PhantomVolume,
        backlash: BacklashModel | None = None,
        limits: JointLimits | None = None,
        joints: JointState | None = None,
    ):
        self.world = world
        self.backlash = backlash or BacklashModel.ideal()
        self.limits = limits or JointLimits()
        self.joints = joints or JointState()
        self._last_tip = forward_kinematics(self.joints).translation.copy()
        self._last_motion = None

    # ------------------------------------------------------------------
    def pose(self) -> Pose:
        return forward_kinematics(self.joints)

    def measure(self) -> Wrench:
        return contact_wrench(self.world, self.pose(), self._last_motion)

    def _apply(self, command: JointState):
        self.joints = actuate(self.joints, command, self.backlash, self.limits)
        tip = forward_kinematics(self.joints).translation
        motion = tip - self._last_tip
        if np.linalg.norm(motion) > 1e-9:
            self._last_motion = motion
        self._last_tip = tip.copy()

    # ------------------------------------------------------------------
    def execute_cartesian(self, target_pose: Pose, target_wrench: Wrench):
        """Track the pose, then offset the vertical slide until the measured
        axial force matches the command within FORCE_TOL.

        Returns (joints, achieved pose, measured wrench). NotReachable and
        ForceUnreachable carry the best-effort achieved triple so callers can
        continue an episode after logging the fault.
        """
        try:
            cmd = inverse_kinematics(target_pose, seed=self.joints, limits=self.limits)
            ik_error = None
        except NotReachable as exc:
            cmd = exc.joints
            ik_error = exc
        self._apply(cmd)

        target_fz = float(target_wrench.force[2])
        stiffness = self.world.config.contact_stiffness
        z_lo, z_hi = self.limits.z
        force_fault = None
        cmd_z = cmd.z
        for _ in range(_MAX_ADMITTANCE_ITERS):
            measured = self.measure()
            err = target_fz - float(measured.force[2])
            if abs(err) <= FORCE_TOL:
                break
            at_lo = cmd_z <= z_lo + 1e-9 and err > 0
            at_hi = cmd_z >= z_hi - 1e-9 and err < 0
            if at_lo or at_hi:
                force_fault = f"force {target_fz:.2f} N unreachable within z range"
                break
            cmd_z = float(np.clip(cmd_z - err / stiffness, z_lo, z_hi))
            self._apply(JointState(cmd.l, cmd.theta, cmd_z, cmd.alpha, cmd.beta, cmd.gamma))
        else:
            measured = self.measure()
            if abs(target_fz - float(measured.force[2])) > FORCE_TOL:
                force_fault = "admittance iteration budget exhausted"

        achieved = (self.joints, self.pose(), self.measure())
        if ik_error is not None:
            ik_error.achieved = achieved
            raise ik_error
        if force_fault is not None:
            raise ForceUnreachable(achieved, force_fault)
        return achieved
