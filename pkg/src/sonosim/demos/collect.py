"""Demonstration collection: drive the scripted expert through the simulator
from random reachable start poses and record (image, pose, wrench) steps."""

from __future__ import annotations

import numpy as np

from ..geom import Pose, rotvec_to_matrix, rot_z
from ..robot import BacklashModel, ForceUnreachable, NotReachable, Robot, inverse_kinematics
from ..simworld import (
    ImageSpec,
    PhantomVolume,
    PlaneId,
    TASK_DEMO_COUNTS,
    render_slice,
)
from ..policy.window import ObservationStep
from .dataset import DemoDataset, DemoRecord
from .expert import expert_action, expert_success

__all__ = ["sample_start_pose", "observe", "run_expert_demo", "collect_demos"]

START_RADIUS_MM = 13.0
START_DEPTH_MM = 2.0  # light initial contact
START_YAW_SPREAD_DEG = 60.0
START_TILT_MAX_DEG = 10.0
MAX_DEMO_STEPS = 120
DWELL_STEPS = 8  # recorded hold steps on the plane after reaching it
RESAMPLE_BUDGET = 5


def sample_start_pose(target, rng: np.random.Generator, max_tries: int = 50) -> Pose:
    """Uniform over the contact disc; yaw within +/-60 deg of the target's,
    tilt up to 10 deg off the surface normal. Draws outside the robot's
    orientation workspace (base turn + roll cannot realize every yaw at
    every bearing) are rejected and redrawn."""
    for _ in range(max_tries):
        r = START_RADIUS_MM * np.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2 * np.pi)
        gt_r = target.gt_pose.rotation
        gt_yaw = np.arctan2(gt_r[1, 0], gt_r[0, 0])
        yaw = gt_yaw + np.radians(rng.uniform(-START_YAW_SPREAD_DEG, START_YAW_SPREAD_DEG))
        tilt_angle = np.radians(rng.uniform(0.0, START_TILT_MAX_DEG))
        tilt_dir = rng.uniform(0.0, 2 * np.pi)
        axis = np.array([np.cos(tilt_dir), np.sin(tilt_dir), 0.0])
        rot = rotvec_to_matrix(axis * tilt_angle) @ rot_z(yaw)
        pose = Pose(rot, [r * np.cos(phi), r * np.sin(phi), -START_DEPTH_MM])
        try:
            inverse_kinematics(pose)
            return pose
        except NotReachable:
            continue
    raise RuntimeError("could not sample a reachable start pose")


def observe(robot: Robot, world: PhantomVolume, spec: ImageSpec) -> ObservationStep:
    pose = robot.pose()
    return ObservationStep(
        image=render_slice(world, pose, spec).pixels,
        pose=pose,
        wrench=robot.measure(),
    )


def run_expert_demo(world, target, start: Pose, rng, spec: ImageSpec,
                    jitter: bool = True, max_steps: int = MAX_DEMO_STEPS,
                    dwell_steps: int = DWELL_STEPS):
    """One closed-loop expert rollout; returns (steps, success).

    After reaching the plane the expert dwells for ``dwell_steps`` more
    recorded steps (holding pose and the 3 N contact force, micro-correcting
    any jitter). The dwell phase is what teaches a policy that the plane is
    an absorbing state rather than one more waypoint.
    """
    joints = inverse_kinematics(start)
    robot = Robot(world, BacklashModel.ideal(), joints=joints)
    steps = [observe(robot, world, spec)]
    success = False
    dwell_left = dwell_steps
    for _ in range(max_steps + dwell_steps):
        pose_cmd, wrench_cmd = expert_action(target, robot.pose(), rng if jitter else None)
        try:
            robot.execute_cartesian(pose_cmd, wrench_cmd)
        except (NotReachable, ForceUnreachable):
            pass  # keep the best-effort motion; the servo re-aims next step
        steps.append(observe(robot, world, spec))
        in_tolerance = expert_success(target, robot.pose())
        if in_tolerance:
            success = True
        if success:
            if dwell_left <= 0 and in_tolerance:
                break
            dwell_left -= 1
    return steps, success


def collect_demos(world: PhantomVolume, task: PlaneId, n: int | None = None,
                  seed: int = 0, spec: ImageSpec | None = None,
                  jitter: bool = True) -> DemoDataset:
    """n successful demonstrations (defaults to the per-task count); failed
    rollouts are discarded and resampled with a fresh seeded stream."""
    task = PlaneId(task)
    if n is None:
        n = TASK_DEMO_COUNTS[task]
    spec = spec or ImageSpec()
    target = world.target(task)
    demos, discarded = [], 0
    for i in range(n):
        for attempt in range(RESAMPLE_BUDGET):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i, attempt]))
            start = sample_start_pose(target, rng)
            try:
                steps, success = run_expert_demo(world, target, start, rng, spec, jitter)
            except NotReachable:
                success = False
            if success:
                demos.append(
                    DemoRecord(
                        images=np.stack([s.image for s in steps]),
                        poses=np.stack([s.pose.matrix() for s in steps]),
                        wrench=np.stack([s.wrench.as_array() for s in steps]),
                        success=True,
                    )
                )
                break
            discarded += 1
        else:
            raise RuntimeError(
                f"demo {i}: resample budget exhausted — is the world misconfigured?"
            )
    meta = {
        "task": task.value,
        "n": n,
        "seed": seed,
        "discarded": discarded,
        "jitter": bool(jitter),
        "image_hw": [spec.height, spec.width],
        "image_extent_mm": [spec.width_mm, spec.depth_mm],
        "phantom_seed": world.config.seed,
        "phantom_config": world.config.as_dict(),
        "phantom_config_hash": world.config_hash(),
    }
    return DemoDataset(task=task.value, demos=demos, meta=meta)
