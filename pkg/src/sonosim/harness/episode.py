"""Closed-loop episode rollout against the simulated world and robot."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..demos.collect import observe
from ..geom import Pose, pose_error
from ..robot import ForceUnreachable, NotReachable, Robot
from ..simworld import (
    DegenerateImageError,
    ImageSpec,
    PhantomVolume,
    TargetPlane,
    image_similarity,
    render_slice,
)

__all__ = ["EpisodeTrace", "run_episode"]


@dataclass
class EpisodeTrace:
    task: str
    seed: int
    start: Pose
    commanded_poses: list = field(default_factory=list)
    commanded_forces: list = field(default_factory=list)
    achieved_poses: list = field(default_factory=list)
    wrenches: list = field(default_factory=list)
    trans_err: list = field(default_factory=list)
    ang_err: list = field(default_factory=list)
    similarity: list = field(default_factory=list)
    faults: list = field(default_factory=list)

    def __len__(self):
        return len(self.achieved_poses)

    def positions(self) -> np.ndarray:
        """Tip path including the start position (the metric's start point)."""
        return np.stack([self.start.translation] + [p.translation for p in self.achieved_poses])

    def initial_errors(self, target: TargetPlane):
        return pose_error(self.start, target.gt_pose)


def run_episode(
    policy,
    world: PhantomVolume,
    robot: Robot,
    target: TargetPlane,
    start: Pose,
    rng,
    max_steps: int = 100,
    spec: ImageSpec | None = None,
    randomize_obs=None,
    seed: int = 0,
) -> EpisodeTrace:
    """Run ``policy`` for exactly ``max_steps`` executed robot steps.

    Evaluation renders clean images (``randomize_obs`` enables noisy
    observation studies). Robot faults are recorded in the trace and the
    episode continues from the best-effort pose; there is no early stopping,
    so traces are step-aligned across methods.
    """
    spec = spec or ImageSpec()
    gt_image = render_slice(world, target.gt_pose, spec)
    stride = getattr(policy, "replan_stride", None) or 1

    def grab():
        obs = observe(robot, world, spec)
        if randomize_obs is not None:
            obs.image = randomize_obs(obs.image, rng)
        return obs

    policy.reset()
    history = [grab()]
    trace = EpisodeTrace(task=target.id.value, seed=seed, start=start)

    while len(trace) < max_steps:
        targets = policy.act(history, robot.pose(), rng)
        for pose_cmd, wrench_cmd in targets[:stride]:
            fault = ""
            try:
                robot.execute_cartesian(pose_cmd, wrench_cmd)
            except (NotReachable, ForceUnreachable) as exc:
                fault = type(exc).__name__
            obs = grab()
            history.append(obs)
            achieved = robot.pose()
            terr, aerr = pose_error(achieved, target.gt_pose)
            try:
                sim = image_similarity(
                    type(gt_image)(obs.image, spec.width_mm, spec.depth_mm), gt_image
                )
            except DegenerateImageError:
                sim = float("nan")
            trace.commanded_poses.append(pose_cmd)
            trace.commanded_forces.append(wrench_cmd.as_array())
            trace.achieved_poses.append(achieved)
            trace.wrenches.append(obs.wrench.as_array())
            trace.trans_err.append(terr)
            trace.ang_err.append(aerr)
            trace.similarity.append(sim)
            trace.faults.append(fault)
            if len(trace) >= max_steps:
                break
    return trace
