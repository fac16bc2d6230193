"""Training-pair extraction: observation windows harmonized to the decision
step plus the (m, 12) future action chunk in the decision-pose frame."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geom import Pose, rel_pose, to_vec6
from ..policy.window import ObservationWindow
from .dataset import DemoDataset

__all__ = ["TrainingPair", "make_training_pairs"]


@dataclass
class TrainingPair:
    demo: int
    t: int
    window: ObservationWindow  # images empty; step_ids index into the demo
    chunk: np.ndarray  # (m, 12): rel-pose vec6 + wrench per future step


def make_training_pairs(ds: DemoDataset, T: int, m: int) -> list:
    """One pair per demo step; short histories left-pad with the first
    observation and past-the-end chunk rows repeat the final step."""
    if T < 1 or m < 1:
        raise ValueError("T and m must be >= 1")
    pairs = []
    for d_i, demo in enumerate(ds.demos):
        poses = [Pose.from_matrix(p) for p in demo.poses]
        wrench = demo.wrench.astype(np.float64)
        n = len(poses)
        for t in range(n):
            lo = max(0, t - T + 1)
            ids = np.concatenate(
                [np.zeros(T - (t - lo + 1), dtype=int), np.arange(lo, t + 1)]
            )
            ref = poses[t]
            posevec = np.stack(
                [to_vec6(rel_pose(poses[i], ref)).as_array() for i in ids]
            )
            window = ObservationWindow(
                images=None,
                posevec=posevec,
                wrench=wrench[ids],
                step_ids=ids,
            )
            chunk = np.empty((m, 12))
            for i in range(1, m + 1):
                j = min(t + i, n - 1)
                chunk[i - 1, :6] = to_vec6(rel_pose(poses[j], ref)).as_array()
                chunk[i - 1, 6:] = wrench[j]
            pairs.append(TrainingPair(demo=d_i, t=t, window=window, chunk=chunk))
    return pairs
