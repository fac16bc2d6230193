"""Observation windows, policy hyperparameters, and action normalization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geom import Pose, from_vec6, harmonize, to_vec6
from ..simworld import Wrench

__all__ = ["ObservationStep", "ObservationWindow", "PolicyConfig", "ChunkNormalizer",
           "clamp_rotvec"]


@dataclass
class ObservationStep:
    image: np.ndarray  # (H, W) float32
    pose: Pose  # TCP pose, world frame
    wrench: Wrench  # probe-local


@dataclass
class ObservationWindow:
    """Fixed-length history ending at the decision step.

    Poses are harmonized to the terminal frame and stored as 6-vectors
    (mm, rad); the terminal entry is identically zero. ``step_ids`` keeps
    the source step index of every slot so padded duplicates can share
    image encoding work.
    """

    images: np.ndarray  # (T, H, W) float32
    posevec: np.ndarray  # (T, 6) float64, harmonized
    wrench: np.ndarray  # (T, 6) float64
    step_ids: np.ndarray  # (T,) int, source step per slot

    @classmethod
    def from_history(cls, history, T: int) -> "ObservationWindow":
        if not history:
            raise ValueError("history must contain at least one observation")
        n = len(history)
        ids = np.concatenate([np.zeros(max(0, T - n), dtype=int),
                              np.arange(max(0, n - T), n)])
        steps = [history[i] for i in ids]
        rel = harmonize([s.pose for s in steps], T - 1)
        posevec = np.stack([to_vec6(r).as_array() for r in rel])
        images = np.stack([s.image for s in steps]).astype(np.float32)
        wrench = np.stack([s.wrench.as_array() for s in steps])
        return cls(images=images, posevec=posevec, wrench=wrench, step_ids=ids)


@dataclass
class PolicyConfig:
    window: int = 16  # T
    keyframes: int = 5  # k
    horizon: int = 5  # m, action steps per chunk
    feat_dim: int = 64  # D
    t_diff: int = 100
    replan_stride: int = 2  # h, executed steps per chunk
    fourier_l: int = 6
    d_k: int = 64
    hidden: int = 256
    schedule: str = "cosine"
    image_hw: tuple = (64, 64)
    conditioning: str = "keyframe"  # or "concat" (baseline)
    score_axis: str = "columns"  # attention sum axis; "rows" for the transpose reading
    trans_scale: float = 50.0  # mm
    rot_scale: float = float(np.pi)  # rad
    force_scale: float = 5.0  # N
    torque_scale: float = 25.0  # N*mm
    batch_size: int = 32
    epochs: int = 200
    lr: float = 1e-3
    # "image": every stored frame is independently randomized once per epoch
    # (windows then share encodings); "window": one fresh draw per window,
    # temporally coherent inside it but ~10x the image encoding work.
    randomize_per: str = "image"

    def __post_init__(self):
        if not (1 <= self.keyframes <= self.window):
            raise ValueError("need 1 <= keyframes <= window")
        if self.horizon < 1 or not (1 <= self.replan_stride <= self.horizon):
            raise ValueError("need horizon >= 1 and 1 <= replan_stride <= horizon")
        if self.conditioning not in ("keyframe", "concat"):
            raise ValueError(f"unknown conditioning {self.conditioning!r}")
        if self.randomize_per not in ("image", "window"):
            raise ValueError(f"unknown randomize_per {self.randomize_per!r}")
        if self.score_axis not in ("columns", "rows"):
            raise ValueError(f"unknown score_axis {self.score_axis!r}")

    @property
    def chunk_dim(self) -> int:
        return self.horizon * 12

    def pose_scales(self) -> np.ndarray:
        return np.array([self.trans_scale] * 3 + [self.rot_scale] * 3)

    def wrench_scales(self) -> np.ndarray:
        return np.array([self.force_scale] * 3 + [self.torque_scale] * 3)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["image_hw"] = list(self.image_hw)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        d = dict(d)
        d["image_hw"] = tuple(d["image_hw"])
        return cls(**d)


def clamp_rotvec(chunk: np.ndarray) -> np.ndarray:
    """Rescale any rotation-vector rows exceeding pi magnitude."""
    out = chunk.copy()
    rot = out[:, 3:6]
    norms = np.linalg.norm(rot, axis=1)
    over = norms > np.pi
    if over.any():
        out[over, 3:6] = rot[over] * (np.pi / norms[over])[:, None]
    return out


@dataclass
class ChunkNormalizer:
    """Per-dimension standardization of (m, 12) action chunks."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, chunks: np.ndarray) -> "ChunkNormalizer":
        flat = chunks.reshape(-1, chunks.shape[-1]).astype(np.float64)
        return cls(mean=flat.mean(axis=0), std=np.maximum(flat.std(axis=0), 1e-6))

    def normalize(self, chunk: np.ndarray) -> np.ndarray:
        return (chunk - self.mean) / self.std

    def denormalize(self, normed: np.ndarray) -> np.ndarray:
        return normed * self.std + self.mean
