"""Demonstration dataset records and their bit-exact binary serialization."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..container import DATASET_MAGIC, read_container, write_container

__all__ = ["DemoRecord", "DemoDataset", "write_dataset", "read_dataset"]


@dataclass
class DemoRecord:
    images: np.ndarray  # (n, H, W) float32
    poses: np.ndarray  # (n, 4, 4) float64, row-major homogeneous TCP poses
    wrench: np.ndarray  # (n, 6) float32
    success: bool

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype="<f4")
        self.poses = np.ascontiguousarray(self.poses, dtype="<f8")
        self.wrench = np.ascontiguousarray(self.wrench, dtype="<f4")
        n = len(self.images)
        if n < 2:
            raise ValueError("a demonstration needs at least 2 steps")
        if len(self.poses) != n or len(self.wrench) != n:
            raise ValueError("image/pose/wrench lengths differ")


@dataclass
class DemoDataset:
    task: str
    demos: list
    meta: dict = field(default_factory=dict)


def write_dataset(ds: DemoDataset, path):
    h, w = ds.demos[0].images.shape[1:]
    header = {
        "format": "dataset",
        "task": ds.task,
        "n_demos": len(ds.demos),
        "image_hw": [int(h), int(w)],
        "units": {"translation": "mm", "rotation": "matrix", "force": "N", "torque": "N*mm"},
        "meta": ds.meta,
    }
    records = []
    for d in ds.demos:
        n = len(d.images)
        payload = (
            struct.pack("<QB", n, 1 if d.success else 0)
            + d.images.tobytes()
            + d.poses.tobytes()
            + d.wrench.tobytes()
        )
        records.append(payload)
    write_container(path, DATASET_MAGIC, header, records)


def read_dataset(path) -> DemoDataset:
    header, records = read_container(path, DATASET_MAGIC)
    h, w = header["image_hw"]
    demos = []
    for payload in records:
        n, success = struct.unpack_from("<QB", payload, 0)
        off = 9
        img_bytes = n * h * w * 4
        pose_bytes = n * 16 * 8
        wrench_bytes = n * 6 * 4
        images = np.frombuffer(payload, dtype="<f4", count=n * h * w, offset=off).reshape(n, h, w)
        off += img_bytes
        poses = np.frombuffer(payload, dtype="<f8", count=n * 16, offset=off).reshape(n, 4, 4)
        off += pose_bytes
        wrench = np.frombuffer(payload, dtype="<f4", count=n * 6, offset=off).reshape(n, 6)
        off += wrench_bytes
        if off != len(payload):
            raise ValueError(f"record size mismatch: parsed {off}, stored {len(payload)}")
        demos.append(
            DemoRecord(
                images=images.copy(), poses=poses.copy(), wrench=wrench.copy(),
                success=bool(success),
            )
        )
    return DemoDataset(task=header["task"], demos=demos, meta=header["meta"])
