"""Analytic abdominal phantom: tissue block, dark tubular vessels, bright
spherical lesions, and the three target planes with ground-truth probe poses.

The scene is fully deterministic in (seed, config). Distances are mm; the
surface is the height field z = s(x, y) with tissue below (z < s).
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..geom import Pose, rot_z

__all__ = [
    "PlaneId",
    "Tube",
    "Lesion",
    "TargetPlane",
    "PhantomConfig",
    "PhantomVolume",
    "build_phantom",
    "TASK_DEMO_COUNTS",
]


class PlaneId(str, enum.Enum):
    AORTA = "aorta"
    IVC = "ivc"
    PORTAL = "portal"


# Default demonstration counts per task.
TASK_DEMO_COUNTS = {PlaneId.AORTA: 46, PlaneId.IVC: 43, PlaneId.PORTAL: 43}


@dataclass
class Tube:
    """Capsule: infinite-cylinder segment around ``axis_point`` +/- ``half_length``."""

    axis_point: np.ndarray
    direction: np.ndarray
    radius: float
    half_length: float
    intensity: float
    shadow: bool = False

    def __post_init__(self):
        self.axis_point = np.asarray(self.axis_point, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        self.direction = d / np.linalg.norm(d)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        rel = pts - self.axis_point
        along = rel @ self.direction
        along_c = np.clip(along, -self.half_length, self.half_length)
        closest = self.axis_point + along_c[..., None] * self.direction
        return np.linalg.norm(pts - closest, axis=-1) <= self.radius

    def top_z(self) -> float:
        return float(self.axis_point[2] + self.radius)


@dataclass
class Lesion:
    center: np.ndarray
    radius: float
    intensity: float
    shadow: bool = False

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return np.linalg.norm(pts - self.center, axis=-1) <= self.radius

    def top_z(self) -> float:
        return float(self.center[2] + self.radius)


@dataclass
class TargetPlane:
    id: PlaneId
    gt_pose: Pose
    lesion_ids: list
    tube_id: int


@dataclass
class PhantomConfig:
    seed: int = 0
    bounds_xy: float = 60.0
    bounds_z: tuple = (-130.0, 10.0)
    surface_amplitude: float = 0.0  # gentle dome when > 0
    surface_wavelength: float = 80.0
    attenuation: float = 0.02  # 1/mm
    contact_stiffness: float = 0.5  # N/mm
    friction: float = 0.3
    probe_radius: float = 5.0  # mm, contact-patch lever arm
    background_level: float = 0.45
    speckle_amplitude: float = 0.10
    speckle_cell_mm: float = 1.0
    rib_shadows: bool = False
    gt_penetration: float = 6.0  # mm below surface at the target poses
    jitter: float = 1.0  # scene layout jitter scale, mm / degrees

    def as_dict(self) -> dict:
        return {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in self.__dict__.items()
        }


@dataclass
class PhantomVolume:
    config: PhantomConfig
    structures: list
    targets: list
    background_texture_seed: int
    _noise_k: np.ndarray = field(default=None, repr=False)
    _noise_phase: np.ndarray = field(default=None, repr=False)
    _noise_amp: np.ndarray = field(default=None, repr=False)

    def surface_height(self, x, y):
        c = self.config
        if c.surface_amplitude == 0.0:
            return np.zeros_like(np.asarray(x, dtype=np.float64))
        w = 2 * np.pi / c.surface_wavelength
        return c.surface_amplitude * np.cos(w * np.asarray(x)) * np.cos(w * np.asarray(y))

    def background_intensity(self, pts: np.ndarray) -> np.ndarray:
        """Smooth low-frequency tissue texture keyed on world coordinates."""
        phase = pts @ self._noise_k.T + self._noise_phase
        return self.config.background_level + (np.cos(phase) * self._noise_amp).sum(axis=-1)

    def config_hash(self) -> str:
        payload = json.dumps(self.config.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def target(self, plane: PlaneId) -> TargetPlane:
        for t in self.targets:
            if t.id == plane:
                return t
        raise KeyError(f"no target plane {plane}")


def _scene_layout(rng: np.random.Generator, jitter: float):
    """Canonical three-vessel layout with seeded jitter.

    Each entry: (plane, anchor xy, tube depth, tube radius, yaw deg, lesion count).
    """
    # Anchors sit roughly along their tube's yaw bearing from the base so the
    # base-turn + roll limits can realize the needed yaw everywhere en route.
    base = [
        (PlaneId.AORTA, np.array([6.0, -3.0]), 25.0, 4.5, -20.0, 1),
        (PlaneId.IVC, np.array([7.0, 5.0]), 20.0, 5.5, 35.0, 2),
        (PlaneId.PORTAL, np.array([2.0, 9.0]), 30.0, 3.5, 80.0, 4),
    ]
    out = []
    for plane, anchor, depth, radius, yaw, n_lesions in base:
        anchor = anchor + rng.uniform(-1.5, 1.5, 2) * jitter
        depth = depth + rng.uniform(-2.0, 2.0) * jitter
        yaw = yaw + rng.uniform(-5.0, 5.0) * jitter
        out.append((plane, anchor, depth, radius, yaw, n_lesions))
    return out


def build_phantom(seed: int, config: PhantomConfig | None = None) -> PhantomVolume:
    """Deterministic scene with three target planes carrying 1, 2 and 4 lesions."""
    config = config or PhantomConfig(seed=seed)
    rng = np.random.default_rng(seed)
    structures: list = []
    targets: list = []

    for plane, anchor, depth, radius, yaw_deg, n_lesions in _scene_layout(rng, config.jitter):
        yaw = np.radians(yaw_deg)
        direction = np.array([np.cos(yaw), np.sin(yaw), 0.0])
        tube = Tube(
            axis_point=np.array([anchor[0], anchor[1], -depth]),
            direction=direction,
            radius=radius,
            half_length=45.0,
            intensity=0.06,
            shadow=False,
        )
        tube_id = len(structures)
        structures.append(tube)

        lesion_ids = []
        offsets = np.linspace(-18.0, 18.0, n_lesions) if n_lesions > 1 else np.array([12.0])
        for off in offsets:
            center = tube.axis_point + off * direction
            center = center + np.array([0.0, 0.0, -(radius + 6.0 + rng.uniform(0, 2))])
            lesion = Lesion(
                center=center,
                radius=3.5 + rng.uniform(0, 1.0),
                intensity=0.85,
            )
            lesion_ids.append(len(structures))
            structures.append(lesion)

        gt_pose = Pose(
            rot_z(yaw),
            np.array([anchor[0], anchor[1], -config.gt_penetration]),
            validate=False,
        )
        targets.append(TargetPlane(id=plane, gt_pose=gt_pose, lesion_ids=lesion_ids, tube_id=tube_id))

    if config.rib_shadows:
        # Two superficial rib-like cylinders crossing the scene edge.
        for sign in (-1.0, 1.0):
            structures.append(
                Tube(
                    axis_point=np.array([0.0, sign * 24.0, -6.0]),
                    direction=np.array([1.0, 0.2 * sign, 0.0]),
                    radius=3.0,
                    half_length=50.0,
                    intensity=0.9,
                    shadow=True,
                )
            )

    vol = PhantomVolume(
        config=config,
        structures=structures,
        targets=targets,
        background_texture_seed=seed,
    )
    tex_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBA5E]))
    n_waves = 4
    k = tex_rng.uniform(0.02, 0.08, (n_waves, 3)) * tex_rng.choice([-1, 1], (n_waves, 3))
    vol._noise_k = k
    vol._noise_phase = tex_rng.uniform(0, 2 * np.pi, n_waves)
    vol._noise_amp = tex_rng.uniform(0.02, 0.05, n_waves)

    _validate_volume(vol)
    return vol


def _validate_volume(vol: PhantomVolume):
    c = vol.config
    for s in vol.structures:
        if s.top_z() >= -c.surface_amplitude - 0.5 and not getattr(s, "shadow", False):
            pass  # superficial structures allowed only as ribs
        if s.top_z() > 0.0 and c.surface_amplitude == 0.0:
            raise ValueError(f"structure {s} extends above the flat surface")
    if len(vol.targets) != 3:
        raise ValueError("default build must carry exactly three target planes")
    for t in vol.targets:
        p = t.gt_pose.translation
        if np.hypot(p[0], p[1]) > 16.0 or not (-8.0 <= p[2] <= 4.0):
            raise ValueError(f"target {t.id} pose outside the robot workspace")
        if p[2] >= float(vol.surface_height(p[0], p[1])):
            raise ValueError(f"target {t.id} pose is not in contact with the surface")
