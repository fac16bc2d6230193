"""Virtual B-mode slice rendering and image similarity.

A pixel at lateral offset x and depth d samples the world point
probe o (x, 0, -d): the probe's local -z axis is the imaging direction
(the gimbal cannot flip the probe, so the tool faces down at the home
orientation). Intensity is structure/tissue level times exp(-mu * depth)
plus procedural speckle keyed on world coordinates. No acoustic coupling
(probe off the surface) renders black; shadow-flagged structures zero out
everything behind them along the depth ray.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geom import Pose
from .phantom import PhantomVolume

__all__ = ["ImageSpec", "UltrasoundImage", "render_slice", "image_similarity",
           "DegenerateImageError"]


class DegenerateImageError(ValueError):
    """Similarity is undefined for a constant (zero-variance) image."""


@dataclass
class ImageSpec:
    height: int = 64
    width: int = 64
    width_mm: float = 60.0
    depth_mm: float = 120.0


@dataclass
class UltrasoundImage:
    pixels: np.ndarray  # (H, W) float32 in [0, 1]
    width_mm: float
    depth_mm: float

    def to_png(self, path):
        from PIL import Image

        arr = np.clip(self.pixels * 255.0, 0, 255).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(path)


def _hash_unit(q: np.ndarray, seed: int) -> np.ndarray:
    """Integer-lattice hash -> uniform [0, 1); deterministic in (cell, seed)."""
    h = (
        q[..., 0].astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        ^ q[..., 1].astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        ^ q[..., 2].astype(np.uint64) * np.uint64(0x165667B19E3779F9)
        ^ np.uint64(seed & 0xFFFFFFFF) * np.uint64(0x27D4EB2F165667C5)
    )
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xFF51AFD7ED558CCD)
    h ^= h >> np.uint64(33)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def render_slice(volume: PhantomVolume, probe: Pose, spec: ImageSpec | None = None) -> UltrasoundImage:
    spec = spec or ImageSpec()
    h, w = spec.height, spec.width
    tip = probe.translation
    surface_at_tip = float(volume.surface_height(tip[0], tip[1]))
    if tip[2] > surface_at_tip + 1e-9:
        return UltrasoundImage(np.zeros((h, w), dtype=np.float32), spec.width_mm, spec.depth_mm)

    lateral = (np.arange(w) + 0.5) / w * spec.width_mm - spec.width_mm / 2.0
    depth = (np.arange(h) + 0.5) / h * spec.depth_mm
    local = np.zeros((h, w, 3))
    local[:, :, 0] = lateral[None, :]
    local[:, :, 2] = -depth[:, None]
    pts = local @ probe.rotation.T + tip

    c = volume.config
    intens = volume.background_intensity(pts)

    shadow_mask = np.zeros((h, w), dtype=bool)
    for s in volume.structures:
        inside = s.contains(pts)
        intens = np.where(inside, s.intensity, intens)
        if s.shadow:
            shadow_mask |= inside

    intens *= np.exp(-c.attenuation * depth)[:, None]

    cells = np.floor(pts / c.speckle_cell_mm).astype(np.int64)
    speckle = (_hash_unit(cells, volume.background_texture_seed) - 0.5) * 2.0
    intens += c.speckle_amplitude * speckle

    if shadow_mask.any():
        entered = np.maximum.accumulate(shadow_mask, axis=0)
        intens = np.where(entered & ~shadow_mask, 0.0, intens)

    above = pts[:, :, 2] > volume.surface_height(pts[:, :, 0], pts[:, :, 1])
    out_of_bounds = (
        (np.abs(pts[:, :, 0]) > c.bounds_xy)
        | (np.abs(pts[:, :, 1]) > c.bounds_xy)
        | (pts[:, :, 2] < c.bounds_z[0])
    )
    intens = np.where(above | out_of_bounds, 0.0, intens)

    return UltrasoundImage(
        np.clip(intens, 0.0, 1.0).astype(np.float32), spec.width_mm, spec.depth_mm
    )


def image_similarity(a: UltrasoundImage, b: UltrasoundImage) -> float:
    """Normalized cross-correlation of mean-subtracted pixels, in [-1, 1]."""
    pa, pb = a.pixels, b.pixels
    if pa.shape != pb.shape:
        raise ValueError(f"image shapes differ: {pa.shape} vs {pb.shape}")
    fa = pa.astype(np.float64).ravel()
    fb = pb.astype(np.float64).ravel()
    fa -= fa.mean()
    fb -= fb.mean()
    na, nb = np.linalg.norm(fa), np.linalg.norm(fb)
    if na < 1e-12 or nb < 1e-12:
        raise DegenerateImageError("similarity undefined for a constant image")
    return float(np.clip(fa @ fb / (na * nb), -1.0, 1.0))
