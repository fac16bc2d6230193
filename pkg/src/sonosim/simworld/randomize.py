"""Training-time image randomization: elastic deformation, contrast and
brightness, lateral beam gain, multiplicative speckle, additive Gaussian
noise — applied in that order, output clamped to [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .render import UltrasoundImage

__all__ = ["RandomizationParams", "sample_params", "randomize", "randomize_stack",
           "randomize_each"]

RANGES = {
    "gaussian_sigma": (0.01, 0.1),
    "speckle_intensity": (0.0, 0.3),
    "beam_intensity": (0.3, 0.7),
    "contrast": (0.7, 1.3),
    "brightness": (0.7, 1.3),
    "deformation_intensity": (0.15, 0.5),
}

# Pixel displacement per unit deformation intensity.
_DEFORM_PX = 6.0
_FIELD_SIGMA = 8.0


@dataclass
class RandomizationParams:
    gaussian_sigma: float
    speckle_intensity: float
    beam_intensity: float
    contrast: float
    brightness: float
    deformation_intensity: float

    def validate(self):
        for name, (lo, hi) in RANGES.items():
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")


def sample_params(rng: np.random.Generator) -> RandomizationParams:
    """Uniform draw of every perturbation parameter over its closed range."""
    return RandomizationParams(
        **{name: float(rng.uniform(lo, hi)) for name, (lo, hi) in RANGES.items()}
    )


def _deformation_field(shape, amplitude_px, rng):
    """Smooth random displacement: filtered coarse noise upsampled bilinearly."""
    h, w = shape
    ch, cw = max(h // 8, 4), max(w // 8, 4)
    ys = np.linspace(0, ch - 1, h)
    xs = np.linspace(0, cw - 1, w)
    y0 = np.minimum(ys.astype(int), ch - 2)
    x0 = np.minimum(xs.astype(int), cw - 2)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    field = []
    for _ in range(2):
        coarse = gaussian_filter(rng.standard_normal((ch, cw)), sigma=1.0, mode="reflect")
        std = coarse.std()
        coarse = coarse / std * amplitude_px if std > 1e-12 else np.zeros((ch, cw))
        top = coarse[y0][:, x0] * (1 - fx) + coarse[y0][:, x0 + 1] * fx
        bot = coarse[y0 + 1][:, x0] * (1 - fx) + coarse[y0 + 1][:, x0 + 1] * fx
        field.append(top * (1 - fy) + bot * fy)
    return field


def _beam_gain(width, beam_intensity, rng):
    center = width * (0.5 + 0.1 * rng.uniform(-1.0, 1.0))
    u = (np.arange(width) - center) / (width / 2.0)
    return 1.0 - (beam_intensity - 0.3) * u**2


def _apply(pixels, params, rng, field=None, gain=None):
    h, w = pixels.shape
    if field is None:
        field = _deformation_field((h, w), _DEFORM_PX * params.deformation_intensity, rng)
    if gain is None:
        gain = _beam_gain(w, params.beam_intensity, rng)
    p = _warp_stack(pixels.astype(np.float32)[None], field)[0]
    p = (p - np.float32(0.5)) * np.float32(params.contrast) + np.float32(0.5)
    p *= np.float32(params.brightness)
    p *= gain.astype(np.float32)[None, :]
    if params.speckle_intensity > 0:
        p *= 1.0 + np.float32(params.speckle_intensity) * rng.standard_normal((h, w), dtype=np.float32)
    p += np.float32(params.gaussian_sigma) * rng.standard_normal((h, w), dtype=np.float32)
    return np.clip(p, 0.0, 1.0, out=p)


def randomize(img: UltrasoundImage, params: RandomizationParams, rng: np.random.Generator) -> UltrasoundImage:
    params.validate()
    return UltrasoundImage(_apply(img.pixels, params, rng), img.width_mm, img.depth_mm)


def randomize_stack(stack: np.ndarray, params: RandomizationParams, rng: np.random.Generator) -> np.ndarray:
    """Randomize (T, H, W) frames with one shared deformation field and beam
    profile (temporal coherence); sensor noise is fresh per frame.

    Vectorized over the stack: one warp and one noise draw for all frames.
    """
    params.validate()
    t, h, w = stack.shape
    field = _deformation_field((h, w), _DEFORM_PX * params.deformation_intensity, rng)
    gain = _beam_gain(w, params.beam_intensity, rng)

    p = _warp_stack(stack.astype(np.float32), field)
    p = ((p - np.float32(0.5)) * np.float32(params.contrast) + np.float32(0.5))
    p *= np.float32(params.brightness)
    p *= gain[None, None, :].astype(np.float32)
    if params.speckle_intensity > 0:
        noise = rng.standard_normal((t, h, w), dtype=np.float32)
        p *= 1.0 + np.float32(params.speckle_intensity) * noise
    p += np.float32(params.gaussian_sigma) * rng.standard_normal((t, h, w), dtype=np.float32)
    return np.clip(p, 0.0, 1.0, out=p)


def randomize_each(stack: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independently randomize every frame of (T, H, W): a fresh parameter
    draw, deformation field, beam profile and noise per image."""
    t, h, w = stack.shape
    out = np.empty_like(stack, dtype=np.float32)
    for i in range(t):
        params = sample_params(rng)
        field = _deformation_field((h, w), _DEFORM_PX * params.deformation_intensity, rng)
        gain = _beam_gain(w, params.beam_intensity, rng)
        out[i] = _apply(stack[i], params, rng, field=field, gain=gain)
    return out


def _warp_stack(stack: np.ndarray, field) -> np.ndarray:
    """Shared bilinear warp of every frame by (dy, dx); edge-clamped."""
    t, h, w = stack.shape
    yy = np.arange(h, dtype=np.float64)[:, None] + field[0]
    xx = np.arange(w, dtype=np.float64)[None, :] + field[1]
    yy = np.clip(yy, 0.0, h - 1.0)
    xx = np.clip(xx, 0.0, w - 1.0)
    y0 = np.minimum(yy.astype(np.int64), h - 2)
    x0 = np.minimum(xx.astype(np.int64), w - 2)
    fy = (yy - y0).astype(np.float32)
    fx = (xx - x0).astype(np.float32)
    flat = stack.reshape(t, h * w)
    idx00 = (y0 * w + x0).ravel()
    g00 = flat[:, idx00]
    g01 = flat[:, idx00 + 1]
    g10 = flat[:, idx00 + w]
    g11 = flat[:, idx00 + w + 1]
    fy = fy.ravel()[None, :]
    fx = fx.ravel()[None, :]
    top = g00 * (1 - fx) + g01 * fx
    bot = g10 * (1 - fx) + g11 * fx
    return (top * (1 - fy) + bot * fy).reshape(t, h, w)
