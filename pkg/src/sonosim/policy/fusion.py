"""Observation fusion heads producing the diffusion conditioning vector.

KeyframeFusion scores every frame by the attention it receives from the
pose queries, keeps the top-k keyframes, and fuses their image, pose and
force features through cross-attention and KAN layers. ConcatFusion is the
plain baseline: a linear projection of all per-frame features concatenated
over the full window.
"""

from __future__ import annotations

import numpy as np

from ..nncore import (
    AttentionParams,
    ConvEncoder,
    FourierSpec,
    KanLayer,
    Linear,
    Tensor,
    concat,
    cross_attention,
    fourier_encode,
)
from .window import PolicyConfig

__all__ = ["score_importance", "select_keyframes", "KeyframeFusion", "ConcatFusion",
           "prepare_batch"]


def score_importance(image_feats, pose_feats, params: AttentionParams, axis: str = "columns"):
    """Total attention each image receives across pose-query positions.

    Returns a plain array (T,) or (B, T); every row sums to T because the
    underlying attention rows are a T-way softmax.
    """
    _, weights = cross_attention(pose_feats, image_feats, image_feats, params)
    a = weights.data
    return a.sum(axis=-2) if axis == "columns" else a.sum(axis=-1)


def select_keyframes(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores, ties to the more recent frame,
    ascending order; all indices when the history is shorter than k."""
    scores = np.asarray(scores)
    t = scores.shape[-1]
    if k >= t:
        return np.arange(t)
    # lexsort: primary descending score, secondary descending index
    order = np.lexsort((-np.arange(t), -scores))
    return np.sort(order[:k])


def _select_batch(scores: np.ndarray, k: int) -> np.ndarray:
    return np.stack([select_keyframes(row, k) for row in scores])


def prepare_batch(windows, image_pixels=None, image_feats=None, slots=None):
    """Pack ObservationWindows plus their (deduplicated) images for fuse().

    Either raw pixels (U, H, W) or precomputed features (U, D) are given,
    with ``slots`` (B, T) mapping window positions into that store. When
    omitted, images are taken from the windows themselves (no dedup).
    """
    if slots is None:
        images = np.concatenate([w.images for w in windows])
        t = windows[0].images.shape[0]
        slots = np.arange(len(windows) * t).reshape(len(windows), t)
        image_pixels = images
    return {
        "image_pixels": image_pixels,
        "image_feats": image_feats,
        "slots": np.asarray(slots),
        "posevec": np.stack([w.posevec for w in windows]).astype(np.float32),
        "wrench": np.stack([w.wrench for w in windows]).astype(np.float32),
    }


class _FusionBase:
    def __init__(self, config: PolicyConfig, rng: np.random.Generator):
        self.config = config
        self.conv = ConvEncoder(rng, image_hw=config.image_hw, feat_dim=config.feat_dim)

    def image_features(self, pixels: np.ndarray) -> Tensor:
        return self.conv(Tensor(pixels))

    def _frame_features(self, batch):
        feats = (
            Tensor(batch["image_feats"])
            if batch.get("image_feats") is not None
            else self.image_features(batch["image_pixels"])
        )
        slots = batch["slots"]
        b, t = slots.shape
        img = feats.take0(slots.reshape(-1)).reshape(b, t, self.config.feat_dim)
        return img, b, t


class KeyframeFusion(_FusionBase):
    def __init__(self, config: PolicyConfig, rng: np.random.Generator):
        super().__init__(config, rng)
        c = config
        enc_dim = 2 * c.fourier_l * 6
        self.pose_spec = FourierSpec(L=c.fourier_l, input_scale=c.pose_scales())
        self.force_spec = FourierSpec(L=c.fourier_l, input_scale=c.wrench_scales())
        self.pose_proj = KanLayer(enc_dim, c.feat_dim, rng)
        self.force_proj = KanLayer(enc_dim, c.feat_dim, rng)
        self.attention = AttentionParams.create(c.feat_dim, c.d_k, rng)
        self.tactile = KanLayer(2 * c.feat_dim, c.feat_dim, rng)
        self.fuse1 = KanLayer(2 * c.feat_dim, c.feat_dim, rng)
        self.fuse2 = KanLayer(c.feat_dim, c.feat_dim, rng)

    def fuse(self, batch, return_info: bool = False):
        c = self.config
        img, b, t = self._frame_features(batch)

        pose_enc = fourier_encode(Tensor(batch["posevec"]), self.pose_spec)
        force_enc = fourier_encode(Tensor(batch["wrench"]), self.force_spec)
        d_enc = pose_enc.shape[-1]
        pose_f = self.pose_proj(pose_enc.reshape(b * t, d_enc)).reshape(b, t, c.feat_dim)
        force_f = self.force_proj(force_enc.reshape(b * t, d_enc)).reshape(b, t, c.feat_dim)

        _, weights = cross_attention(pose_f, img, img, self.attention)
        axis = -2 if c.score_axis == "columns" else -1
        scores = weights.data.sum(axis=axis)
        indices = _select_batch(scores, c.keyframes)
        kk = indices.shape[1]

        img_k = img.gather(indices)
        pose_k = pose_f.gather(indices)
        force_k = force_f.gather(indices)

        visual, _ = cross_attention(pose_k, img_k, img_k, self.attention)
        visual = visual.mean(axis=1)
        tact_in = concat([pose_k, force_k], axis=-1).reshape(b * kk, 2 * c.feat_dim)
        tactile = self.tactile(tact_in).reshape(b, kk, c.feat_dim).mean(axis=1)

        context = self.fuse2(self.fuse1(concat([visual, tactile], axis=-1)))
        if return_info:
            return context, {"scores": scores, "indices": indices}
        return context

    def params(self) -> dict:
        out = {f"conv.{k}": v for k, v in self.conv.params().items()}
        out.update({f"pose_proj.{k}": v for k, v in self.pose_proj.params().items()})
        out.update({f"force_proj.{k}": v for k, v in self.force_proj.params().items()})
        out.update({f"attn.{k}": v for k, v in self.attention.params().items()})
        out.update({f"tactile.{k}": v for k, v in self.tactile.params().items()})
        out.update({f"fuse1.{k}": v for k, v in self.fuse1.params().items()})
        out.update({f"fuse2.{k}": v for k, v in self.fuse2.params().items()})
        return out


class ConcatFusion(_FusionBase):
    """Baseline conditioning: window-wide concatenation, one linear head."""

    def __init__(self, config: PolicyConfig, rng: np.random.Generator):
        super().__init__(config, rng)
        c = config
        self.head = Linear(c.window * (c.feat_dim + 12), c.feat_dim, rng)
        self._pose_div = c.pose_scales().astype(np.float32)
        self._wrench_div = c.wrench_scales().astype(np.float32)

    def fuse(self, batch, return_info: bool = False):
        c = self.config
        img, b, t = self._frame_features(batch)
        pose = Tensor(batch["posevec"] / self._pose_div)
        wrench = Tensor(batch["wrench"] / self._wrench_div)
        per_frame = concat([img, pose, wrench], axis=-1)
        context = self.head(per_frame.reshape(b, t * (c.feat_dim + 12)))
        if return_info:
            return context, {}
        return context

    def params(self) -> dict:
        out = {f"conv.{k}": v for k, v in self.conv.params().items()}
        out.update({f"head.{k}": v for k, v in self.head.params().items()})
        return out


def make_fusion(config: PolicyConfig, rng: np.random.Generator):
    if config.conditioning == "keyframe":
        return KeyframeFusion(config, rng)
    return ConcatFusion(config, rng)
