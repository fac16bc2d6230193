"""Network building blocks: Fourier features, cross-attention, KAN layers,
a small strided conv image encoder, and the trajectory-denoising MLP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, concat

__all__ = [
    "FourierSpec",
    "fourier_encode",
    "AttentionParams",
    "cross_attention",
    "Linear",
    "KanLayer",
    "ConvEncoder",
    "DenoiserMLP",
]


# ---------------------------------------------------------------------------
# Fourier positional encoding
# ---------------------------------------------------------------------------


@dataclass
class FourierSpec:
    """Frequency count and per-dimension normalization divisors.

    Each scalar p (after dividing by its scale) maps to
    [sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(L-1) pi p), cos(2^(L-1) pi p)].
    """

    L: int = 6
    input_scale: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        self.input_scale = np.asarray(self.input_scale, dtype=np.float32)

    def output_dim(self, input_dim: int) -> int:
        return 2 * self.L * input_dim


def fourier_encode(x, spec: FourierSpec):
    """Encode (..., n) values to (..., 2*L*n) sin/cos features."""
    if not isinstance(x, Tensor):
        x = Tensor(x)
    n = x.shape[-1]
    scale = np.broadcast_to(spec.input_scale, (n,)).astype(np.float32)
    freqs = (np.pi * (2.0 ** np.arange(spec.L))).astype(np.float32)
    p = x * Tensor(1.0 / scale)
    p = p.reshape(*x.shape, 1) * Tensor(freqs)
    s = p.sin().reshape(*x.shape, spec.L, 1)
    c = p.cos().reshape(*x.shape, spec.L, 1)
    out = concat([s, c], axis=-1)
    return out.reshape(*x.shape[:-1], 2 * spec.L * n)


# ---------------------------------------------------------------------------
# Cross-attention
# ---------------------------------------------------------------------------


@dataclass
class AttentionParams:
    """Learned query/key/value projections for scaled dot-product attention."""

    wq: Tensor
    wk: Tensor
    wv: Tensor

    @property
    def d_k(self) -> int:
        return self.wq.shape[1]

    @classmethod
    def create(cls, dim: int, d_k: int, rng: np.random.Generator) -> "AttentionParams":
        def mat(n_in, n_out):
            return Tensor(
                rng.normal(0.0, 1.0 / np.sqrt(n_in), (n_in, n_out)),
                requires_grad=True,
            )

        return cls(wq=mat(dim, d_k), wk=mat(dim, d_k), wv=mat(dim, dim))

    def params(self) -> dict:
        return {"wq": self.wq, "wk": self.wk, "wv": self.wv}


def cross_attention(queries, keys, values, params: AttentionParams):
    """Row-wise softmax(Q K' / sqrt(d_k)) applied to projected values.

    Accepts (T, D) or batched (B, T, D) inputs; keys and values must share
    their sequence length. Returns (output, weights).
    """
    squeeze = queries.ndim == 2
    if squeeze:
        queries = queries.reshape(1, *queries.shape)
        keys = keys.reshape(1, *keys.shape)
        values = values.reshape(1, *values.shape)
    if keys.shape[1] != values.shape[1]:
        raise ValueError("keys and values must have matching sequence length")
    b, tq, d = queries.shape
    q = queries.reshape(b * tq, d) @ params.wq
    k = keys.reshape(b * keys.shape[1], d) @ params.wk
    v = values.reshape(b * values.shape[1], d) @ params.wv
    q = q.reshape(b, tq, params.d_k)
    k = k.reshape(b, keys.shape[1], params.d_k)
    v = v.reshape(b, values.shape[1], v.shape[-1])
    scores = (q @ k.swapaxes(1, 2)) * (1.0 / np.sqrt(params.d_k))
    weights = scores.softmax(axis=-1)
    out = weights @ v
    if squeeze:
        out = out.reshape(*out.shape[1:])
        weights = weights.reshape(*weights.shape[1:])
    return out, weights


# ---------------------------------------------------------------------------
# Linear / KAN / conv encoder / denoiser
# ---------------------------------------------------------------------------


class Linear:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        bound = np.sqrt(6.0 / n_in)
        self.w = Tensor(rng.uniform(-bound, bound, (n_in, n_out)), requires_grad=True)
        self.b = Tensor(np.zeros(n_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.w + self.b

    def params(self) -> dict:
        return {"w": self.w, "b": self.b}


class KanLayer:
    """Per-edge learnable B-spline plus a silu base path.

    y_j = sum_i [ base_w[i,j] * silu(x_i) + spline_ij(x_i) ] with the splines
    defined on a fixed uniform grid; out-of-domain inputs are clamped and
    counted in ``clamp_count``.
    """

    def __init__(
        self,
        n_in: int,
        n_out: int,
        rng: np.random.Generator,
        grid_intervals: int = 8,
        order: int = 3,
        domain: tuple = (-3.0, 3.0),
    ):
        self.n_in, self.n_out = n_in, n_out
        self.order = order
        self.lo, self.hi = float(domain[0]), float(domain[1])
        h = (self.hi - self.lo) / grid_intervals
        self.knots = self.lo + h * np.arange(-order, grid_intervals + order + 1)
        self.n_basis = grid_intervals + order
        self.coeff = Tensor(
            rng.normal(0.0, 0.1 / np.sqrt(n_in), (n_in * self.n_basis, n_out)),
            requires_grad=True,
        )
        self.base_w = Tensor(
            rng.normal(0.0, 1.0 / np.sqrt(n_in), (n_in, n_out)), requires_grad=True
        )
        self.clamp_count = 0

    def __call__(self, x: Tensor) -> Tensor:
        self.clamp_count += int(((x.data < self.lo) | (x.data > self.hi)).sum())
        xc = x.clamp(self.lo, self.hi)
        basis = xc.spline_basis(self.knots, self.order)
        n = x.shape[0]
        spline = basis.reshape(n, self.n_in * self.n_basis) @ self.coeff
        return spline + x.silu() @ self.base_w

    def params(self) -> dict:
        return {"coeff": self.coeff, "base_w": self.base_w}


class ConvEncoder:
    """Four stride-2 3x3 conv blocks (silu) then a linear head.

    Input images are (N, H, W) grayscale in [0, 1] with H and W divisible
    by 16; output is an (N, feat_dim) feature matrix.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        image_hw: tuple = (64, 64),
        channels: tuple = (8, 16, 32, 64),
        feat_dim: int = 64,
    ):
        h, w = image_hw
        if h % 16 or w % 16:
            raise ValueError(f"image dims {image_hw} must be divisible by 16")
        self.image_hw = (h, w)
        self.channels = tuple(channels)
        self.feat_dim = feat_dim
        self.conv_w, self.conv_b = [], []
        c_in = 1
        for c_out in channels:
            std = np.sqrt(2.0 / (9 * c_in))
            self.conv_w.append(
                Tensor(rng.normal(0.0, std, (9 * c_in, c_out)), requires_grad=True)
            )
            self.conv_b.append(Tensor(np.zeros(c_out), requires_grad=True))
            c_in = c_out
        flat = (h // 16) * (w // 16) * channels[-1]
        self.head = Linear(flat, feat_dim, rng)

    def __call__(self, images: Tensor) -> Tensor:
        n, h, w = images.shape
        if (h, w) != self.image_hw:
            raise ValueError(f"expected {self.image_hw} images, got {(h, w)}")
        x = images.reshape(n, h, w, 1)
        for wgt, bias in zip(self.conv_w, self.conv_b):
            x = x.conv2d(wgt, bias, stride=2).silu()
        return self.head(x.reshape(n, -1))

    def params(self) -> dict:
        out = {}
        for i, (w, b) in enumerate(zip(self.conv_w, self.conv_b)):
            out[f"conv{i}.w"] = w
            out[f"conv{i}.b"] = b
        out.update({f"head.{k}": v for k, v in self.head.params().items()})
        return out


class DenoiserMLP:
    """Predicts the clean action chunk from its noised version.

    Input is concat(flattened noised chunk, Fourier-encoded diffusion step,
    conditioning features); three silu hidden layers of ``hidden`` units.
    """

    def __init__(
        self,
        chunk_dim: int,
        t_enc_dim: int,
        context_dim: int,
        rng: np.random.Generator,
        hidden: int = 256,
        n_hidden: int = 3,
    ):
        self.chunk_dim = chunk_dim
        dims = [chunk_dim + t_enc_dim + context_dim] + [hidden] * n_hidden + [chunk_dim]
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]

    def __call__(self, noised_flat: Tensor, t_enc: Tensor, context: Tensor) -> Tensor:
        x = concat([noised_flat, t_enc, context], axis=-1)
        for layer in self.layers[:-1]:
            x = layer(x).silu()
        return self.layers[-1](x)

    def params(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            out.update({f"fc{i}.{k}": v for k, v in layer.params().items()})
        return out
