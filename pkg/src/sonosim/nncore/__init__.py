from .tensor import Tensor, concat
from .layers import (
    AttentionParams,
    ConvEncoder,
    DenoiserMLP,
    FourierSpec,
    KanLayer,
    Linear,
    cross_attention,
    fourier_encode,
)
from .optim import Adam
from .gradcheck import grad_check

__all__ = [
    "Tensor",
    "concat",
    "AttentionParams",
    "ConvEncoder",
    "DenoiserMLP",
    "FourierSpec",
    "KanLayer",
    "Linear",
    "cross_attention",
    "fourier_encode",
    "Adam",
    "grad_check",
]
