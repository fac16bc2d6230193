from .window import (
    ChunkNormalizer,
    ObservationStep,
    ObservationWindow,
    PolicyConfig,
    clamp_rotvec,
)
from .diffusion import (
    NoiseSchedule,
    diffusion_forward,
    diffusion_forward_stepwise,
    reverse_coefficients,
    reverse_sample,
)
from .fusion import (
    ConcatFusion,
    KeyframeFusion,
    make_fusion,
    prepare_batch,
    score_importance,
    select_keyframes,
)
from .agent import Policy, load_checkpoint, save_checkpoint

__all__ = [
    "ChunkNormalizer",
    "ObservationStep",
    "ObservationWindow",
    "PolicyConfig",
    "clamp_rotvec",
    "NoiseSchedule",
    "diffusion_forward",
    "diffusion_forward_stepwise",
    "reverse_coefficients",
    "reverse_sample",
    "ConcatFusion",
    "KeyframeFusion",
    "make_fusion",
    "prepare_batch",
    "score_importance",
    "select_keyframes",
    "Policy",
    "load_checkpoint",
    "save_checkpoint",
]
