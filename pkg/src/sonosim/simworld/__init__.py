from .phantom import (
    Lesion,
    PhantomConfig,
    PhantomVolume,
    PlaneId,
    TargetPlane,
    Tube,
    TASK_DEMO_COUNTS,
    build_phantom,
)
from .render import (
    DegenerateImageError,
    ImageSpec,
    UltrasoundImage,
    image_similarity,
    render_slice,
)
from .randomize import RandomizationParams, randomize, randomize_stack, sample_params
from .contact import Wrench, contact_wrench, penetration_depth

__all__ = [
    "Lesion",
    "PhantomConfig",
    "PhantomVolume",
    "PlaneId",
    "TargetPlane",
    "Tube",
    "TASK_DEMO_COUNTS",
    "build_phantom",
    "DegenerateImageError",
    "ImageSpec",
    "UltrasoundImage",
    "image_similarity",
    "render_slice",
    "RandomizationParams",
    "randomize",
    "randomize_stack",
    "sample_params",
    "Wrench",
    "contact_wrench",
    "penetration_depth",
]
