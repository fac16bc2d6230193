import numpy as np
import pytest

from sonosim.demos import collect_demos, make_training_pairs
from sonosim.policy import PolicyConfig
from sonosim.simworld import ImageSpec, PlaneId, build_phantom


@pytest.fixture(scope="session")
def toy_task():
    """Small end-to-end fixture: 5 demos at 16x16, tiny network dims."""
    world = build_phantom(0)
    spec = ImageSpec(height=16, width=16)
    ds = collect_demos(world, PlaneId.AORTA, n=5, seed=2, spec=spec)
    cfg = PolicyConfig(
        window=6,
        keyframes=3,
        horizon=3,
        feat_dim=16,
        t_diff=20,
        replan_stride=1,
        fourier_l=2,
        d_k=16,
        hidden=64,
        image_hw=(16, 16),
        batch_size=8,
        epochs=200,
        lr=2e-3,
    )
    pairs = make_training_pairs(ds, cfg.window, cfg.horizon)
    return ds, pairs, cfg
