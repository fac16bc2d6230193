from .episode import EpisodeTrace, run_episode
from .evaluate import (
    DegenerateTrajectory,
    EvalReport,
    evaluate,
    frozen_start_poses,
    trajectory_efficiency,
)
from .config import EvalSection, RunConfig, TrainingSection, default_config, load_config
from .cli import cli_main

__all__ = [
    "EpisodeTrace",
    "run_episode",
    "DegenerateTrajectory",
    "EvalReport",
    "evaluate",
    "frozen_start_poses",
    "trajectory_efficiency",
    "EvalSection",
    "RunConfig",
    "TrainingSection",
    "default_config",
    "load_config",
    "cli_main",
]
