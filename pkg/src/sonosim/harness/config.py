"""Run configuration: one YAML file with {phantom, robot, policy, training,
eval} sections overlaid on code defaults. SONOSIM_SEED and SONOSIM_OUT
environment variables override the seed and output directory."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

import yaml

from ..policy import PolicyConfig
from ..robot import BacklashModel
from ..simworld import PhantomConfig

__all__ = ["RunConfig", "TrainingSection", "EvalSection", "load_config", "default_config",
           "config_to_dict"]


@dataclass
class TrainingSection:
    seed: int = 0
    demo_seed: int = 100
    out_dir: str = "runs"
    demo_counts: dict = field(
        default_factory=lambda: {"aorta": 46, "ivc": 43, "portal": 43}
    )


@dataclass
class EvalSection:
    seed: int = 0
    n_starts: int = 14
    max_steps: int = 100
    randomize_observations: bool = False
    regulator_enabled: bool = True


@dataclass
class RobotSection:
    deadband: dict = field(default_factory=lambda: dict(BacklashModel().deadband))
    regulator_enabled: bool = True
    tension_threshold: float = 2.5
    compensation: float = 0.75

    def backlash_model(self, regulator_enabled=None) -> BacklashModel:
        return BacklashModel(
            deadband=dict(self.deadband),
            regulator_enabled=self.regulator_enabled
            if regulator_enabled is None
            else regulator_enabled,
            tension_threshold=self.tension_threshold,
            compensation=self.compensation,
        )


@dataclass
class RunConfig:
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    robot: RobotSection = field(default_factory=RobotSection)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    training: TrainingSection = field(default_factory=TrainingSection)
    eval: EvalSection = field(default_factory=EvalSection)


_SECTIONS = {
    "phantom": PhantomConfig,
    "robot": RobotSection,
    "policy": PolicyConfig,
    "training": TrainingSection,
    "eval": EvalSection,
}


def _build_section(cls, overrides: dict, path: str):
    known = {f.name for f in fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown keys in config section '{path}': {sorted(unknown)}")
    if cls is PolicyConfig and "image_hw" in overrides:
        overrides = dict(overrides, image_hw=tuple(overrides["image_hw"]))
    if cls is PhantomConfig and "bounds_z" in overrides:
        overrides = dict(overrides, bounds_z=tuple(overrides["bounds_z"]))
    return cls(**overrides)


def load_config(path=None) -> RunConfig:
    data = {}
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config {path} must be a mapping of sections")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
    cfg = RunConfig(
        **{
            name: _build_section(cls, data.get(name, {}) or {}, name)
            for name, cls in _SECTIONS.items()
        }
    )
    env_seed = os.environ.get("SONOSIM_SEED")
    if env_seed is not None:
        cfg.training.seed = int(env_seed)
        cfg.eval.seed = int(env_seed)
    env_out = os.environ.get("SONOSIM_OUT")
    if env_out is not None:
        cfg.training.out_dir = env_out
    return cfg


def default_config() -> RunConfig:
    return load_config(None)


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "phantom": cfg.phantom.as_dict(),
        "robot": dict(cfg.robot.__dict__, deadband=dict(cfg.robot.deadband)),
        "policy": cfg.policy.as_dict(),
        "training": dict(cfg.training.__dict__, demo_counts=dict(cfg.training.demo_counts)),
        "eval": dict(cfg.eval.__dict__),
    }
