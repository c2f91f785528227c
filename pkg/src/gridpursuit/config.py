"""YAML run configuration.

Top-level sections (all optional)::

    seed: 0
    env:          {task, width, height, pursuers, evaders, fov, max_steps, obstacles, rewards}
    learner:      {policy_lr, value_lr, actor_updates_per_epoch, critic_updates_per_epoch,
                   gamma, episodes_per_epoch, optimizer, normalize_advantages, entropy_coef}
    evader_learner: same keys as learner; overrides it for the evader side
    coevolution:  {scheme, generations, pursuer_epochs, evader_epochs}
    evaluation:   {episodes, episodes_per_cell}
"""
from __future__ import annotations

from dataclasses import fields
from pathlib import Path

import yaml

from .coevolution import CoevolutionConfig
from .env import EnvConfig, RewardTable
from .learning import LearnerConfig

SECTIONS = ("seed", "env", "learner", "evader_learner", "coevolution", "evaluation")
ENV_KEYS = ("task", "width", "height", "pursuers", "evaders", "fov", "max_steps", "obstacles", "rewards", "seed")
COEVOLUTION_KEYS = ("scheme", "generations", "pursuer_epochs", "evader_epochs")
EVALUATION_KEYS = ("episodes", "episodes_per_cell")


class ConfigError(ValueError):
    pass


def _check_keys(section: str, d, allowed) -> dict:
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {unknown}; allowed: {sorted(allowed)}")
    return dict(d)


def load_config(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    return validate_config({} if data is None else data)


def validate_config(data) -> dict:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys("<root>", data, SECTIONS)
    learner_keys = [f.name for f in fields(LearnerConfig)]
    out = {
        "seed": data.get("seed"),
        "env": _check_keys("env", data.get("env"), ENV_KEYS),
        "learner": _check_keys("learner", data.get("learner"), learner_keys),
        "evader_learner": _check_keys("evader_learner", data.get("evader_learner"), learner_keys) or None,
        "coevolution": _check_keys("coevolution", data.get("coevolution"), COEVOLUTION_KEYS),
        "evaluation": _check_keys("evaluation", data.get("evaluation"), EVALUATION_KEYS),
    }
    if "rewards" in out["env"]:
        _check_keys("env.rewards", out["env"]["rewards"], [f.name for f in fields(RewardTable)])
    return out


def env_config(cfg: dict, **overrides) -> EnvConfig:
    d = {**cfg.get("env", {}), **{k: v for k, v in overrides.items() if v is not None}}
    try:
        return EnvConfig.from_dict(d)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid env config: {exc}") from exc


def learner_config(cfg: dict, section: str = "learner", **overrides) -> LearnerConfig:
    d = {**(cfg.get(section) or {}), **{k: v for k, v in overrides.items() if v is not None}}
    try:
        return LearnerConfig(**d)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid {section} config: {exc}") from exc


def coevolution_config(cfg: dict, seed: int | None = None, env: EnvConfig | None = None, **overrides) -> CoevolutionConfig:
    d = {**cfg.get("coevolution", {}), **{k: v for k, v in overrides.items() if v is not None}}
    evader = learner_config(cfg, "evader_learner") if cfg.get("evader_learner") else None
    if seed is None:
        seed = cfg.get("seed") or 0
    try:
        return CoevolutionConfig(
            env=env or env_config(cfg), learner=learner_config(cfg), evader_learner=evader, seed=int(seed), **d,
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid coevolution config: {exc}") from exc
