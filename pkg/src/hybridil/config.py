"""Declarative experiment configuration with dotted-path flag overrides.

One YAML document drives every CLI command; defaults are the desk-scale
counterparts of the reference hyperparameters (window 10, gamma 0.5,
mode-loss weight 0.01) with sizes and step counts shrunk to the planar task.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .control import ControllerConfig
from .errors import ValidationError
from .executor import ExecutorConfig
from .labeler import LabelerConfig
from .policy import TrainConfig
from .sim import EnvConfig, NoiseProfile


@dataclass
class ExperimentConfig:
    dataset_dir: str = "data/demos"
    out_dir: str = "runs"
    n_demos: int = 50
    data_seed: int = 0
    variant: str = "hybrid"
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    eval_episodes: int = 50
    env: EnvConfig = field(default_factory=EnvConfig)
    profile: NoiseProfile = field(default_factory=NoiseProfile)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    executor: ExecutorConfig = field(default_factory=ExecutorConfig)
    labeler: LabelerConfig = field(default_factory=LabelerConfig)

    def __post_init__(self):
        if not self.seeds:
            raise ValidationError("seed list must be non-empty")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=list)


_SECTIONS = {
    "env": EnvConfig,
    "profile": NoiseProfile,
    "controller": ControllerConfig,
    "train": TrainConfig,
    "labeler": LabelerConfig,
}


def _build_section(cls, data: dict):
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - fields
    if unknown:
        raise ValidationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    coerced = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = tuple(value)
        coerced[key] = value
    return cls(**coerced)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    kwargs = {}
    exec_data = data.pop("executor", None)
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build_section(cls, data.pop(name) or {})
    if exec_data:
        ctrl = exec_data.pop("controller", None)
        if ctrl:
            exec_data["controller"] = _build_section(ControllerConfig, ctrl)
        kwargs["executor"] = _build_section(ExecutorConfig, exec_data)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    caps_fix = data.pop("seeds", None)
    if caps_fix is not None:
        kwargs["seeds"] = list(caps_fix)
    kwargs.update(data)
    cfg = ExperimentConfig(**kwargs)
    # the executor shares the controller section unless set explicitly
    if exec_data is None and "controller" in kwargs:
        cfg.executor = dataclasses.replace(cfg.executor,
                                           controller=cfg.controller)
    return cfg


def apply_overrides(data: dict, overrides: dict[str, str]) -> dict:
    """Apply dotted-path overrides like train.gamma=0.1 onto a config dict."""
    out = json.loads(json.dumps(data))  # deep copy, JSON-native
    for path, raw in overrides.items():
        keys = path.split(".")
        node = out
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ValidationError(f"cannot override through {path!r}")
        node[keys[-1]] = yaml.safe_load(raw)
    return out


def load_config(path: Optional[str] = None,
                overrides: Optional[dict[str, str]] = None) -> ExperimentConfig:
    data: dict = {}
    if path is not None:
        try:
            with open(path) as f:
                data = yaml.safe_load(f) or {}
        except FileNotFoundError as e:
            raise ValidationError(f"config file not found: {path}") from e
        except yaml.YAMLError as e:
            raise ValidationError(f"config parse error in {path}: {e}") from e
    if overrides:
        data = apply_overrides(data, overrides)
    return config_from_dict(data)
