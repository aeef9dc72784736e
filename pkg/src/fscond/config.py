"""Run configuration: JSON file plus dotted-key overrides.

One flat schema feeds every subcommand; unknown keys are rejected so typos
fail loudly. ``--set section.key=value`` overrides parse the value as JSON
when possible (so lists and booleans work) and fall back to strings.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .ansatz import AnsatzSpec
from .downstream import DownstreamConfig
from .errors import ConfigError
from .sculpture import MetaTrainConfig


@dataclass(frozen=True)
class PathsConfig:
    dataset: str | None = None
    out_dir: str = "out"
    checkpoint: str | None = None


@dataclass(frozen=True)
class MetaSection:
    hidden_dim: int = 64
    batch_size: int = 4
    steps: int = 100
    learning_rate: float = 0.01
    weight_decay: float = 0.01
    sigma_init: float = 0.1
    epsilon_floor: float = 1e-10
    degeneracy_epsilon: float = 1e-6
    fd_step: float = 1e-4
    synthetic_inputs: int = 512  # fallback pool size when no dataset is given


@dataclass(frozen=True)
class DownstreamSection:
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 0.05
    weight_decay: float = 0.0001
    clip_norm: float = 1.0
    init_sigma: float = 0.1
    test_fraction: float = 0.2
    lambda_grid: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(21))
    seeds: tuple[int, ...] = (0, 1, 2)


@dataclass(frozen=True)
class RunConfig:
    ansatz: AnsatzSpec = field(default_factory=AnsatzSpec)
    meta: MetaSection = field(default_factory=MetaSection)
    downstream: DownstreamSection = field(default_factory=DownstreamSection)
    paths: PathsConfig = field(default_factory=PathsConfig)
    seed: int = 0
    threads: int = 0  # 0 = use all machine cores

    def validate(self) -> None:
        if self.meta.steps < 0 or self.downstream.epochs < 0:
            raise ConfigError("step/epoch counts must be >= 0")
        for value, name in ((self.meta.batch_size, "meta.batch_size"),
                            (self.downstream.batch_size, "downstream.batch_size"),
                            (self.meta.fd_step, "meta.fd_step"),
                            (self.meta.epsilon_floor, "meta.epsilon_floor"),
                            (self.downstream.clip_norm, "downstream.clip_norm")):
            if value <= 0:
                raise ConfigError(f"{name} must be positive")
        if not all(0.0 <= lam <= 1.0 for lam in self.downstream.lambda_grid):
            raise ConfigError("downstream.lambda_grid entries must lie in [0, 1]")
        if not self.downstream.lambda_grid:
            raise ConfigError("downstream.lambda_grid must be nonempty")
        if not self.downstream.seeds:
            raise ConfigError("downstream.seeds must be nonempty")

    def meta_train_config(self, threads: int) -> MetaTrainConfig:
        m = self.meta
        return MetaTrainConfig(
            ansatz=self.ansatz, hidden_dim=m.hidden_dim,
            batch_size=m.batch_size, steps=m.steps,
            learning_rate=m.learning_rate, weight_decay=m.weight_decay,
            sigma_init=m.sigma_init, epsilon_floor=m.epsilon_floor,
            degeneracy_epsilon=m.degeneracy_epsilon, fd_step=m.fd_step,
            threads=threads)

    def downstream_config(self, threads: int) -> DownstreamConfig:
        d = self.downstream
        return DownstreamConfig(
            ansatz=self.ansatz, epochs=d.epochs, batch_size=d.batch_size,
            learning_rate=d.learning_rate, weight_decay=d.weight_decay,
            clip_norm=d.clip_norm, init_sigma=d.init_sigma,
            test_fraction=d.test_fraction, threads=threads)

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["downstream"]["lambda_grid"] = list(self.downstream.lambda_grid)
        payload["downstream"]["seeds"] = list(self.downstream.seeds)
        return payload


_SECTION_TYPES = {
    "ansatz": AnsatzSpec,
    "meta": MetaSection,
    "downstream": DownstreamSection,
    "paths": PathsConfig,
}


def _build_section(cls, payload: dict, section: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(payload) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in section {section!r}: {sorted(unknown)}")
    coerced = {}
    for key, value in payload.items():
        if isinstance(value, list):
            value = tuple(value)
        coerced[key] = value
    try:
        return cls(**coerced)
    except TypeError as exc:
        raise ConfigError(f"bad section {section!r}: {exc}") from exc


def config_from_dict(payload: dict) -> RunConfig:
    unknown = set(payload) - set(_SECTION_TYPES) - {"seed", "threads"}
    if unknown:
        raise ConfigError(f"unknown top-level config key(s): {sorted(unknown)}")
    kwargs = {}
    for section, cls in _SECTION_TYPES.items():
        if section in payload:
            if not isinstance(payload[section], dict):
                raise ConfigError(f"section {section!r} must be an object")
            kwargs[section] = _build_section(cls, payload[section], section)
    for scalar in ("seed", "threads"):
        if scalar in payload:
            if not isinstance(payload[scalar], int):
                raise ConfigError(f"{scalar} must be an integer")
            kwargs[scalar] = payload[scalar]
    config = RunConfig(**kwargs)
    config.validate()
    return config


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config root must be a JSON object: {path}")
    return config_from_dict(payload)


def apply_overrides(config: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply ``section.key=value`` (or ``seed=value``) assignments."""
    payload = config.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.strip().split(".")
        if len(parts) == 1 and parts[0] in ("seed", "threads"):
            payload[parts[0]] = value
        elif len(parts) == 2 and parts[0] in _SECTION_TYPES:
            payload.setdefault(parts[0], {})[parts[1]] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return config_from_dict(payload)
