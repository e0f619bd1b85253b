"""Training, reward and environment settings plus the ``key = value`` config file."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..mapping import LidarConfig


@dataclass
class RewardConfig:
    alpha: float = 0.005
    rho_threshold: float = 0.85
    unsafe_penalty: float = -1.0
    terminal_success: float = 1.0
    terminal_failure: float = -1.0

    def validate(self):
        if not 0.0 < self.rho_threshold < 1.0:
            raise ValueError("rho_threshold must lie in (0, 1)")


@dataclass
class TrainConfig:
    gamma: float = 0.99
    lambda_seg: float = 0.5
    learning_rate: float = 1e-4
    buffer_capacity: int = 10_000
    batch_size: int = 32
    target_sync: int = 500
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 20_000
    max_decisions: int = 50
    seed: int = 0
    episodes: int = 300
    learn_start: int = 200
    train_every: int = 1
    eq15_literal_sign: bool = False

    def validate(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("buffer_capacity must hold at least one batch")
        if self.max_decisions < 1:
            raise ValueError("max_decisions must be >= 1")

    def epsilon(self, step: int) -> float:
        if self.epsilon_decay_steps <= 0:
            return self.epsilon_end
        frac = min(step / self.epsilon_decay_steps, 1.0)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


@dataclass
class EnvConfig:
    robot_radius: int = 2
    sense_every: int = 3
    position_block: int = 5
    stride: int = 8
    beam_count: int = 72
    max_range: float = 3.5
    angular_offset: float = 0.0
    min_cluster_size: int = 3
    eval_mask: bool = False

    @property
    def lidar(self) -> LidarConfig:
        return LidarConfig(self.beam_count, self.max_range, self.angular_offset)


@dataclass
class RunConfig:
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    reward: RewardConfig = dataclasses.field(default_factory=RewardConfig)
    env: EnvConfig = dataclasses.field(default_factory=EnvConfig)

    def validate(self):
        self.train.validate()
        self.reward.validate()

    def items(self):
        for section in (self.train, self.reward, self.env):
            for f in dataclasses.fields(section):
                yield f.name, getattr(section, f.name)

    def dumps(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.items())

    def set(self, key: str, raw: str) -> None:
        for section in (self.train, self.reward, self.env):
            fields = {f.name: f for f in dataclasses.fields(section)}
            if key in fields:
                setattr(section, key, _coerce(type(getattr(section, key)), raw, key))
                return
        raise ConfigError(f"unknown config key {key!r}")


class ConfigError(ValueError):
    pass


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(kind, raw: str, key: str):
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind is int:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for {key}") from exc


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg.set(key, value)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())
