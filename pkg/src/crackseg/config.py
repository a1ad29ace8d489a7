"""Typed configuration records and their strict JSON round-trip."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .scan_paths import Strategy


def _from_dict(cls, data: dict[str, Any], where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    return cls(**data)


@dataclass(frozen=True)
class NetworkConfig:
    embed_dim: int = 16
    patch_size: int = 8
    num_layers: int = 4
    state_dim: int = 8
    image_size: int = 64
    scan_strategy: str = "sass"
    num_paths: int = 4
    rank_divisor: int = 4
    norm_groups: int = 4
    upsampler: str = "bilinear"
    stem_gbc: bool = True
    block_gbc: bool = True
    share_ssm_params: bool = False
    head_hidden: int | None = None

    def __post_init__(self):
        if self.num_layers < 1:
            raise ConfigError("num_layers must be >= 1")
        if self.embed_dim < 1 or self.state_dim < 1 or self.patch_size < 1:
            raise ConfigError("embed_dim, state_dim and patch_size must be positive")
        if self.image_size % self.patch_size:
            raise ConfigError(f"image_size {self.image_size} is not a multiple of patch_size {self.patch_size}")
        if self.num_paths not in (2, 4):
            raise ConfigError("num_paths must be 2 or 4")
        if self.rank_divisor < 1 or self.norm_groups < 1:
            raise ConfigError("rank_divisor and norm_groups must be positive")
        if self.upsampler != "bilinear":
            raise ConfigError(f"unknown upsampler {self.upsampler!r}")
        Strategy.parse(self.scan_strategy)

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        return _from_dict(cls, data, "network")


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 1.0
    beta: float = 5.0
    eps: float = 1.0
    clamp: float = 1e-7

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("loss weights must be nonnegative")
        if not 0 < self.clamp < 0.5:
            raise ConfigError("BCE clamp must lie in (0, 0.5)")
        if self.eps < 0:
            raise ConfigError("Dice smoothing must be nonnegative")

    @classmethod
    def from_dict(cls, data: dict) -> "LossConfig":
        return _from_dict(cls, data, "loss")


@dataclass(frozen=True)
class OptimConfig:
    lr: float = 5e-4
    weight_decay: float = 0.01
    poly_power: float = 0.9
    steps: int = 500
    batch_size: int = 8
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    # stop as soon as the pre-update train F1 (threshold 0.5) reaches this value
    stop_f1: float | None = None

    def __post_init__(self):
        if self.stop_f1 is not None and not 0.0 < self.stop_f1 <= 1.0:
            raise ConfigError("stop_f1 must lie in (0, 1]")
        if self.steps < 0 or self.batch_size < 1:
            raise ConfigError("steps must be >= 0 and batch_size >= 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        object.__setattr__(self, "betas", tuple(self.betas))

    @classmethod
    def from_dict(cls, data: dict) -> "OptimConfig":
        return _from_dict(cls, data, "optim")


@dataclass(frozen=True)
class DataConfig:
    """Synthetic-data knobs used when no dataset directory is given."""

    synthetic: int = 8
    stroke_count: int = 2
    width_min: float = 2.0
    width_max: float = 4.0
    contrast: float = 0.6
    noise_level: float = 0.03

    @classmethod
    def from_dict(cls, data: dict) -> "DataConfig":
        return _from_dict(cls, data, "data")


@dataclass(frozen=True)
class RunConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    data: DataConfig = field(default_factory=DataConfig)
    seed: int = 42

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["optim"]["betas"] = list(self.optim.betas)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("run config must be a JSON object")
        unknown = sorted(set(data) - {"network", "loss", "optim", "data", "seed"})
        if unknown:
            raise ConfigError(f"run config: unknown keys {unknown}")
        return cls(
            network=NetworkConfig.from_dict(data.get("network", {})),
            loss=LossConfig.from_dict(data.get("loss", {})),
            optim=OptimConfig.from_dict(data.get("optim", {})),
            data=DataConfig.from_dict(data.get("data", {})),
            seed=int(data.get("seed", 42)),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"run config is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)
