"""Run configuration: presets, validation, file loading, and normalization
of the ablation switches into effective window/graph settings."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .fusion import VIEWS


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    # data and windowing
    view: str = "both"
    window: int = 8
    stride: int = 4
    sliding_window: bool = True

    # skeleton branch
    scales: int = 3
    gcn_channels: tuple = (8, 16)
    use_3d: bool = True
    use_multiscale: bool = True
    use_stan: bool = True

    # rgb branch
    image_size: int = 32
    patch_size: int = 8
    vit_dim: int = 32
    vit_layers: int = 2
    vit_heads: int = 4

    # fusion and sequence encoder
    projection_width: int = 64
    model_dim: int = 128
    encoder_layers: int = 2
    encoder_heads: int = 8
    ff_multiple: int = 4
    max_positions: int = 512

    # optimization
    ctc_variant: str = "nll"
    learning_rate: float = 1e-3
    weight_decay: float = 1e-3
    batch_size: int = 8
    dropout: float = 0.1
    max_steps: int = 3000
    eval_every: int = 50
    stop_loss: Optional[float] = 0.1
    stop_wer: Optional[float] = 0.0

    def __post_init__(self):
        self.gcn_channels = tuple(self.gcn_channels)
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.view in VIEWS, f"view must be one of {VIEWS}, got {self.view!r}"),
            (self.window >= 1, f"window must be >= 1, got {self.window}"),
            (1 <= self.stride <= self.window,
             f"need 1 <= stride <= window, got stride={self.stride} window={self.window}"),
            (self.scales >= 1, f"scales must be >= 1, got {self.scales}"),
            (len(self.gcn_channels) >= 1, "gcn_channels must name at least one layer"),
            (all(c >= 1 for c in self.gcn_channels),
             f"gcn_channels must be positive, got {self.gcn_channels}"),
            (self.image_size % self.patch_size == 0,
             f"image size {self.image_size} not divisible by patch {self.patch_size}"),
            (self.vit_dim % self.vit_heads == 0,
             f"vit_dim {self.vit_dim} not divisible by {self.vit_heads} heads"),
            (self.model_dim % self.encoder_heads == 0,
             f"model_dim {self.model_dim} not divisible by {self.encoder_heads} heads"),
            (self.ctc_variant in ("nll", "paper"),
             f"ctc_variant must be 'nll' or 'paper', got {self.ctc_variant!r}"),
            (0.0 <= self.dropout < 1.0, f"dropout must be in [0, 1), got {self.dropout}"),
            (self.learning_rate > 0, "learning rate must be positive"),
            (self.weight_decay >= 0, "weight decay cannot be negative"),
            (self.batch_size >= 1, "batch size must be >= 1"),
            (self.max_steps >= 1, "max_steps must be >= 1"),
            (self.eval_every >= 1, "eval_every must be >= 1"),
            (self.max_positions >= 1, "max_positions must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    # ablation switches collapse into effective window/graph settings:
    # no sliding window, or a per-frame (2-d) graph, means one-frame clips
    @property
    def effective_window(self) -> int:
        return self.window if (self.sliding_window and self.use_3d) else 1

    @property
    def effective_stride(self) -> int:
        return self.stride if (self.sliding_window and self.use_3d) else 1

    @property
    def effective_scales(self) -> int:
        return self.scales if self.use_multiscale else 1

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["gcn_channels"] = list(self.gcn_channels)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        return cls(**doc)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


DESK_PRESET = RunConfig()

PAPER_PRESET = RunConfig(
    gcn_channels=(32, 64),
    image_size=64,
    vit_dim=64,
    projection_width=512,
    model_dim=1024,
    batch_size=32,
)

PRESETS = {"desk": DESK_PRESET, "paper": PAPER_PRESET}


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return dataclasses.replace(PRESETS[name])


def load_config_file(path: Union[str, Path], base: Optional[RunConfig] = None) -> RunConfig:
    """Read a JSON or TOML config whose keys mirror RunConfig fields."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".toml":
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            try:
                import tomli as tomllib
            except ModuleNotFoundError as exc:
                raise ConfigError(
                    "reading TOML configs needs Python 3.11+ or the tomli package; "
                    "use a JSON config instead"
                ) from exc
        doc = tomllib.loads(path.read_text())
    else:
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a table of RunConfig keys")
    if base is not None:
        merged = base.to_dict()
        merged.update(doc)
        doc = merged
    try:
        return RunConfig.from_dict(doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
