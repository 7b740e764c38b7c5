"""Run configuration: INI-style file, dotted-key overrides, stable hashing.

Grammar: standard INI sections [model], [train], [data], [output]; values
are scalars or comma-separated integer lists. Any key can be overridden on
the command line with ``--set section.key=value``. Unknown sections or keys
are rejected so typos cannot silently change a run.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from .data import SynthConfig

ASSIGNMENT_ALPHABET = {"S", "G"}


@dataclass
class ModelConfig:
    stage_channels: tuple[int, ...] = (16, 32, 64, 128)
    assignment: str = "SSGG"
    mlstm_heads: int = 4
    attention_heads: int = 1


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 4
    seed: int = 0
    lambda_ce: float = 1.0
    lambda_dice: float = 1.0


@dataclass
class DataConfig:
    source: str = "synthetic"       # "synthetic" | "pairs"
    root: str = ""                  # pair-dir root when source == "pairs"
    count: int = 8
    size: int = 64
    background_blobs: tuple[int, int] = (3, 6)
    blob_size: tuple[int, int] = (8, 24)
    change_shapes: tuple[int, int] = (1, 3)
    shape_size: tuple[int, int] = (10, 22)
    texture_amp: float = 0.02
    jitter: float = 0.05
    data_seed: int = 7

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            size=self.size,
            background_blobs=self.background_blobs,
            blob_size=self.blob_size,
            change_shapes=self.change_shapes,
            shape_size=self.shape_size,
            texture_amp=self.texture_amp,
            jitter=self.jitter,
            seed=self.data_seed)


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    out_dir: str = "runs/default"

    def validate(self) -> "RunConfig":
        a = self.model.assignment
        if len(a) != 4:
            raise ValueError(f"assignment {a!r} must have length 4")
        for ch in a:
            if ch not in ASSIGNMENT_ALPHABET:
                raise ValueError(
                    f"assignment contains invalid character {ch!r}; "
                    f"alphabet is {sorted(ASSIGNMENT_ALPHABET)} "
                    "(S = axial/shallow, G = global/deep)")
        if len(self.model.stage_channels) != 4:
            raise ValueError("stage_channels must list 4 values")
        if self.train.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.train.lr}")
        if self.train.lambda_ce < 0 or self.train.lambda_dice < 0:
            raise ValueError("loss weights must be non-negative")
        if self.data.source not in ("synthetic", "pairs"):
            raise ValueError(f"data source must be 'synthetic' or 'pairs', "
                             f"got {self.data.source!r}")
        if self.data.source == "pairs" and not self.root_path():
            raise ValueError("data source 'pairs' requires data.root")
        return self

    def root_path(self) -> str:
        return self.data.root

    # -- serialization --------------------------------------------------

    def flat_items(self) -> list[tuple[str, str]]:
        items = []
        for section_name in ("model", "train", "data"):
            section = getattr(self, section_name)
            for f in fields(section):
                items.append((f"{section_name}.{f.name}",
                              _render(getattr(section, f.name))))
        items.append(("output.dir", self.out_dir))
        return items

    def canonical_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.flat_items()))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()


def _render(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _parse_like(current, raw: str):
    raw = raw.strip()
    if isinstance(current, tuple):
        return tuple(int(part) for part in raw.split(","))
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def _apply(cfg: RunConfig, dotted: str, raw: str) -> None:
    try:
        section_name, key = dotted.split(".", 1)
    except ValueError:
        raise ValueError(f"override {dotted!r} must look like section.key") from None
    if section_name == "output":
        if key != "dir":
            raise ValueError(f"unknown output key {key!r}")
        cfg.out_dir = raw.strip()
        return
    if section_name not in ("model", "train", "data"):
        raise ValueError(f"unknown config section {section_name!r}")
    section = getattr(cfg, section_name)
    if key not in {f.name for f in fields(section)}:
        raise ValueError(f"unknown config key {section_name}.{key}")
    setattr(section, key, _parse_like(getattr(section, key), raw))


def load_config(path: str | Path | None = None,
                overrides: list[str] | None = None) -> RunConfig:
    """Build a RunConfig from an optional INI file plus section.key=value overrides."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(f"config file not found: {path}")
        for section_name in parser.sections():
            for key, raw in parser.items(section_name):
                _apply(cfg, f"{section_name}.{key}", raw)
    for item in overrides or []:
        if "=" not in item:
            raise ValueError(f"override {item!r} must look like section.key=value")
        dotted, raw = item.split("=", 1)
        _apply(cfg, dotted.strip(), raw)
    return cfg.validate()
