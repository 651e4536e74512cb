"""Run configuration: one flat INI file, overridable by CLI flags.

Every run command writes the fully resolved configuration into its output
directory so any artifact can be reproduced from the snapshot alone.
Desk-scale defaults keep training tractable on a laptop CPU; the
production-scale values (300 px / 0.1 m rasters, fc 4096, lr 1e-4 decayed
every 20k steps) are plain config edits.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .nnet.model import ModelConfig
from .raster import RasterConfig
from .synthgen.simulate import NoiseModel


def _default_scenarios() -> dict[str, int]:
    return {
        "straight_multilane": 24,
        "four_way_intersection": 16,
        "lane_change_obstacle": 12,
        "parking_cut_in": 8,
    }


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "runs"
    workers: int = 1
    horizon: int = 30
    raster_n: int = 64
    raster_resolution: float = 0.5
    raster_anchor_w: int = 32
    raster_anchor_h: int = 10
    raster_history_k: int = 5
    raster_fade_delta: float = 0.1
    model_conv_blocks: str = "16x3x2,32x3x2,64x3x2,64x3x2"
    model_fc_size: int = 256
    model_decoder: str = "feedforward"
    model_recurrent_size: int = 64
    model_dropout_rate: float = 0.0
    train_epochs: int = 12
    train_batch_size: int = 32
    train_lr0: float = 1e-3
    train_decay_every: int = 2000
    linear_ridge: float = 1e-6
    noise_position_sigma: float = 0.15
    noise_heading_sigma: float = 0.02
    dataset_stride: int = 3
    dataset_max_per_scenario: int = 60
    scenarios: dict[str, int] = field(default_factory=_default_scenarios)

    def raster_config(self, history_k: int | None = None) -> RasterConfig:
        return RasterConfig(
            n=self.raster_n, resolution=self.raster_resolution,
            anchor_w=self.raster_anchor_w, anchor_h=self.raster_anchor_h,
            history_k=history_k if history_k is not None else self.raster_history_k,
            fade_delta=self.raster_fade_delta,
        )

    def model_config(self, output_mode: str = "point", raster_n: int | None = None) -> ModelConfig:
        blocks = tuple(
            tuple(int(v) for v in blk.split("x")) for blk in self.model_conv_blocks.split(",")
        )
        return ModelConfig(
            conv_blocks=blocks, fc_size=self.model_fc_size, decoder=self.model_decoder,
            recurrent_size=self.model_recurrent_size, output_mode=output_mode,
            horizon=self.horizon, dropout_rate=self.model_dropout_rate,
            raster_n=raster_n if raster_n is not None else self.raster_n,
        )

    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.noise_position_sigma, self.noise_heading_sigma)


_SECTIONS = {
    "run": ("seed", "out_dir", "workers", "horizon"),
    "raster": ("raster_n", "raster_resolution", "raster_anchor_w", "raster_anchor_h",
               "raster_history_k", "raster_fade_delta"),
    "model": ("model_conv_blocks", "model_fc_size", "model_decoder",
              "model_recurrent_size", "model_dropout_rate"),
    "train": ("train_epochs", "train_batch_size", "train_lr0", "train_decay_every",
              "linear_ridge"),
    "noise": ("noise_position_sigma", "noise_heading_sigma"),
    "dataset": ("dataset_stride", "dataset_max_per_scenario"),
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _strip_prefix(name: str, section: str) -> str:
    for prefix in ("raster_", "model_", "train_", "noise_", "dataset_"):
        if name.startswith(prefix) and section != "run":
            return name[len(prefix):]
    return name


def save_config(cfg: RunConfig, path: str | Path) -> None:
    parser = configparser.ConfigParser()
    for section, names in _SECTIONS.items():
        parser[section] = {
            _strip_prefix(name, section): str(getattr(cfg, name)) for name in names
        }
    parser["scenarios"] = {kind: str(count) for kind, count in sorted(cfg.scenarios.items())}
    buf = io.StringIO()
    parser.write(buf)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _convert(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def load_config(path: str | Path) -> RunConfig:
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    values: dict = {}
    for section, names in _SECTIONS.items():
        if section not in parser:
            continue
        for name in names:
            key = _strip_prefix(name, section)
            if key in parser[section]:
                values[name] = _convert(name, parser[section][key])
    if "scenarios" in parser:
        values["scenarios"] = {k: int(v) for k, v in parser["scenarios"].items()}
    return RunConfig(**values)


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """CLI flags win over the config file; None values are ignored."""
    clean = {k: v for k, v in overrides.items() if v is not None}
    scenarios = clean.pop("scenarios", None)
    if scenarios is not None:
        parsed: dict[str, int] = {}
        if scenarios.strip().lower() not in ("", "none"):
            for item in scenarios.split(","):
                kind, _, count = item.partition(":")
                parsed[kind.strip()] = int(count or 1)
        clean["scenarios"] = parsed
    return replace(cfg, **clean)
