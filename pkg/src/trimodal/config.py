"""Experiment config files (JSON, schema-validated)."""
from __future__ import annotations

import json
import os
from pathlib import Path

import jsonschema

from .trainer import PAPER_SCALE, TrainConfig

OUTPUT_ROOT_ENV = "TRIMODAL_OUTPUT_ROOT"

_train_props = {name: {} for name in TrainConfig.__dataclass_fields__}
_train_props.update(
    batch_size={"type": "integer", "minimum": 1},
    iterations={"type": "integer", "minimum": 1},
    decay_every={"type": "integer", "minimum": 1},
    base_lr={"type": "number", "exclusiveMinimum": 0},
    tau={"type": "number", "exclusiveMinimum": 0},
    width={"type": "number", "exclusiveMinimum": 0},
    seed={"type": "integer"},
    view_assignment={"enum": ["fixed", "random"]},
)

SCHEMA = {
    "type": "object",
    "properties": {
        "train": {"type": "object", "properties": _train_props, "additionalProperties": False},
        "output_dir": {"type": "string"},
        "seed": {"type": "integer"},
        "dataset": {"type": "object"},
        "eval": {"type": "array"},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def load_experiment_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config {path}: {exc.message}") from None
    return cfg


def resolve_train_config(cfg: dict, paper_scale: bool = False) -> TrainConfig:
    train = dict(cfg.get("train", {}))
    if "seed" in cfg:
        train.setdefault("seed", cfg["seed"])
    try:
        return TrainConfig.from_dict({**train, **PAPER_SCALE} if paper_scale else train)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def resolve_output_dir(cfg: dict, default) -> Path:
    out = Path(cfg.get("output_dir") or default)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out
