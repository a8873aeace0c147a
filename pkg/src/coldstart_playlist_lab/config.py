from __future__ import annotations

import json
from pathlib import Path

import yaml
from pydantic import ValidationError

from .errors import ConfigError
from .models import RunConfig


def load_config(path: str) -> RunConfig:
    """Read a YAML run config, or the `config` entry of a run manifest."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"Config file not found: {path}")

    text = p.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"{path}: cannot parse config: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("Config must be a YAML object")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]

    missing = [k for k in ("command",) if k not in data]
    if missing:
        raise ConfigError(f"Missing required config keys: {missing}")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e


def write_default_config(path: str, force: bool = False) -> Path:
    p = Path(path)
    if p.exists() and not force:
        raise ConfigError(f"Config file already exists: {path}. Use --force to overwrite.")

    p.parent.mkdir(parents=True, exist_ok=True)

    template = {
        "command": "eval",
        "songs": "data/songs.csv",
        "playlists": "data/playlists.csv",
        "users": "data/users.csv",
        "setting": "cold_playlists",
        "method": "mtc",
        "hp": {"lambda1": 1e-4, "lambda2": 1e-2, "lambda3": 1e-4, "p": 1.0},
        "knn": 10,
        "topk": [5, 10, 20, 50, 100],
        "seed": 0,
        "threads": 1,
        "out": "outputs/cold_playlists_mtc",
    }

    p.write_text(yaml.safe_dump(template, sort_keys=False), encoding="utf-8")
    return p
