"""Layered run configuration: built-in defaults < config file < CLI flags.

The effective config is a plain nested dict with every default
materialized; unknown keys anywhere are rejected. Its canonical JSON form
(sorted keys, fixed separators) defines the config hash that binds
artifacts to the settings that produced them.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict
from pathlib import Path

from .checkpoint import config_hash  # noqa: F401  (re-exported)
from .errors import ConfigError
from .inpaint import InpaintConfig
from .transfer import TransferConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def defaults() -> dict:
    return {
        "seed": 0,
        "dataset": {
            "glyph_size": 64,
            "margin": 0.1,
            "color": False,
            "n_fonts": 100,
        },
        "inpaint": asdict(InpaintConfig()),
        "glyph": asdict(TransferConfig()),
        "edit": {
            "slack": 0.1,
            "min_scale": 0.5,
        },
    }


def load_file(path: Path | str) -> dict:
    """Read a TOML config file (JSON accepted as a fallback)."""
    path = Path(path)
    data = path.read_bytes()
    try:
        return tomllib.loads(data.decode("utf-8"))
    except tomllib.TOMLDecodeError:
        try:
            return json.loads(data)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is neither valid TOML nor JSON: {e}") from e


def merge(base: dict, override: dict, where: str = "") -> dict:
    """Recursively apply ``override`` onto ``base``; unknown keys fail."""
    out = dict(base)
    for key, value in override.items():
        label = f"{where}.{key}" if where else key
        if key not in base:
            raise ConfigError(f"unknown config key {label!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {label!r} must be a section")
            out[key] = merge(base[key], value, label)
        else:
            out[key] = value
    return out


def effective(config_file: Path | str | None = None,
              overrides: dict | None = None) -> dict:
    cfg = defaults()
    if config_file is not None:
        cfg = merge(cfg, load_file(config_file))
    if overrides:
        cfg = merge(cfg, overrides)
    return cfg


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2) + "\n"
