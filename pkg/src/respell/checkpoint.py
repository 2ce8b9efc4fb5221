"""Checkpoint save/load with integrity and config binding.

A checkpoint is a directory holding `params.bin` (a torch-native blob of
named parameter tensors) and `meta.json` (schema version, kind, config,
config hash, seed, step, and the sha256 of the blob).
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .errors import CheckpointError

SCHEMA_VERSION = 1


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form of a config mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class Checkpoint:
    params: dict[str, torch.Tensor]
    meta: dict = field(default_factory=dict)
    path: str = ""


def save_checkpoint(params: dict[str, torch.Tensor], meta: dict,
                    path: Path | str) -> Checkpoint:
    """Write params + meta to ``path``. meta must include "kind", "config",
    "seed" and "step"; schema version, config hash and blob hash are added.
    """
    for key in ("kind", "config", "seed", "step"):
        if key not in meta:
            raise CheckpointError(f"checkpoint meta is missing {key!r}")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    torch.save({k: v.detach().cpu() for k, v in params.items()}, buf)
    blob = buf.getvalue()
    meta = dict(meta)
    meta["schema_version"] = SCHEMA_VERSION
    meta["config_hash"] = config_hash(meta["config"])
    meta["params_sha256"] = hashlib.sha256(blob).hexdigest()
    meta["params_bytes"] = len(blob)
    with open(path / "params.bin", "wb") as fh:
        fh.write(blob)
    with open(path / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
    return Checkpoint(params=params, meta=meta, path=str(path))


def load_checkpoint(path: Path | str, expected_config: dict | None = None) -> Checkpoint:
    """Load and verify a checkpoint directory.

    Fails on schema version mismatch, on a corrupted blob (length or sha256
    difference), and, when expected_config is given, on a config hash that
    differs from the one recorded at save time.
    """
    path = Path(path)
    try:
        with open(path / "meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
        with open(path / "params.bin", "rb") as fh:
            blob = fh.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint at {path}: {e}") from e
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointError(
            f"checkpoint schema {meta.get('schema_version')} is not the "
            f"supported version {SCHEMA_VERSION}")
    if len(blob) != meta.get("params_bytes") or \
            hashlib.sha256(blob).hexdigest() != meta.get("params_sha256"):
        raise CheckpointError(f"checkpoint blob at {path} fails its "
                              f"integrity check (corrupt or tampered)")
    if expected_config is not None:
        want = config_hash(expected_config)
        if want != meta["config_hash"]:
            raise CheckpointError(
                f"checkpoint config hash {meta['config_hash']} does not "
                f"match the requested config hash {want}")
    params = torch.load(io.BytesIO(blob), weights_only=True)
    return Checkpoint(params=params, meta=meta, path=str(path))
