import json

import pytest
import torch

from respell import load_checkpoint, save_checkpoint
from respell.checkpoint import config_hash
from respell.errors import CheckpointError


def make_params():
    torch.manual_seed(0)
    return {"w": torch.randn(8, 8), "b": torch.randn(8)}


META = {"kind": "test", "config": {"lr": 0.1, "steps": 5}, "seed": 1, "step": 5}


def test_roundtrip_is_bit_exact(tmp_path):
    params = make_params()
    save_checkpoint(params, META, tmp_path / "ck")
    loaded = load_checkpoint(tmp_path / "ck")
    for k, v in params.items():
        assert torch.equal(loaded.params[k], v)
    assert loaded.meta["kind"] == "test"
    assert loaded.meta["schema_version"] == 1


def test_tampered_blob_fails_integrity(tmp_path):
    save_checkpoint(make_params(), META, tmp_path / "ck")
    blob_path = tmp_path / "ck" / "params.bin"
    raw = bytearray(blob_path.read_bytes())
    raw[len(raw) // 2] ^= 0xFF
    blob_path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError) as exc:
        load_checkpoint(tmp_path / "ck")
    assert "integrity" in str(exc.value)


def test_schema_version_mismatch(tmp_path):
    save_checkpoint(make_params(), META, tmp_path / "ck")
    meta_path = tmp_path / "ck" / "meta.json"
    meta = json.loads(meta_path.read_text())
    meta["schema_version"] = 99
    meta_path.write_text(json.dumps(meta))
    with pytest.raises(CheckpointError) as exc:
        load_checkpoint(tmp_path / "ck")
    assert "99" in str(exc.value)


def test_config_hash_binding(tmp_path):
    save_checkpoint(make_params(), META, tmp_path / "ck")
    other = {"lr": 0.2, "steps": 5}
    with pytest.raises(CheckpointError) as exc:
        load_checkpoint(tmp_path / "ck", expected_config=other)
    msg = str(exc.value)
    assert config_hash(META["config"]) in msg and config_hash(other) in msg
    loaded = load_checkpoint(tmp_path / "ck", expected_config=META["config"])
    assert loaded.meta["config_hash"] == config_hash(META["config"])


def test_missing_meta_keys_rejected(tmp_path):
    with pytest.raises(CheckpointError):
        save_checkpoint(make_params(), {"kind": "x"}, tmp_path / "ck")


def test_missing_dir_is_checkpoint_error(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nope")
