import pytest

from respell.checkpoint import config_hash
from respell.config import canonical_json, defaults, effective, load_file, merge
from respell.errors import ConfigError


def test_defaults_materialized():
    cfg = defaults()
    assert cfg["dataset"]["glyph_size"] == 64
    assert cfg["inpaint"]["steps"] == 2000
    assert cfg["inpaint"]["lambda_rec"] == 0.999
    assert cfg["inpaint"]["lambda_adv"] == 0.001
    assert cfg["glyph"]["observed_min"] == 1
    assert cfg["glyph"]["observed_max"] == 8
    assert cfg["seed"] == 0


def test_merge_precedence(tmp_path):
    f = tmp_path / "run.toml"
    f.write_text("[inpaint]\nsteps = 55\nlr = 0.01\n")
    cfg = effective(f, overrides={"inpaint": {"steps": 99}})
    assert cfg["inpaint"]["steps"] == 99      # flag beats file
    assert cfg["inpaint"]["lr"] == 0.01       # file beats default
    assert cfg["inpaint"]["mask_size"] == 64  # default survives


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError):
        merge(defaults(), {"inpaint": {"nope": 1}})
    with pytest.raises(ConfigError):
        merge(defaults(), {"mystery_section": {}})
    f = tmp_path / "bad.toml"
    f.write_text("[inpaint]\ntypo_key = 3\n")
    with pytest.raises(ConfigError):
        effective(f)


def test_json_fallback(tmp_path):
    f = tmp_path / "run.json"
    f.write_text('{"seed": 17}')
    assert effective(f)["seed"] == 17
    bad = tmp_path / "broken.cfg"
    bad.write_text("not { valid")
    with pytest.raises(ConfigError):
        load_file(bad)


def test_canonical_json_stable():
    a = canonical_json(defaults())
    b = canonical_json(defaults())
    assert a == b and a.endswith("\n")
    assert config_hash(defaults()) == config_hash(defaults())
    assert config_hash(defaults()) != config_hash(
        merge(defaults(), {"seed": 1}))
