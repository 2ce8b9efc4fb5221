"""Shared fixtures: fonts, micro training configs, small datasets."""

from pathlib import Path

import numpy as np
import pytest

from respell import FontSource, bundled_fonts, build_font_dataset
from respell.rasterize import rasterize_glyph

PROBE_CHARS = "A g 0 W".split()


def matplotlib_font_dir() -> Path:
    import matplotlib
    return Path(matplotlib.get_data_path()) / "fonts" / "ttf"


def working_fonts(limit: int) -> list[FontSource]:
    """Deterministic list of system fonts that render the full charset."""
    candidates = sorted(matplotlib_font_dir().glob("*.ttf"))
    out = []
    for path in candidates:
        src = FontSource(str(path))
        try:
            for ch in PROBE_CHARS:
                rasterize_glyph(src, ch, 16)
        except Exception:
            continue
        out.append(src)
        if len(out) == limit:
            break
    # Duplicate under aliased ids if the system is short on usable fonts.
    i = 0
    while len(out) < limit:
        base = out[i % max(1, len(out))]
        out.append(FontSource(base.path, font_id=f"{base.font_id}__alias{i}"))
        i += 1
    return out


@pytest.fixture(scope="session")
def fonts():
    return bundled_fonts()


@pytest.fixture(scope="session")
def serif_font(fonts):
    return fonts[1]


@pytest.fixture(scope="session")
def gray_manifest(fonts, tmp_path_factory):
    out = tmp_path_factory.mktemp("gray_ds")
    return build_font_dataset(fonts, out, glyph_size=64, color=False, seed=11)


@pytest.fixture(scope="session")
def color_manifest(fonts, tmp_path_factory):
    out = tmp_path_factory.mktemp("color_ds")
    return build_font_dataset(fonts, out, glyph_size=64, color=True, seed=11)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_checkpoints(fonts, gray_manifest, color_manifest, tmp_path_factory):
    """Minimal trained checkpoints for pipeline tests (speed over quality)."""
    from respell import (InpaintConfig, TransferConfig, finetune_pipeline,
                         pretrain_glyphnet, synth_backgrounds, train_inpainter)

    root = tmp_path_factory.mktemp("ckpts")
    icfg = InpaintConfig(steps=40, batch_size=4, base_channels=8,
                         latent_dim=64)
    train_inpainter(synth_backgrounds(8, 128, seed=5), icfg, seed=1,
                    out_dir=root / "inpaint")
    gcfg = TransferConfig(steps=30, batch_size=2, base_channels=8)
    pretrain_glyphnet(gray_manifest, gcfg, seed=2, out_dir=root / "pre")
    finetune_pipeline(root / "pre" / "glyphnet", color_manifest, gcfg,
                      seed=2, out_dir=root)
    return {"inpaint": root / "inpaint" / "checkpoint",
            "glyphnet": root / "glyphnet",
            "ornanet": root / "ornanet",
            "root": root}
