"""Font glyph dataset construction and manifest I/O.

A dataset directory holds one 8-bit PNG per (font, character) plus a JSON
Lines manifest (`records.jsonl`, keys font_id/char/path/split/seed) and a
sidecar header (`header.json` with schema_version, char_set, glyph_size).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .charset import CHARACTERS
from .errors import RespellError
from .rasterize import (DEFAULT_MARGIN, FontSource, GlyphImage,
                        apply_color_gradient, draw_gradient_spec, font_rng,
                        ink_coverage, rasterize_glyph)

SCHEMA_VERSION = 1

# Environment variable capping rendering parallelism.
WORKERS_ENV = "LDN_NUM_WORKERS"

SPLIT_FRACTIONS = {"train": 0.8, "val": 0.1, "test": 0.1}


@dataclass(frozen=True)
class ManifestRecord:
    font_id: str
    char: str
    path: str
    split: str
    seed: int


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]
    char_set: str = CHARACTERS
    glyph_size: int = 64
    root: str = ""
    rejects: list[dict] = field(default_factory=list)

    @property
    def font_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.font_id)
        return list(seen)

    def glyph_path(self, record: ManifestRecord) -> Path:
        return Path(self.root) / record.path


def split_for_index(i: int, n: int) -> str:
    """Deterministic per-font split: the first 80% of the font order is
    train, the next 10% val, the remainder test (train absorbs rounding)."""
    n_train = max(1, round(n * SPLIT_FRACTIONS["train"]))
    n_val = round(n * SPLIT_FRACTIONS["val"])
    if i < n_train:
        return "train"
    if i < n_train + n_val:
        return "val"
    return "test"


def _render_font(font: FontSource, glyph_size: int, color: bool, seed: int):
    """Render all 62 glyphs of one font; returns (glyphs, spec, font_seed)."""
    rng = font_rng(seed, font.font_id)
    font_seed = int(rng.integers(0, 2**31 - 1))
    spec = draw_gradient_spec(rng) if color else None
    glyphs = []
    for ch in CHARACTERS:
        g = rasterize_glyph(font, ch, glyph_size)
        cov = ink_coverage(g.pixels)
        if not (0.0 < cov < 0.95):
            raise RespellError(
                f"glyph {ch!r} of font {font.font_id!r} has ink coverage {cov:.3f}")
        if color:
            g = apply_color_gradient(g, spec)
        glyphs.append(g)
    return glyphs, spec, font_seed


def _save_png(glyph: GlyphImage, path: Path):
    arr = np.uint8(np.round(np.clip(glyph.pixels, 0.0, 1.0) * 255.0))
    Image.fromarray(arr).save(path)


def load_glyph(path: Path | str) -> np.ndarray:
    """Read a glyph PNG back to float32 in [0,1] (HxW or HxWx3)."""
    return np.asarray(Image.open(path), dtype=np.float32) / 255.0


def build_font_dataset(fonts: list[FontSource], out_dir: Path | str,
                       glyph_size: int = 64, color: bool = False,
                       seed: int = 0) -> DatasetManifest:
    """Render 62 glyphs per font into ``out_dir`` and write the manifest.

    Per-font randomness (the color gradient spec) comes from an RNG derived
    from (seed, font_id) — see rasterize.font_rng / draw_gradient_spec for
    the documented draw order — so results do not depend on execution order.
    Fonts that fail to render are skipped and listed in manifest.rejects.
    Rerunning with the same fonts and seed rewrites byte-identical files.
    """
    if not fonts:
        raise ValueError("no fonts given")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = int(os.environ.get(WORKERS_ENV, "0") or 0) or (os.cpu_count() or 1)

    results: list = [None] * len(fonts)

    def work(i: int):
        try:
            results[i] = _render_font(fonts[i], glyph_size, color, seed)
        except Exception as e:  # noqa: BLE001 - rejects carry the reason
            results[i] = e

    with ThreadPoolExecutor(max_workers=min(workers, len(fonts))) as pool:
        list(pool.map(work, range(len(fonts))))

    manifest = DatasetManifest(records=[], glyph_size=glyph_size, root=str(out_dir))
    kept = [(f, r) for f, r in zip(fonts, results) if not isinstance(r, Exception)]
    for f, r in zip(fonts, results):
        if isinstance(r, Exception):
            manifest.rejects.append({"font_id": f.font_id, "reason": str(r)})
    if not kept:
        raise RespellError("all fonts were rejected; dataset would be empty")

    for i, (font, (glyphs, _spec, font_seed)) in enumerate(kept):
        split = split_for_index(i, len(kept))
        font_dir = out_dir / font.font_id
        font_dir.mkdir(exist_ok=True)
        for g in glyphs:
            rel = f"{font.font_id}/{ord(g.char):05d}.png"
            _save_png(g, out_dir / rel)
            manifest.records.append(ManifestRecord(
                font_id=font.font_id, char=g.char, path=rel,
                split=split, seed=font_seed))
    write_manifest(manifest, out_dir)
    return manifest


def write_manifest(manifest: DatasetManifest, out_dir: Path | str):
    out_dir = Path(out_dir)
    with open(out_dir / "records.jsonl", "w", encoding="utf-8") as fh:
        for r in manifest.records:
            fh.write(json.dumps({"font_id": r.font_id, "char": r.char,
                                 "path": r.path, "split": r.split,
                                 "seed": r.seed}, sort_keys=True) + "\n")
    header = {"schema_version": SCHEMA_VERSION, "char_set": manifest.char_set,
              "glyph_size": manifest.glyph_size}
    with open(out_dir / "header.json", "w", encoding="utf-8") as fh:
        json.dump(header, fh, sort_keys=True, indent=2)
    if manifest.rejects:
        with open(out_dir / "rejects.json", "w", encoding="utf-8") as fh:
            json.dump(manifest.rejects, fh, sort_keys=True, indent=2)


def read_manifest(path: Path | str) -> DatasetManifest:
    """Load a manifest directory written by build_font_dataset."""
    path = Path(path)
    with open(path / "header.json", encoding="utf-8") as fh:
        header = json.load(fh)
    if header["schema_version"] != SCHEMA_VERSION:
        raise RespellError(f"manifest schema {header['schema_version']} "
                           f"!= supported {SCHEMA_VERSION}")
    records = []
    with open(path / "records.jsonl", encoding="utf-8") as fh:
        for line in fh:
            d = json.loads(line)
            records.append(ManifestRecord(**d))
    return DatasetManifest(records=records, char_set=header["char_set"],
                           glyph_size=header["glyph_size"], root=str(path))


def load_stacks(manifest: DatasetManifest, split: str | None = None) -> tuple:
    """Load glyphs grouped per font as one array.

    Returns (font_ids, array) where array is N×62×H×W for grayscale sets or
    N×62×H×W×3 for color sets, slots ordered by the character set.
    """
    by_font: dict[str, dict[str, ManifestRecord]] = {}
    for r in manifest.records:
        if split and r.split != split:
            continue
        by_font.setdefault(r.font_id, {})[r.char] = r
    font_ids = list(by_font)
    stacks = []
    for fid in font_ids:
        recs = by_font[fid]
        if len(recs) != len(CHARACTERS):
            raise RespellError(f"font {fid!r} has {len(recs)} records, expected 62")
        stacks.append(np.stack([load_glyph(manifest.glyph_path(recs[ch]))
                                for ch in CHARACTERS]))
    return font_ids, np.stack(stacks) if stacks else np.empty((0,))


def synth_backgrounds(n: int, size: int = 128, seed: int = 0) -> np.ndarray:
    """Deterministic plain backgrounds for inpainter training/evaluation.

    Draw order per image i (rng seeded with [seed, i]): 3 uniforms for the
    base color, one uniform u; images with u < 0.5 are flat, the rest get a
    vertical ramp toward a second 3-uniform color.
    """
    out = np.zeros((n, size, size, 3), dtype=np.float32)
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        base = rng.uniform(size=3).astype(np.float32)
        u = rng.uniform()
        if u < 0.5:
            out[i] = base
        else:
            other = rng.uniform(size=3).astype(np.float32)
            t = np.linspace(0.0, 1.0, size, dtype=np.float32)[:, None, None]
            out[i] = base + t * (other - base)
    return out
