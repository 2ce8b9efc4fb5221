"""Glyph rasterization and colorization.

All glyph rasters in this package share one convention: ink is bright on a
black background, values in [0, 1], glyph centered in a square cell with a
configurable margin, aspect ratio preserved. Grayscale rasters hold the ink
alpha; color rasters hold ink RGB with the background at exactly 0.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .charset import char_index
from .errors import MissingGlyphError

# Grayscale value above which a pixel counts as ink.
INK_THRESHOLD = 0.5

# Glyph cells keep this fraction of the cell size as empty border.
DEFAULT_MARGIN = 0.10

# Supersampling factor for rendering before downscale to the cell.
_OVERSAMPLE = 4

# Gradient ink is rescaled into [_INK_LIFT, 1] so that even the dimmest
# drawn color (channel floor GRADIENT_CHANNEL_FLOOR) keeps every ink pixel's
# luminance above INK_THRESHOLD. This is what makes colorization preserve
# the binarized ink mask exactly.
_INK_LIFT = 0.85
GRADIENT_CHANNEL_FLOOR = 0.6

# Fraction of the glyph bounding box (from the top) covered by the
# highlight brightness ramp.
HIGHLIGHT_FRACTION = 0.3


@dataclass(frozen=True)
class FontSource:
    """A resolvable font: a TrueType/OpenType file plus a stable id."""

    path: str
    font_id: str = ""

    def __post_init__(self):
        if not self.font_id:
            object.__setattr__(self, "font_id", Path(self.path).stem)

    def load(self, pixel_size: int) -> ImageFont.FreeTypeFont:
        # PIL raises OSError for unresolvable paths / unreadable fonts.
        return ImageFont.truetype(self.path, pixel_size)


@dataclass
class GlyphImage:
    """One rasterized character. pixels is HxW (gray) or HxWx3 (color)."""

    pixels: np.ndarray
    char: str
    font_id: str

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class ColorGradientSpec:
    """Linear two-color ink gradient with an optional top highlight."""

    color_top: tuple
    color_bottom: tuple
    axis: str = "vertical"
    highlight_strength: float = 0.0

    def __post_init__(self):
        for c in (*self.color_top, *self.color_bottom, self.highlight_strength):
            if not (0.0 <= c <= 1.0):
                raise ValueError(f"gradient components must be in [0,1], got {c}")
        if self.axis not in ("vertical", "horizontal"):
            raise ValueError(f"axis must be vertical or horizontal, got {self.axis!r}")


def bundled_fonts() -> list[FontSource]:
    """The two fonts shipped with the package (used by the test suite)."""
    root = resources.files("respell").joinpath("assets/fonts")
    out = []
    for name in ("DejaVuSansMono.ttf", "DejaVuSerif.ttf"):
        out.append(FontSource(str(root.joinpath(name))))
    return out


def ink_coverage(pixels: np.ndarray, threshold: float = INK_THRESHOLD) -> float:
    """Fraction of pixels whose ink channel exceeds ``threshold``.

    For color rasters the ink channel is the luminance.
    """
    if pixels.ndim == 3:
        pixels = luminance(pixels)
    return float(np.mean(pixels > threshold))


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec. 709 luma of an ...x3 array."""
    return rgb[..., 0] * 0.2126 + rgb[..., 1] * 0.7152 + rgb[..., 2] * 0.0722


def _render_mask(font: ImageFont.FreeTypeFont, ch: str, canvas: int) -> np.ndarray:
    img = Image.new("L", (canvas, canvas), 0)
    draw = ImageDraw.Draw(img)
    draw.text((canvas // 3, canvas // 3), ch, fill=255, font=font)
    return np.asarray(img)


def _tight_bbox(arr: np.ndarray):
    ys, xs = np.nonzero(arr)
    if ys.size == 0:
        return None
    return ys.min(), ys.max() + 1, xs.min(), xs.max() + 1


def normalize_to_cell(mask: np.ndarray, size: int, margin: float = DEFAULT_MARGIN,
                      companions: "list[np.ndarray] | None" = None):
    """Scale the tight ink bbox of ``mask`` into a size×size cell, centered,
    aspect preserved, with ``margin``·size empty border on the long side.

    ``companions`` are arrays aligned with ``mask`` (e.g. an RGB crop) that
    get the identical geometric transform. Returns the normalized mask, or a
    tuple (mask, companions...) when companions are given.
    """
    bbox = _tight_bbox(mask > 0)
    if bbox is None:
        out = np.zeros((size, size), dtype=np.float32)
        if companions is None:
            return out
        shapes = [(size, size) + c.shape[2:] for c in companions]
        return (out, *[np.zeros(s, dtype=np.float32) for s in shapes])
    y0, y1, x0, x1 = bbox
    inner = size - 2 * round(size * margin)
    h, w = y1 - y0, x1 - x0
    scale = inner / max(h, w)
    nh, nw = max(1, round(h * scale)), max(1, round(w * scale))
    oy, ox = (size - nh) // 2, (size - nw) // 2

    def place(arr):
        tile = Image.fromarray(np.uint8(np.clip(arr[y0:y1, x0:x1], 0, 1) * 255))
        tile = tile.resize((nw, nh), Image.BILINEAR)
        out = np.zeros((size, size) + arr.shape[2:], dtype=np.float32)
        out[oy:oy + nh, ox:ox + nw] = np.asarray(tile, dtype=np.float32) / 255.0
        return out

    norm = place(mask)
    if companions is None:
        return norm
    return (norm, *[place(c) for c in companions])


def rasterize_glyph(font_source: FontSource, ch: str, size: int,
                    margin: float = DEFAULT_MARGIN) -> GlyphImage:
    """Render one character as a grayscale size×size raster.

    Renders at 4x supersampling, tight-crops the ink, and scales it into the
    cell. Raises MissingGlyphError when the font has no outline for ``ch``
    (detected by comparing against the font's .notdef rendering), OSError
    when the font file cannot be opened.
    """
    char_index(ch)
    if size < 8:
        raise ValueError(f"glyph size must be >= 8, got {size}")
    px = size * _OVERSAMPLE
    font = font_source.load(px)
    canvas = px * 3
    arr = _render_mask(font, ch, canvas)
    if not arr.any():
        raise MissingGlyphError(
            f"font {font_source.font_id!r} has no glyph for {ch!r}")
    # A font without the character renders the .notdef box instead.
    notdef = _render_mask(font, "￿", canvas)
    if notdef.any() and np.array_equal(arr, notdef):
        raise MissingGlyphError(
            f"font {font_source.font_id!r} maps {ch!r} to .notdef")
    norm = normalize_to_cell(arr.astype(np.float32) / 255.0, size, margin)
    return GlyphImage(pixels=norm, char=ch, font_id=font_source.font_id)


def apply_color_gradient(glyph: GlyphImage | np.ndarray, spec: ColorGradientSpec,
                         threshold: float = INK_THRESHOLD) -> GlyphImage | np.ndarray:
    """Colorize a grayscale glyph with a linear ink gradient.

    Ink pixels (value > threshold) get the top→bottom color blend evaluated
    at their position inside the glyph's ink bounding box, scaled by the
    grayscale value lifted into [0.85, 1]; background pixels stay at 0. The
    highlight adds a linear brightness ramp (amplitude highlight_strength,
    fading to zero) over the top 30% of the bounding box. With colors at or
    above the documented channel floor (0.6) the output luminance of every
    ink pixel stays above the threshold, so the binarized ink mask is
    unchanged by colorization.
    """
    gray = glyph.pixels if isinstance(glyph, GlyphImage) else glyph
    if gray.ndim != 2:
        raise ValueError("apply_color_gradient expects a grayscale glyph")
    out = np.zeros(gray.shape + (3,), dtype=np.float32)
    ink = gray > threshold
    bbox = _tight_bbox(ink)
    if bbox is not None:
        y0, y1, x0, x1 = bbox
        yy, xx = np.nonzero(ink)
        if spec.axis == "vertical":
            t = (yy - y0) / max(y1 - 1 - y0, 1)
        else:
            t = (xx - x0) / max(x1 - 1 - x0, 1)
        top = np.asarray(spec.color_top, dtype=np.float32)
        bottom = np.asarray(spec.color_bottom, dtype=np.float32)
        blend = top[None, :] + t[:, None].astype(np.float32) * (bottom - top)[None, :]
        lift = _INK_LIFT + (gray[yy, xx, None] - threshold) / (1.0 - threshold) * (1.0 - _INK_LIFT)
        colors = blend * lift
        # Highlight: ramp toward white over the top HIGHLIGHT_FRACTION rows.
        depth = (yy - y0) / max(y1 - 1 - y0, 1)
        ramp = spec.highlight_strength * np.clip(1.0 - depth / HIGHLIGHT_FRACTION, 0.0, 1.0)
        colors = colors + ramp[:, None].astype(np.float32) * (1.0 - colors)
        out[yy, xx] = colors
    if isinstance(glyph, GlyphImage):
        return GlyphImage(pixels=out, char=glyph.char, font_id=glyph.font_id)
    return out


def font_rng(seed: int, font_id: str) -> np.random.Generator:
    """Per-font RNG derived from (seed, font_id), independent of run order.

    The child stream is seeded with [seed, n] where n is the first 8 bytes
    of sha256(font_id) as a big-endian integer.
    """
    digest = hashlib.sha256(font_id.encode("utf-8")).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "big")])


def draw_gradient_spec(rng: np.random.Generator) -> ColorGradientSpec:
    """Draw one gradient spec. Draw order (fixed, replayable): 3 uniforms for
    the top color, 3 for the bottom color, one integer in {0,1} for the axis
    (0=vertical), one uniform for the highlight strength. Color channels are
    mapped from [0,1) into [GRADIENT_CHANNEL_FLOOR, 1)."""
    span = 1.0 - GRADIENT_CHANNEL_FLOOR
    top = GRADIENT_CHANNEL_FLOOR + rng.uniform(size=3) * span
    bottom = GRADIENT_CHANNEL_FLOOR + rng.uniform(size=3) * span
    axis = "vertical" if int(rng.integers(0, 2)) == 0 else "horizontal"
    strength = float(rng.uniform())
    return ColorGradientSpec(tuple(top), tuple(bottom), axis, strength)
