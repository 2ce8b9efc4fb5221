"""Synthetic scene images with known text ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .charset import validate_text
from .errors import LayoutError
from .geometry import Box
from .rasterize import FontSource


@dataclass
class SceneSample:
    """A scene image plus the word's ground-truth geometry and text."""

    image: np.ndarray
    word_box: Box
    char_boxes: list[Box]
    text: str
    font_id: str


def _ink_extents(font, ch: str) -> tuple[int, int, int, int]:
    """Rendered ink bbox of ``ch`` relative to the pen position."""
    pad = font.size
    probe = Image.new("L", (3 * pad, 3 * pad), 0)
    ImageDraw.Draw(probe).text((pad, pad), ch, fill=255, font=font)
    ys, xs = np.nonzero(np.asarray(probe))
    if ys.size == 0:
        return 0, 0, 0, 0
    return (int(xs.min()) - pad, int(ys.min()) - pad,
            int(xs.max()) + 1 - pad, int(ys.max()) + 1 - pad)


def synth_scene(background: np.ndarray, text: str, font_source: FontSource,
                origin: tuple[int, int], scale: int, spacing: float,
                seed: int = 0) -> SceneSample:
    """Composite ``text`` onto a copy of ``background``.

    scale is the font pixel size; origin is where the first character's ink
    starts (left edge, pen top). spacing is the horizontal gap in pixels
    between the tight boxes of consecutive characters. The ink color is one
    rng.uniform(size=3) draw from numpy's default_rng(seed). char_boxes are
    measured from the rendered alpha of each character, so pixels outside
    them are exactly the background.
    """
    if not text:
        raise ValueError("text is empty")
    validate_text(text)
    bg = np.asarray(background, dtype=np.float32)
    if bg.ndim != 3 or bg.shape[2] != 3:
        raise ValueError("background must be HxWx3")
    height, width = bg.shape[:2]
    font = font_source.load(int(scale))
    rng = np.random.default_rng(seed)
    ink_color = rng.uniform(size=3).astype(np.float32)

    # Pen positions: same baseline for all characters, horizontal cursor
    # advanced so consecutive tight boxes are `spacing` pixels apart. Ink
    # offsets are measured from a scratch render because font metrics and
    # rasterized extents can disagree by a few pixels.
    pen_y = origin[1]
    cursor = float(origin[0])
    alpha = np.zeros((height, width), dtype=np.float32)
    char_boxes: list[Box] = []
    metrics = {ch: _ink_extents(font, ch) for ch in set(text)}
    for ch in text:
        x0, y0, x1, y1 = metrics[ch]
        pen_x = round(cursor - x0)
        if pen_x + x1 > width or pen_y + y1 > height or pen_x + x0 < 0 or pen_y + y0 < 0:
            raise LayoutError(
                f"text {text!r} overflows the background: character {ch!r} "
                f"needs x up to {pen_x + x1} and y up to {pen_y + y1}, "
                f"available {width}x{height}")
        layer = Image.new("L", (width, height), 0)
        ImageDraw.Draw(layer).text((pen_x, pen_y), ch, fill=255, font=font)
        mask = np.asarray(layer, dtype=np.float32) / 255.0
        ys, xs = np.nonzero(mask)
        if ys.size == 0:
            raise LayoutError(f"character {ch!r} rendered no ink inside the "
                              f"{width}x{height} background")
        box = Box(int(xs.min()), int(ys.min()),
                  int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))
        char_boxes.append(box)
        alpha = np.maximum(alpha, mask)
        cursor = box.x1 + spacing

    word_box = Box.union(char_boxes)
    if not word_box.inside_image(height, width):
        raise LayoutError(f"word box {word_box} exceeds the "
                          f"{width}x{height} background")
    image = bg * (1.0 - alpha[:, :, None]) + ink_color[None, None, :] * alpha[:, :, None]
    return SceneSample(image=image.astype(np.float32), word_box=word_box,
                       char_boxes=char_boxes, text=text,
                       font_id=font_source.font_id)
