"""End-to-end text editing: layout, compositing, and orchestration.

The pipeline erases the whole word box, restores the background behind it,
learns the source style from the characters that were there, renders the
target characters in that style, and composites them with the source's
spacing. No pixel outside the word box is ever modified.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .charset import validate_text
from .errors import DimensionError, LayoutError
from .geometry import Box, resize
from .inpaint import InpaintModel, erase_and_restore
from .transfer import (GlyphModel, OrnaModel, adapt_ornament, assemble_input,
                       extract_color_glyphs, extract_source_glyphs, ornament,
                       predict_glyph_shapes)

# Placements may stick out of the word box horizontally by this fraction of
# its width before the layout is downscaled to fit.
OVERFLOW_SLACK = 0.10
MIN_LAYOUT_SCALE = 0.5

# Gap used when the source has a single box and no measurable gap.
FALLBACK_GAP_FRACTION = 0.15


@dataclass(frozen=True)
class Placement:
    box: Box
    scale: float = 1.0


@dataclass
class EditRequest:
    image: np.ndarray
    word_box: Box
    char_boxes: list[Box]
    source_text: str
    target_text: str

    def validate(self):
        if len(self.char_boxes) != len(self.source_text):
            raise ValueError(f"{len(self.char_boxes)} boxes for source text "
                             f"of length {len(self.source_text)}")
        if not self.target_text:
            raise ValueError("target text is empty")
        validate_text(self.source_text)
        validate_text(self.target_text)
        h, w = self.image.shape[:2]
        if not self.word_box.inside_image(h, w):
            raise DimensionError(f"word box {self.word_box} outside image")
        for b in self.char_boxes:
            if not self.word_box.contains(b):
                raise DimensionError(f"char box {b} outside word box "
                                     f"{self.word_box}")


@dataclass
class EditedImage:
    image: np.ndarray
    audit: dict = field(default_factory=dict)


def layout_targets(word_box: Box, char_boxes: list[Box], source_text: str,
                   target_text: str, slack: float = OVERFLOW_SLACK,
                   min_scale: float = MIN_LAYOUT_SCALE) -> list[Placement]:
    """Place the target characters with the source's cell size and spacing.

    Same target and source length: the placements are exactly the source
    boxes. Otherwise each target gets a cell of the median source width and
    height, separated by the median source gap, left-aligned in the word
    box at the median source top. If the row is wider than the word box
    plus ``slack`` of its width, everything (cells and gaps) is uniformly
    downscaled; below ``min_scale`` the layout fails.
    """
    if not target_text:
        raise ValueError("target text is empty")
    if len(char_boxes) != len(source_text) or not char_boxes:
        raise ValueError("source boxes and text do not match")
    if len(target_text) == len(source_text):
        return [Placement(box=b, scale=1.0) for b in char_boxes]

    mw = statistics.median(b.w for b in char_boxes)
    mh = statistics.median(b.h for b in char_boxes)
    mtop = statistics.median(b.y for b in char_boxes)
    gaps = [char_boxes[i + 1].x - char_boxes[i].x1
            for i in range(len(char_boxes) - 1)]
    gap = statistics.median(gaps) if gaps else mw * FALLBACK_GAP_FRACTION

    n = len(target_text)
    required = n * mw + (n - 1) * gap
    allowed = word_box.w * (1.0 + slack)
    s = 1.0 if required <= allowed else allowed / required
    if s < min_scale:
        raise LayoutError(
            f"target {target_text!r} needs width {required:.0f} but only "
            f"{allowed:.0f} is available (scale {s:.2f} < {min_scale})")
    w, h, g = mw * s, mh * s, gap * s
    top = mtop + (mh - h) / 2.0
    placements = []
    x = float(word_box.x)
    for _ in range(n):
        placements.append(Placement(
            box=Box(round(x), round(top), max(1, round(w)), max(1, round(h))),
            scale=s))
        x += w + g
    return placements


def composite(background: np.ndarray, glyph: np.ndarray, mask: np.ndarray,
              placement: Placement, clip: Box | None = None) -> np.ndarray:
    """Alpha-blend a colored glyph into the placement box.

    The glyph RGB and its mask are resampled to the box; the output is
    (1 - a) * background + a * color per pixel. ``clip`` restricts writes
    to its intersection with the placement (used to enforce word-box
    locality). Placements outside the image are an error.
    """
    h, w = background.shape[:2]
    box = placement.box
    if not box.inside_image(h, w):
        raise DimensionError(f"placement {box} outside {w}x{h} image")
    color = resize(np.asarray(glyph, dtype=np.float32), box.h, box.w)
    alpha = resize(np.asarray(mask, dtype=np.float32), box.h, box.w)
    alpha = np.clip(alpha, 0.0, 1.0)
    out = background.copy()
    y0, y1, x0, x1 = box.y, box.y1, box.x, box.x1
    if clip is not None:
        y0, y1 = max(y0, clip.y), min(y1, clip.y1)
        x0, x1 = max(x0, clip.x), min(x1, clip.x1)
        if y0 >= y1 or x0 >= x1:
            return out
    ay, ax = y0 - box.y, x0 - box.x
    a = alpha[ay:ay + (y1 - y0), ax:ax + (x1 - x0), None]
    c = color[ay:ay + (y1 - y0), ax:ax + (x1 - x0)]
    out[y0:y1, x0:x1] = (1.0 - a) * out[y0:y1, x0:x1] + a * np.clip(c, 0.0, 1.0)
    return out


def edit_text(request: EditRequest, inpaint_ckpt: Path | str,
              glyph_ckpt: Path | str, orna_ckpt: Path | str,
              seed: int = 0) -> EditedImage:
    """Replace the source word with the target text, in the source style.

    Stages: extract source glyphs → erase and restore the word box →
    complete the glyph stack → adapt and apply ornamentation → lay out the
    targets → composite. Any stage failure is re-raised with the stage
    name attached. Pixels outside the word box are bit-equal to the input.
    """
    request.validate()
    audit: dict = {"seed": seed, "stage_seconds": {}, "checkpoints": {}}

    def stage(name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except Exception as e:
            raise type(e)(f"[{name}] {e}") from e
        audit["stage_seconds"][name] = round(time.perf_counter() - t0, 4)
        return result

    inpaint_model = stage("load_checkpoints", InpaintModel.from_checkpoint,
                          inpaint_ckpt)
    glyph_model = GlyphModel.from_checkpoint(glyph_ckpt)
    orna_model = OrnaModel.from_checkpoint(orna_ckpt)
    for name, path in (("inpaint", inpaint_ckpt), ("glyphnet", glyph_ckpt),
                       ("ornanet", orna_ckpt)):
        audit["checkpoints"][name] = str(path)

    image = np.asarray(request.image, dtype=np.float32)
    size = glyph_model.config.glyph_size
    shapes_obs = stage("extract_source_glyphs", extract_source_glyphs,
                       image, request.char_boxes, request.source_text, size)
    exemplars = stage("extract_color_glyphs", extract_color_glyphs,
                      image, request.char_boxes, request.source_text, size)

    restored = stage("background_restorer", erase_and_restore,
                     inpaint_model, image, request.word_box)

    stack = stage("assemble_input", assemble_input, shapes_obs)
    shapes = stage("predict_glyph_shapes", predict_glyph_shapes,
                   glyph_model, stack)
    # Observed characters keep their extracted masks; prediction fills the rest.
    for i in np.nonzero(stack.observed)[0]:
        shapes[i] = stack.glyphs[i]

    adapted = stage("adapt_ornament", adapt_ornament, orna_model, shapes,
                    exemplars)
    colors = stage("ornament", ornament, adapted, shapes, exemplars)

    placements = stage("layout_targets", layout_targets, request.word_box,
                       request.char_boxes, request.source_text,
                       request.target_text)
    audit["placements"] = [{"box": asdict(p.box), "scale": p.scale}
                           for p in placements]

    out = restored
    from .charset import char_index
    for ch, p in zip(request.target_text, placements):
        i = char_index(ch)
        out = stage("composite", composite, out, colors[i], shapes[i], p,
                    request.word_box)

    # Locality guarantee: everything outside the word box is the input.
    final = image.copy()
    b = request.word_box
    final[b.y:b.y1, b.x:b.x1] = out[b.y:b.y1, b.x:b.x1]
    audit["restored_crop"] = {"box": asdict(b)}
    return EditedImage(image=final, audit=audit)
