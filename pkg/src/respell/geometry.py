"""Axis-aligned pixel rectangles and image crop/paste/resample helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import DimensionError


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in pixel coordinates, (x, y) = top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise DimensionError(f"box must have positive extent, got {self}")

    @property
    def x1(self) -> int:
        return self.x + self.w

    @property
    def y1(self) -> int:
        return self.y + self.h

    def contains(self, other: "Box") -> bool:
        return (self.x <= other.x and self.y <= other.y
                and other.x1 <= self.x1 and other.y1 <= self.y1)

    def inside_image(self, height: int, width: int) -> bool:
        return 0 <= self.x and 0 <= self.y and self.x1 <= width and self.y1 <= height

    def scaled(self, s: float) -> "Box":
        """Scale all four coordinates by ``s`` (rounded to pixels)."""
        return Box(round(self.x * s), round(self.y * s),
                   max(1, round(self.w * s)), max(1, round(self.h * s)))

    @staticmethod
    def union(boxes: "list[Box]") -> "Box":
        x0 = min(b.x for b in boxes)
        y0 = min(b.y for b in boxes)
        x1 = max(b.x1 for b in boxes)
        y1 = max(b.y1 for b in boxes)
        return Box(x0, y0, x1 - x0, y1 - y0)


def crop(image: np.ndarray, box: Box) -> np.ndarray:
    """Copy the pixels of ``box`` out of an H×W[×C] array."""
    if not box.inside_image(image.shape[0], image.shape[1]):
        raise DimensionError(f"{box} is not inside a {image.shape[0]}x{image.shape[1]} image")
    return image[box.y:box.y1, box.x:box.x1].copy()


def resize(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resample of an H×W or H×W×C float array."""
    arr = np.asarray(image, dtype=np.float32)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    t = torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)
    out = torch.nn.functional.interpolate(
        t, size=(height, width), mode="bilinear", align_corners=False, antialias=True)
    res = out.squeeze(0).permute(1, 2, 0).numpy()
    return res[:, :, 0] if squeeze else res
