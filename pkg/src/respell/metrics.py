"""Image metrics, computed at float64 regardless of training precision."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_DATA_RANGE = 1.0


@dataclass(frozen=True)
class MetricReport:
    name: str
    value: float
    region: str = "full"
    sample_count: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def l1_metric(a: np.ndarray, b: np.ndarray, region: np.ndarray | None = None) -> float:
    """Mean absolute difference over ``region`` (everything when None).

    A region mask covering an HxWxC pair may be HxW; it then selects whole
    pixels. An empty region yields 0 by convention.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"l1_metric shapes differ: {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if region is None:
        return float(diff.mean())
    region = np.asarray(region).astype(bool)
    if region.shape == a.shape[:region.ndim] and region.ndim == a.ndim - 1:
        diff = diff.reshape(region.shape + (-1,)).mean(axis=-1)
    elif region.shape != a.shape:
        raise DimensionError(f"region shape {region.shape} does not match {a.shape}")
    if not region.any():
        return 0.0
    return float(diff[region].mean())


def ssim(a: np.ndarray, b: np.ndarray, window: int = SSIM_WINDOW,
         k1: float = SSIM_K1, k2: float = SSIM_K2,
         data_range: float = SSIM_DATA_RANGE) -> float:
    """Structural similarity of two grayscale images.

    Uniform window, biased moments, valid-mode (only windows fully inside
    the image contribute). ssim(x, x) is exactly 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("ssim expects 2-D grayscale images")
    if a.shape != b.shape:
        raise DimensionError(f"ssim shapes differ: {a.shape} vs {b.shape}")
    if min(a.shape) < window:
        raise DimensionError(f"image {a.shape} smaller than the "
                             f"{window}x{window} ssim window")
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = (wa * wa).mean(axis=(-2, -1)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(-2, -1)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float((num / den).mean())
