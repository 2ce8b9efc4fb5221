"""Shared trainer plumbing: loss reports and divergence guards."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .errors import NumericError


@dataclass(frozen=True)
class LossReport:
    """Per-step losses. total is always lambda_rec*recon + lambda_adv*adv_g,
    recomputed from the reported float values (same accumulation order as
    the test-side check). parts carries any intermediate decomposition."""

    step: int
    recon: float
    adv_g: float
    adv_d: float
    total: float
    parts: dict = field(default_factory=dict)


def make_report(step: int, recon: float, adv_g: float, adv_d: float,
                lambda_rec: float, lambda_adv: float,
                parts: dict | None = None) -> LossReport:
    total = lambda_rec * recon + lambda_adv * adv_g
    return LossReport(step=step, recon=recon, adv_g=adv_g, adv_d=adv_d,
                      total=total, parts=parts or {})


def ensure_finite(value: torch.Tensor | float, step: int, what: str = "loss"):
    """Raise NumericError when a loss or activation went non-finite."""
    v = float(value) if not torch.is_tensor(value) else value
    finite = math.isfinite(v) if isinstance(v, float) else bool(torch.isfinite(v).all())
    if not finite:
        raise NumericError(f"{what} became non-finite at step {step}")


def adam(params, lr: float) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=lr, betas=(0.5, 0.999))
