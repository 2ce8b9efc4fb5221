"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .errors import NumericError

# Floor for the relative-error denominator; keeps near-zero gradients from
# amplifying finite-difference noise.
REL_ERR_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    passed: bool
    max_rel_err: float
    n_checked: int
    worst: str = ""

    def __bool__(self) -> bool:
        return self.passed


def gradcheck(loss_fn, params: list[torch.Tensor], inp=None,
              epsilon: float = 1e-6, tolerance: float = 1e-3,
              max_checks: int = 10_000, seed: int = 0) -> GradCheckResult:
    """Compare autograd gradients of ``loss_fn`` against central differences.

    loss_fn(inp) must return a scalar tensor that depends on ``params``,
    which must be float64 leaf tensors. When the parameter collection holds
    more than ``max_checks`` scalars, a seeded subsample is checked. The
    per-element relative error is |a - n| / max(|a|, |n|, 1e-6); the check
    passes when the maximum over all checked elements is below tolerance.
    """
    for i, p in enumerate(params):
        if p.dtype != torch.float64:
            raise ValueError(f"gradcheck requires float64 parameters; "
                             f"parameter {i} is {p.dtype}")
        if not p.requires_grad:
            raise ValueError(f"parameter {i} does not require grad")

    for p in params:
        p.grad = None
    loss = loss_fn(inp)
    if not torch.isfinite(loss):
        raise NumericError("loss is non-finite at the evaluation point")
    loss.backward()
    analytic = [p.grad.detach().clone() if p.grad is not None
                else torch.zeros_like(p) for p in params]

    total = sum(p.numel() for p in params)
    rng = torch.Generator().manual_seed(seed)
    if total > max_checks:
        picks = torch.randperm(total, generator=rng)[:max_checks].tolist()
    else:
        picks = list(range(total))

    offsets = []
    start = 0
    for p in params:
        offsets.append(start)
        start += p.numel()

    max_rel = 0.0
    worst = ""
    with torch.no_grad():
        for flat in picks:
            pi = max(i for i, off in enumerate(offsets) if off <= flat)
            j = flat - offsets[pi]
            p = params[pi]
            orig = p.view(-1)[j].item()
            p.view(-1)[j] = orig + epsilon
            up = float(loss_fn(inp))
            p.view(-1)[j] = orig - epsilon
            down = float(loss_fn(inp))
            p.view(-1)[j] = orig
            numeric = (up - down) / (2.0 * epsilon)
            a = analytic[pi].view(-1)[j].item()
            if not (math.isfinite(numeric) and math.isfinite(a)):
                raise NumericError(f"non-finite gradient at parameter {pi}, "
                                   f"element {j}")
            rel = abs(a - numeric) / max(abs(a), abs(numeric), REL_ERR_FLOOR)
            if rel > max_rel:
                max_rel = rel
                worst = f"param {pi} element {j}: analytic {a:.6g} vs numeric {numeric:.6g}"
    passed = max_rel < tolerance or max_rel == 0.0
    return GradCheckResult(passed=passed, max_rel_err=max_rel,
                           n_checked=len(picks), worst=worst)
