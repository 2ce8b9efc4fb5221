"""Erase a region and restore the background behind it.

An encoder/decoder generator predicts the whole crop from the masked crop;
the composite keeps the prediction only inside the mask, so unmasked pixels
pass through bit-exact. A discriminator on the masked region provides a
small adversarial term on top of the L1 reconstruction.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .errors import DimensionError, NumericError
from .geometry import Box, crop, resize
from .models import ContextEncoder, Discriminator
from .training import LossReport, adam, ensure_finite, make_report


@dataclass
class InpaintConfig:
    input_size: int = 128
    mask_size: int = 64
    latent_dim: int = 256
    base_channels: int = 16
    disc_channels: int = 16
    steps: int = 2000
    lr: float = 2e-3
    lambda_rec: float = 0.999
    lambda_adv: float = 0.001
    batch_size: int = 8
    fill: float | str = "mean"  # "mean" = dataset mean intensity
    snapshot_every: int = 100
    context_scale: float = 2.0  # context crop side per unit of region side

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MaskedImage:
    """An image with the masked pixels replaced by the fill value."""

    image: np.ndarray
    mask: np.ndarray
    original: np.ndarray | None = None


@dataclass
class InpaintModel:
    net: ContextEncoder
    disc: Discriminator
    config: InpaintConfig
    fill_value: float = 0.5

    @classmethod
    def fresh(cls, config: InpaintConfig, seed: int, fill_value: float = 0.5):
        torch.manual_seed(seed)
        net = ContextEncoder(config.input_size, 3, config.base_channels,
                             config.latent_dim)
        disc = Discriminator(config.mask_size, 3, config.disc_channels)
        return cls(net=net, disc=disc, config=config, fill_value=fill_value)

    @classmethod
    def from_checkpoint(cls, path: Path | str) -> "InpaintModel":
        ckpt = load_checkpoint(path)
        if ckpt.meta.get("kind") != "inpaint":
            raise DimensionError(f"checkpoint at {path} is "
                                 f"{ckpt.meta.get('kind')!r}, not 'inpaint'")
        config = InpaintConfig(**ckpt.meta["config"])
        model = cls.fresh(config, seed=0, fill_value=ckpt.meta["fill_value"])
        model.net.load_state_dict(
            {k[4:]: v for k, v in ckpt.params.items() if k.startswith("net.")})
        model.disc.load_state_dict(
            {k[5:]: v for k, v in ckpt.params.items() if k.startswith("disc.")})
        return model

    def state(self) -> dict[str, torch.Tensor]:
        out = {f"net.{k}": v for k, v in self.net.state_dict().items()}
        out.update({f"disc.{k}": v for k, v in self.disc.state_dict().items()})
        return out

    def meta(self, seed: int, step: int) -> dict:
        return {"kind": "inpaint", "config": self.config.to_dict(),
                "seed": seed, "step": step, "fill_value": self.fill_value,
                "input_size": self.config.input_size,
                "latent_dim": self.config.latent_dim}


def _check_mask(image: np.ndarray, mask: np.ndarray):
    if mask.shape != image.shape[:2]:
        raise DimensionError(f"mask shape {mask.shape} does not match image "
                             f"{image.shape[:2]}")
    values = np.unique(mask)
    if not np.isin(values, (0, 1)).all():
        raise ValueError("mask must be binary (0/1)")


def center_mask(size: int, hole: int) -> np.ndarray:
    """Binary size×size mask with a hole×hole square of ones in the middle."""
    m = np.zeros((size, size), dtype=np.uint8)
    o = (size - hole) // 2
    m[o:o + hole, o:o + hole] = 1
    return m


def mask_region(image: np.ndarray, mask: np.ndarray, fill: float) -> MaskedImage:
    """Replace masked pixels with ``fill``, keeping the original aside."""
    image = np.asarray(image, dtype=np.float32)
    _check_mask(image, mask)
    if not (0.0 <= fill <= 1.0):
        raise ValueError(f"fill must be in [0,1], got {fill}")
    out = image.copy()
    out[mask.astype(bool)] = fill
    return MaskedImage(image=out, mask=np.asarray(mask, dtype=np.uint8),
                       original=image)


def _to_batch(image: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32)) \
        .permute(2, 0, 1).unsqueeze(0)


def encode(model: InpaintModel, masked: MaskedImage) -> np.ndarray:
    """Latent code of a masked image; deterministic for fixed parameters."""
    s = model.config.input_size
    if masked.image.shape != (s, s, 3):
        raise DimensionError(f"expected {s}x{s}x3 input, got {masked.image.shape}")
    with torch.no_grad():
        z = model.net.encode(_to_batch(masked.image))
    return z.squeeze(0).numpy()


def inpaint(model: InpaintModel, masked: MaskedImage) -> np.ndarray:
    """Predict the masked content and composite it into the input.

    Unmasked pixels of the result are bit-equal to the input's; only the
    hole is synthesized.
    """
    s = model.config.input_size
    if masked.image.shape != (s, s, 3):
        raise DimensionError(f"expected {s}x{s}x3 input, got {masked.image.shape}")
    with torch.no_grad():
        pred = model.net(_to_batch(masked.image))
    pred = pred.squeeze(0).permute(1, 2, 0).numpy()
    hole = masked.mask.astype(bool)[:, :, None]
    return np.where(hole, pred, masked.image)


def recon_loss(pred, target, mask):
    """Mean absolute difference over masked pixels only (0 for empty masks).

    Works on numpy arrays and on torch tensors (differentiable); torch
    inputs are NCHW with an HxW or NHW mask.
    """
    if torch.is_tensor(pred):
        if pred.shape != target.shape:
            raise DimensionError(f"shapes differ: {tuple(pred.shape)} vs "
                                 f"{tuple(target.shape)}")
        m = mask if torch.is_tensor(mask) else torch.from_numpy(np.asarray(mask))
        m = m.to(pred.dtype)
        while m.dim() < pred.dim():
            m = m.unsqueeze(0)
        m = m.expand_as(pred)
        denom = m.sum()
        if float(denom) == 0.0:
            return pred.sum() * 0.0
        return (torch.abs(pred - target) * m).sum() / denom
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"shapes differ: {pred.shape} vs {target.shape}")
    sel = np.asarray(mask).astype(bool)
    if sel.ndim == pred.ndim - 1:
        sel = np.broadcast_to(sel[..., None], pred.shape)
    if not sel.any():
        return 0.0
    return float(np.abs(pred - target)[sel].mean())


def adversarial_losses(disc: Discriminator, pred_region: torch.Tensor,
                       real_region: torch.Tensor):
    """Non-saturating GAN losses on the masked region.

    With p = sigmoid(logit): adv_g = -mean log p(fake) and
    adv_d = -mean log p(real) - mean log(1 - p(fake)), both computed in the
    numerically exact softplus form. A discriminator scoring 0.5 everywhere
    gives adv_g = ln 2 and adv_d = 2 ln 2.
    """
    if pred_region.shape != real_region.shape:
        raise DimensionError(f"region shapes differ: {tuple(pred_region.shape)} "
                             f"vs {tuple(real_region.shape)}")
    fake_logit = disc(pred_region)
    real_logit = disc(real_region)
    fake_detached = disc(pred_region.detach())
    adv_g = F.softplus(-fake_logit).mean()
    adv_d = F.softplus(-real_logit).mean() + F.softplus(fake_detached).mean()
    if not (torch.isfinite(adv_g) and torch.isfinite(adv_d)):
        raise NumericError("adversarial losses are non-finite")
    return adv_g, adv_d


def _load_images(images) -> np.ndarray:
    if isinstance(images, np.ndarray):
        return images.astype(np.float32)
    from PIL import Image
    arrs = [np.asarray(Image.open(p).convert("RGB"), dtype=np.float32) / 255.0
            for p in images]
    return np.stack(arrs)


def train_inpainter(images, config: InpaintConfig, seed: int,
                    out_dir: Path | str | None = None):
    """Train the restorer on a set of images; returns (Checkpoint, reports).

    Batch indices come from numpy default_rng([seed, 0]) as one
    rng.integers(0, n, size=batch) draw per step. Masks are the centered
    mask_size square. Each step updates the generator first (lambda_rec *
    recon + lambda_adv * adv_g), then the discriminator. On a non-finite
    loss the last snapshot is written (if out_dir is given) and
    NumericError is raised.
    """
    data = _load_images(images)
    if data.ndim != 4 or data.shape[0] == 0:
        raise ValueError("training set is empty or not NxHxWx3")
    n, h, w, _ = data.shape
    s = config.input_size
    if (h, w) != (s, s):
        raise DimensionError(f"images are {h}x{w}, config.input_size is {s}")

    fill = float(data.mean()) if config.fill == "mean" else float(config.fill)
    model = InpaintModel.fresh(config, seed, fill_value=fill)
    opt_g = adam(model.net.parameters(), config.lr)
    opt_d = adam(model.disc.parameters(), config.lr)
    rng = np.random.default_rng([seed, 0])

    mask = center_mask(s, config.mask_size)
    mask_t = torch.from_numpy(mask.astype(np.float32))
    o = (s - config.mask_size) // 2
    hole = slice(o, o + config.mask_size)

    tensor_data = torch.from_numpy(data).permute(0, 3, 1, 2)
    reports: list[LossReport] = []
    snapshot = copy.deepcopy(model.state())
    snapshot_step = 0
    try:
        for step in range(config.steps):
            idx = rng.integers(0, n, size=config.batch_size)
            target = tensor_data[idx]
            masked = target.clone()
            masked[:, :, hole, hole] = fill
            pred = model.net(masked)
            rec = recon_loss(pred, target, mask_t)
            adv_g, adv_d = adversarial_losses(
                model.disc, pred[:, :, hole, hole], target[:, :, hole, hole])
            loss_g = config.lambda_rec * rec + config.lambda_adv * adv_g
            ensure_finite(loss_g, step, "generator loss")
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()
            ensure_finite(adv_d, step, "discriminator loss")
            opt_d.zero_grad()
            adv_d.backward()
            opt_d.step()
            reports.append(make_report(step, rec.item(), adv_g.item(),
                                       adv_d.item(), config.lambda_rec,
                                       config.lambda_adv))
            if (step + 1) % config.snapshot_every == 0:
                snapshot = copy.deepcopy(model.state())
                snapshot_step = step + 1
    except NumericError:
        if out_dir is not None:
            save_checkpoint(snapshot, model.meta(seed, snapshot_step),
                            Path(out_dir) / "checkpoint")
        raise

    meta = model.meta(seed, config.steps)
    if out_dir is not None:
        ckpt = save_checkpoint(model.state(), meta, Path(out_dir) / "checkpoint")
    else:
        ckpt = Checkpoint(params=model.state(), meta=meta)
    return ckpt, reports


def erase_and_restore(model: InpaintModel, image: np.ndarray,
                      region: Box) -> np.ndarray:
    """Remove ``region`` from ``image`` and fill it with restored background.

    The region is erased inside a square context crop (context_scale x the
    region's long side, clipped to the image), the crop is resampled to the
    model's input size, inpainted, warped back, and only the region's
    pixels are replaced. Everything outside ``region`` is untouched.
    """
    h, w = image.shape[:2]
    if not region.inside_image(h, w):
        raise DimensionError(f"{region} not inside {w}x{h} image")
    side = math.ceil(model.config.context_scale * max(region.w, region.h))
    side = min(side, h, w)
    cx = region.x + region.w // 2 - side // 2
    cy = region.y + region.h // 2 - side // 2
    cx = max(0, min(cx, w - side))
    cy = max(0, min(cy, h - side))
    ctx = Box(cx, cy, side, side)

    s = model.config.input_size
    patch = resize(crop(image, ctx), s, s)
    scale = s / side
    rx = Box(max(0, round((region.x - ctx.x) * scale)),
             max(0, round((region.y - ctx.y) * scale)),
             max(1, round(region.w * scale)), max(1, round(region.h * scale)))
    rx = Box(rx.x, rx.y, min(rx.w, s - rx.x), min(rx.h, s - rx.y))
    mask = np.zeros((s, s), dtype=np.uint8)
    mask[rx.y:rx.y1, rx.x:rx.x1] = 1
    restored = inpaint(model, mask_region(patch, mask, model.fill_value))
    back = resize(restored, side, side)
    out = image.copy()
    out[region.y:region.y1, region.x:region.x1] = np.clip(
        back[region.y - ctx.y:region.y1 - ctx.y,
             region.x - ctx.x:region.x1 - ctx.x], 0.0, 1.0)
    return out
