"""Few-shot font style transfer over 62-slot glyph stacks.

Stage one (GlyphNet) completes the shape masks of all 62 characters from
the few that were observed; stage two (OrnaNet) colors those masks to match
the observed ink style. GlyphNet is pretrained alone on grayscale stacks,
then both are finetuned jointly on colorized stacks; at edit time OrnaNet
is additionally adapted for a few steps against the glyphs extracted from
the scene.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import torch

from .charset import CHARACTERS, N_CHARS, char_index
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataset import DatasetManifest, load_stacks
from .errors import DimensionError
from .geometry import Box, crop
from .inpaint import adversarial_losses, recon_loss
from .models import Discriminator, GlyphNet, OrnaNet
from .rasterize import DEFAULT_MARGIN, GlyphImage, luminance, normalize_to_cell
from .training import LossReport, adam, ensure_finite, make_report


@dataclass
class TransferConfig:
    glyph_size: int = 64
    base_channels: int = 32
    depth: int = 3
    orna_channels: int = 16
    disc_channels: int = 8
    steps: int = 1500
    lr: float = 2e-3
    batch_size: int = 8
    observed_min: int = 1
    observed_max: int = 8
    lambda_rec: float = 0.999
    lambda_adv: float = 0.001
    lambda_shape: float = 1.0
    lambda_color: float = 1.0
    adapt_steps: int = 200
    adapt_lr: float = 5e-3
    ink_threshold: float = 0.5
    snapshot_every: int = 200

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GlyphStack:
    """62 glyph slots (shape or color) plus which slots are observed."""

    glyphs: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        self.glyphs = np.asarray(self.glyphs, dtype=np.float32)
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.glyphs.shape[0] != N_CHARS or self.observed.shape != (N_CHARS,):
            raise DimensionError(
                f"glyph stack must have {N_CHARS} slots, got "
                f"{self.glyphs.shape[0]} glyphs / {self.observed.shape} flags")
        if not self.observed.any():
            raise ValueError("glyph stack has no observed slots")
        hidden = self.glyphs[~self.observed]
        if hidden.size and hidden.any():
            raise ValueError("unobserved slots must be all-zero")

    @property
    def is_color(self) -> bool:
        return self.glyphs.ndim == 4


def assemble_input(observed_glyphs) -> GlyphStack:
    """Place observed glyphs into their character slots, zeros elsewhere.

    Accepts a mapping symbol→glyph or an iterable of (symbol, glyph) pairs;
    glyphs may be GlyphImage or arrays, all of one size. Empty input and
    duplicate symbols are errors.
    """
    if isinstance(observed_glyphs, Mapping):
        items = list(observed_glyphs.items())
    else:
        items = list(observed_glyphs)
    if not items:
        raise ValueError("no observed glyphs given")
    arrays: dict[int, np.ndarray] = {}
    shape = None
    for ch, glyph in items:
        idx = char_index(ch)
        if idx in arrays:
            raise ValueError(f"duplicate glyph for symbol {ch!r}")
        arr = glyph.pixels if isinstance(glyph, GlyphImage) else np.asarray(glyph)
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise DimensionError(f"glyph for {ch!r} has shape {arr.shape}, "
                                 f"expected {shape}")
        arrays[idx] = arr.astype(np.float32)
    glyphs = np.zeros((N_CHARS,) + shape, dtype=np.float32)
    observed = np.zeros(N_CHARS, dtype=bool)
    for idx, arr in arrays.items():
        glyphs[idx] = arr
        observed[idx] = True
    return GlyphStack(glyphs=glyphs, observed=observed)


@dataclass
class GlyphModel:
    net: GlyphNet
    config: TransferConfig

    @classmethod
    def fresh(cls, config: TransferConfig, seed: int) -> "GlyphModel":
        torch.manual_seed(seed)
        net = GlyphNet(config.glyph_size, config.base_channels, config.depth)
        return cls(net=net, config=config)

    @classmethod
    def from_checkpoint(cls, path: Path | str) -> "GlyphModel":
        ckpt = load_checkpoint(path)
        if ckpt.meta.get("kind") != "glyphnet":
            raise DimensionError(f"checkpoint at {path} is "
                                 f"{ckpt.meta.get('kind')!r}, not 'glyphnet'")
        config = TransferConfig(**ckpt.meta["config"])
        model = cls.fresh(config, seed=0)
        model.net.load_state_dict(ckpt.params)
        return model

    def meta(self, seed: int, step: int) -> dict:
        return {"kind": "glyphnet", "config": self.config.to_dict(),
                "seed": seed, "step": step, "char_set": CHARACTERS,
                "glyph_size": self.config.glyph_size,
                "observed_count_range": [self.config.observed_min,
                                         self.config.observed_max]}


@dataclass
class OrnaModel:
    net: OrnaNet
    config: TransferConfig
    disc: Discriminator | None = None

    @classmethod
    def fresh(cls, config: TransferConfig, seed: int,
              with_disc: bool = False) -> "OrnaModel":
        torch.manual_seed(seed)
        net = OrnaNet(config.orna_channels)
        disc = Discriminator(config.glyph_size, 3, config.disc_channels) \
            if with_disc else None
        return cls(net=net, config=config, disc=disc)

    @classmethod
    def from_checkpoint(cls, path: Path | str) -> "OrnaModel":
        ckpt = load_checkpoint(path)
        if ckpt.meta.get("kind") != "ornanet":
            raise DimensionError(f"checkpoint at {path} is "
                                 f"{ckpt.meta.get('kind')!r}, not 'ornanet'")
        config = TransferConfig(**ckpt.meta["config"])
        model = cls.fresh(config, seed=0)
        model.net.load_state_dict(
            {k[4:]: v for k, v in ckpt.params.items() if k.startswith("net.")})
        return model

    def state(self) -> dict[str, torch.Tensor]:
        out = {f"net.{k}": v for k, v in self.net.state_dict().items()}
        if self.disc is not None:
            out.update({f"disc.{k}": v for k, v in self.disc.state_dict().items()})
        return out

    def meta(self, seed: int, step: int) -> dict:
        return {"kind": "ornanet", "config": self.config.to_dict(),
                "seed": seed, "step": step, "char_set": CHARACTERS,
                "glyph_size": self.config.glyph_size,
                "observed_count_range": [self.config.observed_min,
                                         self.config.observed_max]}


def predict_glyph_shapes(model: GlyphModel, stack: GlyphStack) -> np.ndarray:
    """Complete a grayscale stack into 62 shape masks in [0,1]."""
    if stack.is_color:
        raise DimensionError("predict_glyph_shapes expects a grayscale stack")
    s = model.config.glyph_size
    if stack.glyphs.shape[1:] != (s, s):
        raise DimensionError(f"stack glyphs are {stack.glyphs.shape[1:]}, "
                             f"model expects {s}x{s}")
    with torch.no_grad():
        out = model.net(torch.from_numpy(stack.glyphs).unsqueeze(0))
    return out.squeeze(0).numpy()


def style_color(exemplars: GlyphStack, core_fraction: float = 0.5) -> np.ndarray:
    """Mean ink RGB over the observed slots of a color stack.

    Ink pixels are those whose max channel exceeds ``core_fraction`` of the
    slot's peak, which discards antialiased edges and the zero background.
    """
    if not exemplars.is_color:
        raise DimensionError("style_color expects a color stack")
    colors = []
    for i in np.nonzero(exemplars.observed)[0]:
        g = exemplars.glyphs[i]
        peak = g.max()
        if peak <= 0:
            continue
        core = g.max(axis=-1) > core_fraction * peak
        if core.any():
            colors.append(g[core].mean(axis=0))
    if not colors:
        return np.zeros(3, dtype=np.float32)
    return np.mean(colors, axis=0).astype(np.float32)


def _orna_forward(net: OrnaNet, masks: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
    """Run OrnaNet per slot: masks (B,62,H,W), style (B,3) → rgb (B,62,3,H,W)."""
    b, n, h, w = masks.shape
    flat = masks.reshape(b * n, 1, h, w)
    sty = style[:, None, :].expand(b, n, 3).reshape(b * n, 3)
    sty = sty[:, :, None, None].expand(b * n, 3, h, w)
    rgb = net(torch.cat([flat, sty], dim=1))
    return rgb.reshape(b, n, 3, h, w)


def ornament(model: OrnaModel, shapes: np.ndarray, exemplars: GlyphStack,
             threshold: float | None = None) -> np.ndarray:
    """Color the 62 shape masks to match the exemplar style.

    Output is 62×H×W×3 in [0,1]; pixels whose shape mask is below the ink
    threshold are exactly the background color (0), ink pixels carry the
    network color scaled by the mask so edges stay soft.
    """
    shapes = np.asarray(shapes, dtype=np.float32)
    if shapes.shape != (N_CHARS, model.config.glyph_size, model.config.glyph_size):
        raise DimensionError(f"shapes must be 62x{model.config.glyph_size}"
                             f"x{model.config.glyph_size}, got {shapes.shape}")
    thr = model.config.ink_threshold if threshold is None else threshold
    style = torch.from_numpy(style_color(exemplars)).unsqueeze(0)
    with torch.no_grad():
        rgb = _orna_forward(model.net, torch.from_numpy(shapes).unsqueeze(0), style)
    rgb = rgb.squeeze(0).permute(0, 2, 3, 1).numpy()
    out = rgb * shapes[..., None]
    out[shapes < thr] = 0.0
    return out.astype(np.float32)


def _hide_slots(rng: np.random.Generator, batch: int, lo: int, hi: int) -> np.ndarray:
    """Draw observation masks: per sample, k = rng.integers(lo, hi+1), then
    rng.choice(62, size=k, replace=False). Returns (batch, 62) bool."""
    observed = np.zeros((batch, N_CHARS), dtype=bool)
    for b in range(batch):
        k = int(rng.integers(lo, hi + 1))
        observed[b, rng.choice(N_CHARS, size=k, replace=False)] = True
    return observed


def pretrain_glyphnet(manifest: DatasetManifest, config: TransferConfig,
                      seed: int, out_dir: Path | str | None = None):
    """Train GlyphNet on grayscale stacks with randomly hidden slots.

    Per-step draws from numpy default_rng([seed, 0]), in order: font
    indices rng.integers(0, n_fonts, size=batch_size), then the per-sample
    hide draws of _hide_slots. Loss is plain L1 between the predicted and
    the complete stack. Returns (Checkpoint, reports).
    """
    _font_ids, stacks = load_stacks(manifest)
    if stacks.size == 0:
        raise ValueError("manifest has no complete fonts")
    if stacks.ndim != 4:
        raise DimensionError("pretraining needs a grayscale manifest")
    data = torch.from_numpy(stacks.astype(np.float32))
    n = data.shape[0]

    model = GlyphModel.fresh(config, seed)
    opt = adam(model.net.parameters(), config.lr)
    rng = np.random.default_rng([seed, 0])
    reports: list[LossReport] = []
    snapshot = copy.deepcopy(model.net.state_dict())
    snapshot_step = 0
    try:
        for step in range(config.steps):
            idx = rng.integers(0, n, size=config.batch_size)
            target = data[idx]
            observed = _hide_slots(rng, config.batch_size,
                                   config.observed_min, config.observed_max)
            inp = target * torch.from_numpy(
                observed.astype(np.float32))[:, :, None, None]
            out = model.net(inp)
            loss = torch.abs(out - target).mean()
            ensure_finite(loss, step)
            opt.zero_grad()
            loss.backward()
            opt.step()
            reports.append(make_report(step, loss.item(), 0.0, 0.0,
                                       config.lambda_rec, config.lambda_adv))
            if (step + 1) % config.snapshot_every == 0:
                snapshot = copy.deepcopy(model.net.state_dict())
                snapshot_step = step + 1
    except Exception:
        if out_dir is not None:
            save_checkpoint(snapshot, model.meta(seed, snapshot_step),
                            Path(out_dir) / "glyphnet")
        raise

    meta = model.meta(seed, config.steps)
    if out_dir is not None:
        ckpt = save_checkpoint(model.net.state_dict(), meta,
                               Path(out_dir) / "glyphnet")
    else:
        ckpt = Checkpoint(params=model.net.state_dict(), meta=meta)
    return ckpt, reports


def finetune_pipeline(glyph_ckpt: Path | str, manifest: DatasetManifest,
                      config: TransferConfig, seed: int,
                      out_dir: Path | str | None = None):
    """Joint finetuning of GlyphNet and a fresh OrnaNet on a color manifest.

    Shape targets are the channel max of each color glyph (bright ink on a
    zero background), so GlyphNet keeps its own L1 loss; OrnaNet gets an L1
    on ink pixels plus a non-saturating adversarial term from a small
    discriminator that sees one slot per sample. Per-step draws come from
    numpy default_rng([seed, 1]): font indices, the hide draws, then one
    adversarial slot index per sample. Returns ({"glyphnet": Checkpoint,
    "ornanet": Checkpoint}, reports).
    """
    _font_ids, stacks = load_stacks(manifest)
    if stacks.size == 0:
        raise ValueError("manifest has no complete fonts")
    if stacks.ndim != 5:
        raise DimensionError("finetuning needs a color manifest")
    glyph_model = GlyphModel.from_checkpoint(glyph_ckpt)
    if glyph_model.config.glyph_size != config.glyph_size:
        raise DimensionError(
            f"glyph checkpoint size {glyph_model.config.glyph_size} != "
            f"config size {config.glyph_size}")
    orna_model = OrnaModel.fresh(config, seed, with_disc=True)

    colors = torch.from_numpy(stacks.astype(np.float32)).permute(0, 1, 4, 2, 3)
    shapes_t = colors.max(dim=2).values  # (n, 62, H, W)
    ink = (shapes_t > config.ink_threshold).float()
    n = colors.shape[0]

    params_g = list(glyph_model.net.parameters()) + list(orna_model.net.parameters())
    opt_g = adam(params_g, config.lr)
    opt_d = adam(orna_model.disc.parameters(), config.lr)
    rng = np.random.default_rng([seed, 1])
    reports: list[LossReport] = []
    for step in range(config.steps):
        idx = rng.integers(0, n, size=config.batch_size)
        observed = _hide_slots(rng, config.batch_size,
                               config.observed_min, config.observed_max)
        adv_slots = rng.integers(0, N_CHARS, size=config.batch_size)

        target_shape = shapes_t[idx]
        target_color = colors[idx]
        obs = torch.from_numpy(observed.astype(np.float32))
        inp = target_shape * obs[:, :, None, None]
        pred_shape = glyph_model.net(inp)
        shape_l1 = torch.abs(pred_shape - target_shape).mean()

        styles = []
        for b in range(config.batch_size):
            ex = GlyphStack(glyphs=stacks[idx[b]] *
                            observed[b][:, None, None, None],
                            observed=observed[b])
            styles.append(style_color(ex))
        style = torch.from_numpy(np.stack(styles))
        rgb = _orna_forward(orna_model.net, pred_shape, style)
        pred_color = rgb * pred_shape[:, :, None, :, :]
        ink_sel = ink[idx][:, :, None, :, :]
        color_l1 = recon_loss(pred_color, target_color, ink_sel)

        rows = torch.arange(config.batch_size)
        fake = pred_color[rows, adv_slots]
        real = target_color[rows, adv_slots]
        adv_g, adv_d = adversarial_losses(orna_model.disc, fake, real)

        recon = config.lambda_shape * shape_l1 + config.lambda_color * color_l1
        loss_g = config.lambda_rec * recon + config.lambda_adv * adv_g
        ensure_finite(loss_g, step)
        opt_g.zero_grad()
        loss_g.backward()
        opt_g.step()
        opt_d.zero_grad()
        adv_d.backward()
        opt_d.step()

        shape_f, color_f = shape_l1.item(), color_l1.item()
        recon_f = config.lambda_shape * shape_f + config.lambda_color * color_f
        reports.append(make_report(step, recon_f, adv_g.item(), adv_d.item(),
                                   config.lambda_rec, config.lambda_adv,
                                   parts={"shape": shape_f, "color": color_f}))

    g_meta = glyph_model.meta(seed, config.steps)
    o_meta = orna_model.meta(seed, config.steps)
    if out_dir is not None:
        g_ckpt = save_checkpoint(glyph_model.net.state_dict(), g_meta,
                                 Path(out_dir) / "glyphnet")
        o_ckpt = save_checkpoint(orna_model.state(), o_meta,
                                 Path(out_dir) / "ornanet")
    else:
        g_ckpt = Checkpoint(params=glyph_model.net.state_dict(), meta=g_meta)
        o_ckpt = Checkpoint(params=orna_model.state(), meta=o_meta)
    return {"glyphnet": g_ckpt, "ornanet": o_ckpt}, reports


def adapt_ornament(model: OrnaModel, shapes: np.ndarray, exemplars: GlyphStack,
                   steps: int | None = None, lr: float | None = None) -> OrnaModel:
    """Fit a copy of OrnaNet to the observed exemplar colors.

    Full-batch optimization (no sampling, deterministic) of the ink-pixel
    L1 between the colored observed slots and the exemplars. Used per edit
    request to pull dataset-trained colors onto the scene's actual style.
    """
    if not exemplars.is_color:
        raise DimensionError("adapt_ornament expects color exemplars")
    steps = model.config.adapt_steps if steps is None else steps
    lr = model.config.adapt_lr if lr is None else lr
    adapted = OrnaModel(net=copy.deepcopy(model.net), config=model.config)
    obs = np.nonzero(exemplars.observed)[0]
    masks = torch.from_numpy(np.asarray(shapes, dtype=np.float32)[obs]).unsqueeze(0)
    target = torch.from_numpy(exemplars.glyphs[obs]).permute(0, 3, 1, 2).unsqueeze(0)
    ink_sel = (masks > model.config.ink_threshold).float()[:, :, None, :, :]
    style = torch.from_numpy(style_color(exemplars)).unsqueeze(0)
    opt = adam(adapted.net.parameters(), lr)
    masks_in = masks.squeeze(0).unsqueeze(1)  # (k,1,H,W) per-slot batch
    sty = style.expand(masks_in.shape[0], 3)[:, :, None, None] \
        .expand(masks_in.shape[0], 3, *masks_in.shape[2:])
    for step in range(steps):
        rgb = adapted.net(torch.cat([masks_in, sty], dim=1))
        pred = rgb.unsqueeze(0) * masks.unsqueeze(2)
        loss = recon_loss(pred, target, ink_sel)
        ensure_finite(loss, step, "adaptation loss")
        opt.zero_grad()
        loss.backward()
        opt.step()
    return adapted


def extract_source_glyphs(image: np.ndarray, char_boxes: list[Box], text: str,
                          glyph_size: int = 64,
                          margin: float = DEFAULT_MARGIN) -> dict[str, np.ndarray]:
    """Cut the source characters out of a scene as normalized shape masks.

    Each box is cropped, converted to luminance, binarized with an Otsu
    threshold (the minority side of the threshold is taken as ink), and the
    ink is renormalized into the standard glyph cell. Repeated symbols keep
    their first occurrence.
    """
    return {ch: g for ch, (g, _c) in
            _extract(image, char_boxes, text, glyph_size, margin).items()}


def extract_color_glyphs(image: np.ndarray, char_boxes: list[Box], text: str,
                         glyph_size: int = 64,
                         margin: float = DEFAULT_MARGIN) -> GlyphStack:
    """Like extract_source_glyphs but keeps ink RGB (background zeroed),
    assembled into a color GlyphStack for style fitting."""
    colors = {ch: c for ch, (_g, c) in
              _extract(image, char_boxes, text, glyph_size, margin).items()}
    return assemble_input(colors)


def _extract(image, char_boxes, text, glyph_size, margin):
    if len(char_boxes) != len(text):
        raise ValueError(f"{len(char_boxes)} boxes for {len(text)} characters")
    if not text:
        raise ValueError("text is empty")
    image = np.asarray(image, dtype=np.float32)
    out: dict[str, tuple] = {}
    for ch, box in zip(text, char_boxes):
        char_index(ch)
        if ch in out:
            continue
        patch = crop(image, box)
        lum = luminance(patch) if patch.ndim == 3 else patch
        t = otsu_threshold(lum)
        hi = lum > t
        ink = ~hi if hi.mean() > 0.5 else hi
        rgb = patch if patch.ndim == 3 else np.repeat(patch[:, :, None], 3, axis=2)
        mask, color = normalize_to_cell(ink.astype(np.float32), glyph_size,
                                        margin, companions=[rgb * ink[:, :, None]])
        out[ch] = (mask, color)
    return out


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Otsu's threshold: maximizes between-class variance of a histogram."""
    v = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return lo
    hist, edges = np.histogram(v, bins=bins, range=(lo, hi))
    p = hist.astype(np.float64) / v.size
    centers = (edges[:-1] + edges[1:]) / 2.0
    w0 = np.cumsum(p)
    w1 = 1.0 - w0
    m0 = np.cumsum(p * centers)
    m_total = m0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0 / w0
        mu1 = (m_total - m0) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = -1.0
    return float(centers[int(np.argmax(between))])
