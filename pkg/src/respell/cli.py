"""Command-line entry point.

Commands: `dataset build`, `train-inpaint`, `train-glyph`, `edit`, `eval`.
Exit codes: 0 success, 1 runtime failure (failing stage named on stderr),
2 usage error. The LDN_NUM_WORKERS environment variable caps data-loading
parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .checkpoint import config_hash
from .compose import EditRequest, edit_text
from .dataset import WORKERS_ENV, build_font_dataset, read_manifest
from .errors import ConfigError, RespellError
from .geometry import Box
from .inpaint import InpaintConfig, train_inpainter
from .metrics import MetricReport, l1_metric, ssim
from .rasterize import FontSource, luminance
from .transfer import TransferConfig, finetune_pipeline, pretrain_glyphnet


def _add_global_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="TOML/JSON config file")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--print-config", action="store_true",
                   help="print the effective config and exit")
    p.add_argument("--force", action="store_true",
                   help="overwrite outputs produced with a different config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="respell",
        description="Edit the text in an image: erase a word, restore the "
                    "background, and repaint new characters in the source "
                    "style.",
        epilog=f"{WORKERS_ENV} caps data-loading parallelism.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ds = sub.add_parser("dataset", help="glyph dataset tools")
    ds_sub = p_ds.add_subparsers(dest="action", required=True)
    p_build = ds_sub.add_parser("build", help="render a glyph dataset")
    _add_global_flags(p_build)
    p_build.add_argument("--fonts", required=True, metavar="DIR",
                         help="directory of .ttf/.otf files")
    p_build.add_argument("--out", required=True, metavar="DIR")
    p_build.add_argument("--size", type=int, dest="glyph_size")
    p_build.add_argument("--color", action="store_true", default=None)
    p_build.add_argument("--n-fonts", type=int, dest="n_fonts")

    p_ti = sub.add_parser("train-inpaint", help="train the background restorer")
    _add_global_flags(p_ti)
    p_ti.add_argument("--data", required=True, metavar="DIR",
                      help="directory of training PNGs")
    p_ti.add_argument("--out", required=True, metavar="DIR")
    p_ti.add_argument("--steps", type=int)
    p_ti.add_argument("--lambda-adv", type=float, dest="lambda_adv")

    p_tg = sub.add_parser("train-glyph", help="train the style networks")
    _add_global_flags(p_tg)
    p_tg.add_argument("--data", required=True, metavar="DIR",
                      help="glyph dataset directory (manifest)")
    p_tg.add_argument("--out", required=True, metavar="DIR")
    p_tg.add_argument("--stage", required=True,
                      choices=("pretrain", "finetune"))
    p_tg.add_argument("--glyph-ckpt", metavar="DIR",
                      help="pretrained shape checkpoint (finetune only)")
    p_tg.add_argument("--steps", type=int)

    p_ed = sub.add_parser("edit", help="edit the text in one image")
    _add_global_flags(p_ed)
    p_ed.add_argument("--image", required=True, metavar="IN.png")
    p_ed.add_argument("--box", required=True, metavar="x,y,w,h",
                      help="word box")
    p_ed.add_argument("--char-boxes", required=True, metavar="FILE.json",
                      help="JSON list of per-character [x,y,w,h]")
    p_ed.add_argument("--source", required=True, metavar="TEXT")
    p_ed.add_argument("--target", required=True, metavar="TEXT")
    p_ed.add_argument("--ckpt-dir", required=True, metavar="DIR",
                      help="directory holding inpaint/, glyphnet/, ornanet/")
    p_ed.add_argument("--out", required=True, metavar="OUT.png")
    p_ed.add_argument("--audit", metavar="OUT.json")

    p_ev = sub.add_parser("eval", help="compare two image directories")
    _add_global_flags(p_ev)
    p_ev.add_argument("--a", required=True, metavar="DIR")
    p_ev.add_argument("--b", required=True, metavar="DIR")
    p_ev.add_argument("--out", required=True, metavar="DIR")
    return parser


# (command, argparse dest) -> config path
_OVERRIDES = {
    ("dataset", "glyph_size"): ("dataset", "glyph_size"),
    ("dataset", "color"): ("dataset", "color"),
    ("dataset", "n_fonts"): ("dataset", "n_fonts"),
    ("train-inpaint", "steps"): ("inpaint", "steps"),
    ("train-inpaint", "lambda_adv"): ("inpaint", "lambda_adv"),
    ("train-glyph", "steps"): ("glyph", "steps"),
}


def parse_args(argv: list[str]):
    """Returns (command, effective config dict, parsed namespace)."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    command = ns.command if ns.command != "dataset" else "dataset"
    overrides: dict = {}
    for (cmd, dest), (section, key) in _OVERRIDES.items():
        if cmd == command and getattr(ns, dest, None) is not None:
            overrides.setdefault(section, {})[key] = getattr(ns, dest)
    if getattr(ns, "seed", None) is not None:
        overrides["seed"] = ns.seed
    cfg = cfgmod.effective(getattr(ns, "config", None), overrides)
    return command, cfg, ns


def _claim_output(out_dir: Path, cfg: dict, force: bool):
    """Refuse to reuse an output dir built under a different config."""
    marker = out_dir / "run_config.json"
    h = config_hash(cfg)
    if marker.exists():
        prev = json.loads(marker.read_text())
        if prev.get("config_hash") != h and not force:
            raise RespellError(
                f"{out_dir} was produced with config hash "
                f"{prev.get('config_hash')}; current is {h} "
                f"(pass --force to overwrite)")
    out_dir.mkdir(parents=True, exist_ok=True)
    marker.write_text(json.dumps({"config_hash": h, "config": cfg},
                                 sort_keys=True, indent=2) + "\n")


def _cmd_dataset(cfg: dict, ns) -> int:
    fonts_dir = Path(ns.fonts)
    fonts = sorted([p for ext in ("*.ttf", "*.otf")
                    for p in fonts_dir.glob(ext)])
    fonts = [FontSource(str(p)) for p in fonts][: cfg["dataset"]["n_fonts"]]
    if not fonts:
        raise RespellError(f"no .ttf/.otf files under {fonts_dir}")
    out = Path(ns.out)
    _claim_output(out, cfg, ns.force)
    manifest = build_font_dataset(fonts, out, cfg["dataset"]["glyph_size"],
                                  cfg["dataset"]["color"], cfg["seed"])
    print(f"wrote {len(manifest.records)} records "
          f"({len(manifest.rejects)} fonts rejected) to {out}")
    return 0


def _cmd_train_inpaint(cfg: dict, ns) -> int:
    paths = sorted(Path(ns.data).glob("*.png"))
    if not paths:
        raise RespellError(f"no PNGs under {ns.data}")
    out = Path(ns.out)
    _claim_output(out, cfg, ns.force)
    config = InpaintConfig(**cfg["inpaint"])
    ckpt, reports = train_inpainter(paths, config, cfg["seed"], out)
    with open(out / "losses.jsonl", "w") as fh:
        for r in reports:
            fh.write(json.dumps({"step": r.step, "recon": r.recon,
                                 "adv_g": r.adv_g, "adv_d": r.adv_d,
                                 "total": r.total}) + "\n")
    print(f"trained {len(reports)} steps; final recon {reports[-1].recon:.4f}; "
          f"checkpoint at {ckpt.path}")
    return 0


def _cmd_train_glyph(cfg: dict, ns) -> int:
    manifest = read_manifest(ns.data)
    out = Path(ns.out)
    _claim_output(out, cfg, ns.force)
    config = TransferConfig(**cfg["glyph"])
    if ns.stage == "pretrain":
        ckpt, reports = pretrain_glyphnet(manifest, config, cfg["seed"], out)
        last = reports[-1].recon
        print(f"pretrained {len(reports)} steps; final L1 {last:.4f}; "
              f"checkpoint at {ckpt.path}")
    else:
        if not ns.glyph_ckpt:
            raise ConfigError("--glyph-ckpt is required for --stage finetune")
        ckpts, reports = finetune_pipeline(ns.glyph_ckpt, manifest, config,
                                           cfg["seed"], out)
        print(f"finetuned {len(reports)} steps; final shape "
              f"{reports[-1].parts['shape']:.4f}, color "
              f"{reports[-1].parts['color']:.4f}; checkpoints at "
              f"{ckpts['glyphnet'].path} and {ckpts['ornanet'].path}")
    with open(out / "losses.jsonl", "w") as fh:
        for r in reports:
            fh.write(json.dumps({"step": r.step, "recon": r.recon,
                                 "adv_g": r.adv_g, "adv_d": r.adv_d,
                                 "total": r.total, **r.parts}) + "\n")
    return 0


def _parse_box(text: str) -> Box:
    try:
        x, y, w, h = (int(v) for v in text.split(","))
    except ValueError as e:
        raise ConfigError(f"box must be x,y,w,h integers, got {text!r}") from e
    return Box(x, y, w, h)


def _cmd_edit(cfg: dict, ns) -> int:
    from PIL import Image

    word_box = _parse_box(ns.box)
    image = np.asarray(Image.open(ns.image).convert("RGB"),
                       dtype=np.float32) / 255.0
    char_boxes = [Box(*b) for b in json.loads(Path(ns.char_boxes).read_text())]
    request = EditRequest(image=image, word_box=word_box,
                          char_boxes=char_boxes, source_text=ns.source,
                          target_text=ns.target)
    ckpt_dir = Path(ns.ckpt_dir)
    audit_path = Path(ns.audit) if ns.audit else None
    h = config_hash(cfg)
    if audit_path and audit_path.exists() and not ns.force:
        prev = json.loads(audit_path.read_text()).get("config_hash")
        if prev != h:
            raise RespellError(f"{audit_path} was produced with config hash "
                               f"{prev}; current is {h} (pass --force)")
    edited = edit_text(request, ckpt_dir / "inpaint" / "checkpoint",
                       ckpt_dir / "glyphnet", ckpt_dir / "ornanet",
                       seed=cfg["seed"])
    out8 = np.uint8(np.round(np.clip(edited.image, 0, 1) * 255.0))
    Image.fromarray(out8).save(ns.out)
    edited.audit["config_hash"] = h
    if audit_path:
        audit_path.write_text(json.dumps(edited.audit, sort_keys=True,
                                         indent=2) + "\n")
    print(f"wrote {ns.out}")
    return 0


def _cmd_eval(cfg: dict, ns) -> int:
    from PIL import Image

    a_dir, b_dir = Path(ns.a), Path(ns.b)
    names = sorted(p.name for p in a_dir.glob("*.png"))
    if not names:
        raise RespellError(f"no PNGs under {a_dir}")
    out = Path(ns.out)
    _claim_output(out, cfg, ns.force)
    rows = []
    with open(out / "metrics.jsonl", "w") as fh:
        for name in names:
            pa = np.asarray(Image.open(a_dir / name).convert("RGB"),
                            dtype=np.float32) / 255.0
            pb = np.asarray(Image.open(b_dir / name).convert("RGB"),
                            dtype=np.float32) / 255.0
            reports = [
                MetricReport("l1", l1_metric(pa, pb), "full", 1),
                MetricReport("ssim", ssim(luminance(pa), luminance(pb)),
                             "full", 1),
            ]
            for r in reports:
                fh.write(json.dumps({"sample": name, **json.loads(r.to_json())})
                         + "\n")
            rows.append((name, reports[0].value, reports[1].value))
    lines = [f"{'sample':<32} {'l1':>10} {'ssim':>10}"]
    for name, v1, v2 in rows:
        lines.append(f"{name:<32} {v1:>10.6f} {v2:>10.6f}")
    lines.append(f"{'mean':<32} {np.mean([r[1] for r in rows]):>10.6f} "
                 f"{np.mean([r[2] for r in rows]):>10.6f}")
    table = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(table)
    print(table, end="")
    return 0


_STAGE_NAMES = {
    "dataset": "dataset_forge",
    "train-inpaint": "background_restorer",
    "train-glyph": "glyph_transfer",
    "edit": "compositor_pipeline",
    "eval": "eval_harness",
}

_RUNNERS = {
    "dataset": _cmd_dataset,
    "train-inpaint": _cmd_train_inpaint,
    "train-glyph": _cmd_train_glyph,
    "edit": _cmd_edit,
    "eval": _cmd_eval,
}


def run(command: str, cfg: dict, ns) -> int:
    """Dispatch a parsed command; returns the process exit code."""
    try:
        return _RUNNERS[command](cfg, ns)
    except ConfigError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - boundary: name the stage, exit 1
        stage = _STAGE_NAMES.get(command, command)
        print(f"error in {stage}: {e}", file=sys.stderr)
        return 1


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        command, cfg, ns = parse_args(argv)
    except ConfigError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    if ns.print_config:
        sys.stdout.write(cfgmod.canonical_json(cfg))
        return 0
    return run(command, cfg, ns)


if __name__ == "__main__":
    sys.exit(main())
