"""Scene text editing: background restoration plus glyph style transfer."""

from .charset import CHARACTERS, N_CHARS, char_index
from .compose import (EditRequest, EditedImage, Placement, composite,
                      edit_text, layout_targets)
from .dataset import (DatasetManifest, build_font_dataset, read_manifest,
                      synth_backgrounds)
from .geometry import Box
from .inpaint import (InpaintConfig, InpaintModel, MaskedImage,
                      adversarial_losses, encode, erase_and_restore, inpaint,
                      mask_region, recon_loss, train_inpainter)
from .metrics import MetricReport, l1_metric, ssim
from .gradcheck import gradcheck
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .rasterize import (ColorGradientSpec, FontSource, GlyphImage,
                        apply_color_gradient, bundled_fonts, ink_coverage,
                        rasterize_glyph)
from .scene import SceneSample, synth_scene
from .transfer import (GlyphModel, GlyphStack, OrnaModel, TransferConfig,
                       adapt_ornament, assemble_input, extract_color_glyphs,
                       extract_source_glyphs, finetune_pipeline, ornament,
                       otsu_threshold, predict_glyph_shapes, pretrain_glyphnet)

__version__ = "0.1.0"

__all__ = [
    "Box", "CHARACTERS", "Checkpoint", "ColorGradientSpec", "DatasetManifest",
    "EditRequest", "EditedImage", "FontSource", "GlyphImage", "GlyphModel",
    "GlyphStack", "InpaintConfig", "InpaintModel", "MaskedImage",
    "MetricReport", "N_CHARS", "OrnaModel", "Placement", "SceneSample",
    "TransferConfig", "adapt_ornament", "adversarial_losses",
    "apply_color_gradient", "assemble_input", "build_font_dataset",
    "bundled_fonts", "char_index", "composite", "edit_text", "encode",
    "erase_and_restore", "extract_color_glyphs", "extract_source_glyphs",
    "finetune_pipeline", "gradcheck", "ink_coverage", "inpaint",
    "l1_metric", "layout_targets", "load_checkpoint", "mask_region",
    "ornament", "otsu_threshold", "predict_glyph_shapes",
    "pretrain_glyphnet", "rasterize_glyph", "read_manifest", "recon_loss",
    "save_checkpoint", "ssim", "synth_backgrounds", "synth_scene",
    "train_inpainter",
]
