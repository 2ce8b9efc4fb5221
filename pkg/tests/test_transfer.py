import numpy as np
import pytest
import torch

from respell import (GlyphModel, GlyphStack, OrnaModel, TransferConfig,
                     adapt_ornament, assemble_input, extract_color_glyphs,
                     extract_source_glyphs, finetune_pipeline, ornament,
                     otsu_threshold, predict_glyph_shapes, pretrain_glyphnet,
                     rasterize_glyph, synth_scene)
from respell.charset import CHARACTERS
from respell.errors import CharsetError, DimensionError
from respell.geometry import Box
from respell.transfer import _hide_slots, style_color

MICRO = TransferConfig(glyph_size=16, base_channels=4, depth=2,
                       orna_channels=4, disc_channels=4, steps=4,
                       batch_size=2, snapshot_every=2)


def square_glyph(size=16, value=1.0):
    g = np.zeros((size, size), dtype=np.float32)
    g[4:size - 4, 4:size - 4] = value
    return g


def test_assemble_places_by_char_index():
    g = square_glyph()
    stack = assemble_input({"A": g})
    assert np.array_equal(stack.glyphs[10], g)
    assert stack.observed[10] and stack.observed.sum() == 1
    assert np.all(stack.glyphs[[i for i in range(62) if i != 10]] == 0)


def test_assemble_full_and_four(fonts):
    full = {ch: square_glyph() for ch in CHARACTERS}
    assert assemble_input(full).observed.all()
    four = {ch: square_glyph() for ch in "ABab"}
    assert assemble_input(four).observed.sum() == 4


def test_assemble_errors():
    with pytest.raises(ValueError):
        assemble_input({})
    with pytest.raises(ValueError):
        assemble_input([("A", square_glyph()), ("A", square_glyph())])
    with pytest.raises(CharsetError):
        assemble_input({"!": square_glyph()})
    with pytest.raises(DimensionError):
        assemble_input([("A", square_glyph(16)), ("B", square_glyph(32))])


def test_assemble_readback_identity():
    glyphs = {ch: square_glyph(value=v) for ch, v in
              zip("XyZ9", (0.3, 0.5, 0.7, 1.0))}
    stack = assemble_input(glyphs)
    for ch, g in glyphs.items():
        from respell import char_index
        assert np.array_equal(stack.glyphs[char_index(ch)], g)


def test_stack_invariants():
    glyphs = np.zeros((62, 8, 8), np.float32)
    with pytest.raises(ValueError):
        GlyphStack(glyphs=glyphs, observed=np.zeros(62, bool))
    observed = np.zeros(62, bool)
    observed[3] = True
    bad = glyphs.copy()
    bad[5, 0, 0] = 1.0  # slot 5 unobserved but non-zero
    with pytest.raises(ValueError):
        GlyphStack(glyphs=bad, observed=observed)
    with pytest.raises(DimensionError):
        GlyphStack(glyphs=np.zeros((61, 8, 8)), observed=observed)


def test_predict_shapes_contract():
    model = GlyphModel.fresh(MICRO, seed=0)
    stack = assemble_input({"A": square_glyph(), "b": square_glyph()})
    out1 = predict_glyph_shapes(model, stack)
    out2 = predict_glyph_shapes(model, stack)
    assert out1.shape == (62, 16, 16)
    assert out1.min() >= 0.0 and out1.max() <= 1.0
    assert np.array_equal(out1, out2)


def test_predict_shapes_default_size_is_64(gray_manifest):
    cfg = TransferConfig()
    model = GlyphModel.fresh(cfg, seed=0)
    stack = assemble_input({"A": np.zeros((64, 64), np.float32) + 0.6})
    assert predict_glyph_shapes(model, stack).shape == (62, 64, 64)


def test_predict_shapes_size_mismatch():
    model = GlyphModel.fresh(MICRO, seed=0)
    with pytest.raises(DimensionError):
        predict_glyph_shapes(model, assemble_input({"A": square_glyph(32)}))


def color_stack(color=(0.8, 0.3, 0.2), observed_chars="AB"):
    glyphs = np.zeros((62, 16, 16, 3), np.float32)
    observed = np.zeros(62, bool)
    from respell import char_index
    for ch in observed_chars:
        i = char_index(ch)
        glyphs[i, 4:12, 4:12] = color
        observed[i] = True
    return GlyphStack(glyphs=glyphs, observed=observed)


def test_ornament_contract():
    model = OrnaModel.fresh(MICRO, seed=0)
    shapes = np.stack([square_glyph() for _ in range(62)])
    out = ornament(model, shapes, color_stack())
    assert out.shape == (62, 16, 16, 3)
    assert out.min() >= 0.0 and out.max() <= 1.0
    # background (mask below threshold) is exactly the background color
    assert np.all(out[shapes < MICRO.ink_threshold] == 0.0)
    # all-zero shapes: output equals the background everywhere
    zero = ornament(model, np.zeros((62, 16, 16), np.float32), color_stack())
    assert np.all(zero == 0.0)


def test_ornament_requires_observed_exemplar():
    with pytest.raises(ValueError):
        color_stack(observed_chars="")


def test_style_color_recovers_flat_color():
    c = (0.7, 0.4, 0.1)
    sc = style_color(color_stack(color=c))
    assert np.allclose(sc, c, atol=1e-5)


def test_hide_slots_replay():
    rng = np.random.default_rng(42)
    observed = _hide_slots(rng, 3, 1, 8)
    replay = np.random.default_rng(42)
    for b in range(3):
        k = int(replay.integers(1, 9))
        slots = replay.choice(62, size=k, replace=False)
        expected = np.zeros(62, bool)
        expected[slots] = True
        assert np.array_equal(observed[b], expected)
        assert observed[b].sum() == k


def test_pretrain_history_and_replay(gray_manifest):
    cfg = TransferConfig(glyph_size=64, base_channels=4, depth=2, steps=3,
                         batch_size=2, snapshot_every=2)
    ckpt, reports = pretrain_glyphnet(gray_manifest, cfg, seed=5)
    assert len(reports) == 3
    assert [r.step for r in reports] == [0, 1, 2]
    # documented draw order: font indices, then the per-sample hide draws
    replay = np.random.default_rng([5, 0])
    idx = replay.integers(0, 2, size=2)
    _ = _hide_slots(replay, 2, cfg.observed_min, cfg.observed_max)
    idx2 = replay.integers(0, 2, size=2)
    assert idx.shape == (2,) and idx2.shape == (2,)
    assert ckpt.meta["kind"] == "glyphnet"
    assert ckpt.meta["char_set"] == CHARACTERS
    assert ckpt.meta["observed_count_range"] == [1, 8]


def test_pretrain_loss_decreases_on_overfit(gray_manifest):
    cfg = TransferConfig(glyph_size=64, base_channels=8, depth=2, steps=40,
                         batch_size=2)
    _, reports = pretrain_glyphnet(gray_manifest, cfg, seed=5)
    assert reports[-1].recon < reports[0].recon


def test_finetune_total_formula_and_reduction(gray_manifest, color_manifest,
                                              tmp_path):
    pre_cfg = TransferConfig(glyph_size=64, base_channels=4, depth=2, steps=2,
                             batch_size=2)
    pretrain_glyphnet(gray_manifest, pre_cfg, seed=5, out_dir=tmp_path)
    cfg = TransferConfig(glyph_size=64, base_channels=4, depth=2, steps=3,
                         batch_size=2)
    ckpts, reports = finetune_pipeline(tmp_path / "glyphnet", color_manifest,
                                       cfg, seed=5)
    assert len(reports) == 3
    for r in reports:
        recon = cfg.lambda_shape * r.parts["shape"] + \
            cfg.lambda_color * r.parts["color"]
        assert r.recon == recon
        assert r.total == cfg.lambda_rec * r.recon + cfg.lambda_adv * r.adv_g
    # zeroing color and adversarial weights leaves only the shape term
    cfg0 = TransferConfig(glyph_size=64, base_channels=4, depth=2, steps=2,
                          batch_size=2, lambda_color=0.0, lambda_adv=0.0)
    _, reports0 = finetune_pipeline(tmp_path / "glyphnet", color_manifest,
                                    cfg0, seed=5)
    for r in reports0:
        assert r.total == cfg0.lambda_rec * (cfg0.lambda_shape * r.parts["shape"])
    assert set(ckpts) == {"glyphnet", "ornanet"}


def test_adapt_ornament_fits_flat_color():
    model = OrnaModel.fresh(MICRO, seed=0)
    shapes = np.stack([square_glyph() for _ in range(62)])
    target = (0.15, 0.55, 0.9)
    exemplars = color_stack(color=target, observed_chars="ABC")
    adapted = adapt_ornament(model, shapes, exemplars, steps=150, lr=5e-3)
    out = ornament(adapted, shapes, exemplars)
    ink = shapes[0] > 0.5
    for i in range(62):
        mean_color = out[i][ink].mean(axis=0)
        assert np.abs(mean_color - target).max() < 0.1, i
    # the original model is untouched
    before = ornament(model, shapes, exemplars)
    assert not np.array_equal(before, out)


def test_extract_source_glyphs(serif_font):
    bg = np.full((96, 256, 3), 0.85, dtype=np.float32)
    scene = synth_scene(bg, "AA", serif_font, (40, 20), 40, 6, seed=12)
    glyphs = extract_source_glyphs(scene.image, scene.char_boxes, scene.text, 64)
    assert list(glyphs) == ["A"]  # repeated symbols keep the first
    ref = rasterize_glyph(serif_font, "A", 64)
    a = glyphs["A"] > 0.5
    b = ref.pixels > 0.5
    iou = (a & b).sum() / (a | b).sum()
    assert iou >= 0.8


def test_extract_box_outside_image_fails(serif_font):
    img = np.zeros((32, 32, 3), np.float32)
    with pytest.raises(DimensionError):
        extract_source_glyphs(img, [Box(20, 20, 20, 20)], "A", 16)
    with pytest.raises(ValueError):
        extract_source_glyphs(img, [Box(0, 0, 8, 8)], "AB", 16)
    with pytest.raises(ValueError):
        extract_source_glyphs(img, [], "", 16)


def test_extract_color_glyphs_ink_color(serif_font):
    bg = np.full((96, 256, 3), 0.9, dtype=np.float32)
    scene = synth_scene(bg, "B8", serif_font, (40, 20), 40, 6, seed=31)
    stack = extract_color_glyphs(scene.image, scene.char_boxes, scene.text, 32)
    assert stack.is_color and stack.observed.sum() == 2
    ink_color = np.random.default_rng(31).uniform(size=3)
    assert np.abs(style_color(stack) - ink_color).max() < 0.15


def test_otsu_threshold_against_sweep(rng):
    values = np.concatenate([rng.normal(0.2, 0.05, 400),
                             rng.normal(0.8, 0.05, 200)])
    t = otsu_threshold(values)

    def between_class(thresh):
        lo, hi = values[values <= thresh], values[values > thresh]
        if len(lo) == 0 or len(hi) == 0:
            return -1.0
        w0, w1 = len(lo) / len(values), len(hi) / len(values)
        return w0 * w1 * (lo.mean() - hi.mean()) ** 2

    sweep = np.linspace(values.min(), values.max(), 512)
    best = sweep[np.argmax([between_class(s) for s in sweep])]
    assert abs(t - best) < 0.02
    assert otsu_threshold(np.full(10, 0.4)) == pytest.approx(0.4)


def test_glyph_checkpoint_roundtrip(gray_manifest, tmp_path):
    cfg = TransferConfig(glyph_size=64, base_channels=4, depth=2, steps=2,
                         batch_size=2)
    ckpt, _ = pretrain_glyphnet(gray_manifest, cfg, seed=5, out_dir=tmp_path)
    model = GlyphModel.from_checkpoint(tmp_path / "glyphnet")
    for k, v in model.net.state_dict().items():
        assert torch.equal(v, ckpt.params[k])
