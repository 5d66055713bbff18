import numpy as np
import pytest

from oevla import raster, world as W
from oevla.font import GLYPHS, HARD_STYLE, PLAIN_STYLE, glyph_bits, render_text_image
from oevla.tasks import NAMEABLE_OBJECTS
from oevla.types import ValidationError


def test_render_deterministic_bytes():
    state = W.reset("A", 11)
    a = raster.render(state, "static", 128)
    b = raster.render(state, "static", 128)
    assert np.array_equal(a, b)
    assert a.shape == (128, 128, 3) and a.dtype == np.uint8


def test_render_resolution_validation():
    state = W.reset("A", 0)
    with pytest.raises(ValidationError):
        raster.render(state, "static", 90)  # not a multiple of 4
    with pytest.raises(ValidationError):
        raster.render(state, "static", 16)  # too small


def test_views_differ_and_wrist_magnifies():
    state = W.reset("A", 2)
    static = raster.render(state, "static", 128)
    wrist = raster.render(state, "wrist", 128)
    assert not np.array_equal(static, wrist)
    # wrist is a 4x nearest-neighbour blow-up: blocks of equal pixels
    assert np.array_equal(wrist[::1, ::1], wrist)
    top_left = wrist[0:4, 0:4]
    assert (top_left == top_left[0, 0]).all()


def test_profiles_render_differently():
    imgs = [raster.render(W.reset(p, 7), "static", 128, profile=W.get_profile(p)) for p in "ABCD"]
    for i in range(4):
        for j in range(i + 1, 4):
            assert not np.array_equal(imgs[i], imgs[j])


def test_state_changes_move_pixels():
    state = W.reset("A", 4)
    img0 = raster.render(state, "static", 128)
    moved = W.step(state, np.array([1.0, 0, 0, 0, 0, 0, 1.0]))
    img1 = raster.render(moved, "static", 128)
    assert not np.array_equal(img0, img1)


def test_led_toggle_changes_only_led_disc():
    from dataclasses import replace

    state = W.reset("A", 8)
    on = replace(state, button_led_on=True)
    off = replace(state, button_led_on=False)
    img_on = raster.render(on, "static", 128)
    img_off = raster.render(off, "static", 128)
    diff = np.argwhere((img_on != img_off).any(axis=2))
    assert len(diff) > 0
    x0, y0, x1, y1 = raster.object_bbox(on, "led", "static", 128)
    assert np.all(diff[:, 0] >= y0) and np.all(diff[:, 0] < y1)
    assert np.all(diff[:, 1] >= x0) and np.all(diff[:, 1] < x1)


def test_block_bbox_contains_block_pixels():
    state = W.reset("B", 6)
    img = raster.render(state, "static", 128)
    x0, y0, x1, y1 = raster.object_bbox(state, "red_block", "static", 128)
    assert (x1 - x0) * (y1 - y0) == 144  # 12x12 at the reference resolution
    crop = img[y0:y1, x0:x1]
    red = raster.BLOCK_COLORS["red_block"]
    assert (crop == red).all(axis=2).sum() > 40


def test_wrist_view_shows_nearby_block_large():
    state = W.reset("A", 3)
    oid, obj = state.objects[0]
    s = state
    for _ in range(64):
        target = np.array([obj.x, obj.y, 0.02])
        delta = np.clip((target - s.gripper_pos) / W.STEP_DELTA, -1, 1)
        s = W.step(s, np.array([*delta, 0, 0, 0, 1.0]))
        if np.allclose(s.gripper_pos, target, atol=1e-6):
            break
    wrist = raster.render(s, "wrist", 128)
    color = raster.BLOCK_COLORS[oid]
    count = (wrist == color).all(axis=2).sum()
    assert count >= 100


def test_detections_cover_all_nameables():
    state = W.reset("C", 12)
    det = raster.detections(state, 128)
    assert set(det) == set(NAMEABLE_OBJECTS)
    for name, (x0, y0, x1, y1) in det.items():
        assert 0 <= x0 < x1 <= 128
        assert 0 <= y0 < y1 <= 128


def test_bbox_tracks_camera_flip():
    state_c = W.reset("C", 5)  # profile C flips x
    x0, _y0, x1, _y1 = raster.object_bbox(state_c, "drawer", "static", 128)
    plain = raster.object_bbox(state_c, "drawer", "static", 128, profile=W.get_profile("A"))
    assert (x0, x1) != (plain[0], plain[2])


def test_object_sprite_small_and_colored():
    sprite = raster.object_sprite("blue_block", background=(10, 10, 10))
    assert sprite.ndim == 3 and sprite.shape[2] == 3
    blue = raster.BLOCK_COLORS["blue_block"]
    assert (sprite == blue).all(axis=2).any()


# ---------------------------------------------------------------- text images


def test_glyph_coverage():
    for ch in "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,!?'\"-_:;<>/":
        assert ch in GLYPHS


def test_text_image_deterministic_plain():
    a = render_text_image("lift the red block", PLAIN_STYLE)
    b = render_text_image("lift the red block", PLAIN_STYLE)
    assert np.array_equal(a, b)
    assert a.shape == (*PLAIN_STYLE.canvas[::-1], 3)


def test_text_image_pixel_count_matches_glyphs():
    text = "open the drawer"
    img = render_text_image(text, PLAIN_STYLE)
    fg = np.asarray(PLAIN_STYLE.fg, dtype=np.uint8)
    count = (img == fg).all(axis=2).sum()
    assert count == glyph_bits(text) * PLAIN_STYLE.scale**2


def test_hard_style_differs_and_needs_rng():
    rng = np.random.default_rng(5)
    a = render_text_image("push the blue block to the left", HARD_STYLE, rng)
    b = render_text_image("push the blue block to the left", PLAIN_STYLE)
    assert not np.array_equal(a, b)
    rng2 = np.random.default_rng(5)
    a2 = render_text_image("push the blue block to the left", HARD_STYLE, rng2)
    assert np.array_equal(a, a2)  # same rng stream, same pixels


def test_text_image_rejects_overflow():
    with pytest.raises(ValidationError):
        render_text_image("x" * 500, PLAIN_STYLE)
