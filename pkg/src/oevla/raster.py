"""Integer-only rasterizer for the miniature world.

Everything is drawn with integer pixel math (rect fills, integer discs, nearest
upscaling) so renders are byte-stable across platforms.  The same geometry
helpers back both drawing and ground-truth bounding boxes, which keeps the two
consistent by construction.
"""

from __future__ import annotations

import numpy as np

from .tasks import NAMEABLE_OBJECTS
from .types import ValidationError
from .world import (
    SLIDER_TRAVEL,
    EnvProfile,
    WorldState,
    drawer_handle,
    get_profile,
    slider_handle,
)

BLOCK_COLORS = {
    "red_block": (204, 42, 42),
    "blue_block": (42, 80, 204),
    "pink_block": (228, 120, 172),
}
DRAWER_FACE = (88, 60, 36)
DRAWER_HANDLE = (150, 104, 64)
SLIDER_TRACK = (108, 108, 114)
SLIDER_HANDLE = (176, 176, 176)
SWITCH_BASE = (150, 150, 92)
BUTTON_BASE = (124, 92, 92)
BULB_ON = (252, 220, 64)
BULB_OFF = (72, 72, 48)
LED_ON = (84, 228, 84)
LED_OFF = (44, 72, 44)
GRIPPER_COLOR = (18, 18, 18)

BLOCK_SIZE = 12  # pixels at the 128x128 reference resolution


def _sz(n: int, resolution: int) -> int:
    """Scale a 128-reference pixel size to `resolution`."""
    return max(1, (n * resolution) // 128)


def _px(v: float, resolution: int) -> int:
    return int(v * (resolution - 1) + 0.5)


def _fill_rect(img: np.ndarray, x0: int, y0: int, x1: int, y1: int, color) -> None:
    res_y, res_x = img.shape[:2]
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, res_x), min(y1, res_y)
    if x0 < x1 and y0 < y1:
        img[y0:y1, x0:x1] = color


def _fill_disc(img: np.ndarray, cx: int, cy: int, r: int, color) -> None:
    res = img.shape[0]
    y0, y1 = max(cy - r, 0), min(cy + r + 1, res)
    x0, x1 = max(cx - r, 0), min(cx + r + 1, img.shape[1])
    if x0 >= x1 or y0 >= y1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    img[y0:y1, x0:x1][mask] = color


def _outline_rect(img, x0, y0, x1, y1, t, color) -> None:
    _fill_rect(img, x0, y0, x1, y0 + t, color)
    _fill_rect(img, x0, y1 - t, x1, y1, color)
    _fill_rect(img, x0, y0, x0 + t, y1, color)
    _fill_rect(img, x1 - t, y0, x1, y1, color)


def _camera_point(px: int, py: int, profile: EnvProfile, resolution: int) -> tuple[int, int]:
    px += int(profile.cam_pan[0] * resolution)
    py += int(profile.cam_pan[1] * resolution)
    if profile.cam_flip_x:
        px = resolution - 1 - px
    return px, py


def _object_center(state: WorldState, object_id: str, profile: EnvProfile):
    if object_id in BLOCK_COLORS:
        obj = state.obj(object_id)
        return obj.x, obj.y
    if object_id == "drawer":
        h = drawer_handle(state, profile)
        return float(h[0]), float(h[1])
    if object_id == "slider":
        h = slider_handle(state, profile)
        return float(h[0]), float(h[1])
    if object_id == "lightbulb":
        return profile.bulb_pos
    if object_id == "led":
        return profile.led_pos
    raise ValidationError(f"no renderable object named {object_id!r}")


def _object_extent(object_id: str, resolution: int) -> tuple[int, int]:
    """(width, height) of the object's drawn footprint, in pixels."""
    if object_id in BLOCK_COLORS:
        s = _sz(BLOCK_SIZE, resolution)
        return s, s
    if object_id == "drawer":
        return _sz(10, resolution), _sz(6, resolution)
    if object_id == "slider":
        return _sz(8, resolution), _sz(10, resolution)
    if object_id in ("lightbulb", "led"):
        r = _sz(5, resolution)
        return 2 * r + 1, 2 * r + 1
    raise ValidationError(f"no renderable object named {object_id!r}")


def _render_world(state: WorldState, profile: EnvProfile, resolution: int, camera: bool) -> np.ndarray:
    img = np.empty((resolution, resolution, 3), dtype=np.uint8)
    img[:] = profile.table_color

    def tf(x: float, y: float) -> tuple[int, int]:
        px, py = _px(x, resolution), _px(y, resolution)
        return _camera_point(px, py, profile, resolution) if camera else (px, py)

    def rect_at(x, y, w, h, color):
        cx, cy = tf(x, y)
        _fill_rect(img, cx - w // 2, cy - h // 2, cx - w // 2 + w, cy - h // 2 + h, color)

    # drawer face sits behind its handle travel
    rect_at(profile.drawer_base[0], profile.drawer_base[1] - 0.06, _sz(22, resolution), _sz(8, resolution), DRAWER_FACE)
    dh = drawer_handle(state, profile)
    rect_at(float(dh[0]), float(dh[1]), _sz(10, resolution), _sz(6, resolution), DRAWER_HANDLE)

    rect_at(
        profile.slider_base[0] + SLIDER_TRAVEL / 2,
        profile.slider_base[1],
        int(SLIDER_TRAVEL * (resolution - 1)) + _sz(8, resolution),
        _sz(4, resolution),
        SLIDER_TRACK,
    )
    sh = slider_handle(state, profile)
    rect_at(float(sh[0]), float(sh[1]), _sz(8, resolution), _sz(10, resolution), SLIDER_HANDLE)

    rect_at(*profile.switch_pos, _sz(8, resolution), _sz(8, resolution), SWITCH_BASE)
    rect_at(*profile.button_pos, _sz(8, resolution), _sz(8, resolution), BUTTON_BASE)
    bx, by = tf(*profile.bulb_pos)
    _fill_disc(img, bx, by, _sz(5, resolution), BULB_ON if state.switch_on else BULB_OFF)
    lx, ly = tf(*profile.led_pos)
    _fill_disc(img, lx, ly, _sz(5, resolution), LED_ON if state.button_led_on else LED_OFF)

    s = _sz(BLOCK_SIZE, resolution)
    for oid, obj in state.objects:
        rect_at(obj.x, obj.y, s, s, BLOCK_COLORS[oid])

    gx, gy = tf(state.gripper[0], state.gripper[1])
    half = _sz(5, resolution)
    t = _sz(1, resolution)
    _outline_rect(img, gx - half, gy - half, gx + half + 1, gy + half + 1, t, GRIPPER_COLOR)
    if state.closed:
        d = _sz(2, resolution)
        _fill_rect(img, gx - d // 2, gy - d // 2, gx - d // 2 + d, gy - d // 2 + d, GRIPPER_COLOR)
    return img


def _wrist_window(state: WorldState, resolution: int) -> tuple[int, int, int]:
    """Crop origin (x0, y0) and size of the wrist window in the base render."""
    cw = resolution // 4
    gx, gy = _px(state.gripper[0], resolution), _px(state.gripper[1], resolution)
    x0 = min(max(gx - cw // 2, 0), resolution - cw)
    y0 = min(max(gy - cw // 2, 0), resolution - cw)
    return x0, y0, cw


def render(
    state: WorldState,
    view: str = "static",
    resolution: int = 128,
    profile: EnvProfile | None = None,
) -> np.ndarray:
    """Render one view of the world.

    `profile` overrides the state's own environment profile, which is how
    alternate-environment goal images are produced.  The static view applies
    the profile's camera transform; the wrist view is a 1/4-width crop around
    the gripper upscaled 4x with nearest neighbor.
    """
    if resolution % 4 != 0 or resolution < 32:
        raise ValidationError(f"resolution must be a multiple of 4 and >= 32, got {resolution}")
    profile = profile or get_profile(state.env_id)
    if view == "static":
        return _render_world(state, profile, resolution, camera=True)
    if view == "wrist":
        base = _render_world(state, profile, resolution, camera=False)
        x0, y0, cw = _wrist_window(state, resolution)
        crop = base[y0 : y0 + cw, x0 : x0 + cw]
        return np.ascontiguousarray(crop.repeat(4, axis=0).repeat(4, axis=1))
    raise ValidationError(f"unknown view {view!r}")


def object_bbox(
    state: WorldState,
    object_id: str,
    view: str = "static",
    resolution: int = 128,
    profile: EnvProfile | None = None,
) -> tuple[int, int, int, int]:
    """Tight pixel bbox (x0, y0, x1, y1), half-open, of an object in a view.

    Raises if the object is entirely outside the view (possible in the wrist
    crop, or at the edge under a panned camera).
    """
    profile = profile or get_profile(state.env_id)
    x, y = _object_center(state, object_id, profile)
    w, h = _object_extent(object_id, resolution)
    cx, cy = _px(x, resolution), _px(y, resolution)
    if view == "static":
        cx, cy = _camera_point(cx, cy, profile, resolution)
        x0, y0 = cx - w // 2, cy - h // 2
        x1, y1 = x0 + w, y0 + h
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(x1, resolution), min(y1, resolution)
    elif view == "wrist":
        wx0, wy0, cw = _wrist_window(state, resolution)
        x0, y0 = cx - w // 2, cy - h // 2
        x1, y1 = x0 + w, y0 + h
        x0, y0 = max(x0, wx0), max(y0, wy0)
        x1, y1 = min(x1, wx0 + cw), min(y1, wy0 + cw)
        x0, y0, x1, y1 = ((v - o) * 4 for v, o in ((x0, wx0), (y0, wy0), (x1, wx0), (y1, wy0)))
    else:
        raise ValidationError(f"unknown view {view!r}")
    if x0 >= x1 or y0 >= y1:
        raise ValidationError(f"{object_id} is not visible in the {view} view")
    return int(x0), int(y0), int(x1), int(y1)


def detections(state: WorldState, resolution: int = 128) -> dict[str, list[int]]:
    """Ground-truth static-view bboxes for every nameable object in sight."""
    out = {}
    for name in NAMEABLE_OBJECTS:
        try:
            out[name] = list(object_bbox(state, name, "static", resolution))
        except ValidationError:
            continue
    return out


def object_sprite(object_id: str, resolution: int = 128, background=(232, 232, 228)) -> np.ndarray:
    """A small canonical image of one object on a plain background.

    Used to synthesize the out-of-domain crop pool: callers restyle the
    background and rescale, the object pixels stay recognizable.
    """
    w, h = _object_extent(object_id, resolution)
    pad = max(2, w // 4)
    img = np.empty((h + 2 * pad, w + 2 * pad, 3), dtype=np.uint8)
    img[:] = background
    cx, cy = img.shape[1] // 2, img.shape[0] // 2
    if object_id in BLOCK_COLORS:
        _fill_rect(img, cx - w // 2, cy - h // 2, cx - w // 2 + w, cy - h // 2 + h, BLOCK_COLORS[object_id])
    elif object_id == "drawer":
        _fill_rect(img, cx - w // 2, cy - h // 2, cx - w // 2 + w, cy - h // 2 + h, DRAWER_HANDLE)
    elif object_id == "slider":
        _fill_rect(img, cx - w // 2, cy - h // 2, cx - w // 2 + w, cy - h // 2 + h, SLIDER_HANDLE)
    elif object_id == "lightbulb":
        _fill_disc(img, cx, cy, w // 2, BULB_ON)
    elif object_id == "led":
        _fill_disc(img, cx, cy, w // 2, LED_ON)
    else:
        raise ValidationError(f"no sprite for {object_id!r}")
    return img
