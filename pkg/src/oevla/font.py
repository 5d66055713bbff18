"""5x7 bitmap font text rendering for optical instruction images.

Glyphs are hand-set on a 5x7 grid, LED-matrix style; lowercase input renders
with the uppercase shapes.  The "hard" styles add per-glyph vertical jitter,
integer row shear and background noise, all driven by an rng so the output is
deterministic given (text, style, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import ValidationError

_RAW_GLYPHS = {
    "A": ".###. #...# #...# ##### #...# #...# #...#",
    "B": "####. #...# #...# ####. #...# #...# ####.",
    "C": ".###. #...# #.... #.... #.... #...# .###.",
    "D": "####. #...# #...# #...# #...# #...# ####.",
    "E": "##### #.... #.... ####. #.... #.... #####",
    "F": "##### #.... #.... ####. #.... #.... #....",
    "G": ".###. #...# #.... #.### #...# #...# .###.",
    "H": "#...# #...# #...# ##### #...# #...# #...#",
    "I": ".###. ..#.. ..#.. ..#.. ..#.. ..#.. .###.",
    "J": "..### ...#. ...#. ...#. ...#. #..#. .##..",
    "K": "#...# #..#. #.#.. ##... #.#.. #..#. #...#",
    "L": "#.... #.... #.... #.... #.... #.... #####",
    "M": "#...# ##.## #.#.# #.#.# #...# #...# #...#",
    "N": "#...# ##..# #.#.# #..## #...# #...# #...#",
    "O": ".###. #...# #...# #...# #...# #...# .###.",
    "P": "####. #...# #...# ####. #.... #.... #....",
    "Q": ".###. #...# #...# #...# #.#.# #..#. .##.#",
    "R": "####. #...# #...# ####. #.#.. #..#. #...#",
    "S": ".#### #.... #.... .###. ....# ....# ####.",
    "T": "##### ..#.. ..#.. ..#.. ..#.. ..#.. ..#..",
    "U": "#...# #...# #...# #...# #...# #...# .###.",
    "V": "#...# #...# #...# #...# #...# .#.#. ..#..",
    "W": "#...# #...# #...# #.#.# #.#.# ##.## #...#",
    "X": "#...# #...# .#.#. ..#.. .#.#. #...# #...#",
    "Y": "#...# #...# .#.#. ..#.. ..#.. ..#.. ..#..",
    "Z": "##### ....# ...#. ..#.. .#... #.... #####",
    "0": ".###. #...# #..## #.#.# ##..# #...# .###.",
    "1": "..#.. .##.. ..#.. ..#.. ..#.. ..#.. .###.",
    "2": ".###. #...# ....# ...#. ..#.. .#... #####",
    "3": ".###. #...# ....# ..##. ....# #...# .###.",
    "4": "...#. ..##. .#.#. #..#. ##### ...#. ...#.",
    "5": "##### #.... ####. ....# ....# #...# .###.",
    "6": "..##. .#... #.... ####. #...# #...# .###.",
    "7": "##### ....# ...#. ..#.. .#... .#... .#...",
    "8": ".###. #...# #...# .###. #...# #...# .###.",
    "9": ".###. #...# #...# .#### ....# ...#. .##..",
    " ": "..... ..... ..... ..... ..... ..... .....",
    ".": "..... ..... ..... ..... ..... .##.. .##..",
    ",": "..... ..... ..... ..... ..#.. ..#.. .#...",
    "!": "..#.. ..#.. ..#.. ..#.. ..#.. ..... ..#..",
    "?": ".###. #...# ....# ..##. ..#.. ..... ..#..",
    "'": "..#.. ..#.. ..... ..... ..... ..... .....",
    '"': ".#.#. .#.#. ..... ..... ..... ..... .....",
    "-": "..... ..... ..... .###. ..... ..... .....",
    "_": "..... ..... ..... ..... ..... ..... #####",
    ":": "..... ..#.. ..... ..... ..#.. ..... .....",
    ";": "..... ..#.. ..... ..... ..#.. .#... .....",
    "<": "...#. ..#.. .#... #.... .#... ..#.. ...#.",
    ">": ".#... ..#.. ...#. ....# ...#. ..#.. .#...",
    "/": "....# ...#. ...#. ..#.. .#... .#... #....",
}

GLYPH_W, GLYPH_H, GLYPH_PITCH = 5, 7, 6

GLYPHS: dict[str, np.ndarray] = {
    ch: np.array([[c == "#" for c in row] for row in spec.split()], dtype=bool)
    for ch, spec in _RAW_GLYPHS.items()
}


def glyph_bits(text: str) -> int:
    """Total number of on-bits needed to render `text` (the pixel-count oracle)."""
    return int(sum(GLYPHS[_lookup(c)].sum() for c in text))


def _lookup(char: str) -> str:
    key = char.upper()
    if key not in GLYPHS:
        raise ValidationError(f"unsupported character {char!r}")
    return key


@dataclass(frozen=True)
class TextStyle:
    """How to render instruction text onto a canvas.

    Attributes:
        scale: integer glyph magnification.
        fg, bg: foreground/background RGB.
        offset: top-left corner of the text run.
        background: "plain" or "textured" (per-pixel noise added to bg).
        jitter: max per-glyph vertical offset in pixels (hand-written feel).
        slant: max per-glyph integer row shear in pixels.
        canvas: (width, height) of the output image.
    """

    scale: int = 2
    fg: tuple[int, int, int] = (16, 16, 16)
    bg: tuple[int, int, int] = (245, 245, 245)
    offset: tuple[int, int] = (8, 16)
    background: str = "plain"
    jitter: int = 0
    slant: int = 0
    canvas: tuple[int, int] = (448, 64)


PLAIN_STYLE = TextStyle()
HARD_STYLE = TextStyle(
    fg=(34, 26, 60),
    bg=(208, 196, 170),
    offset=(10, 18),
    background="textured",
    jitter=3,
    slant=2,
)


def render_text_image(text: str, style: TextStyle = PLAIN_STYLE, rng=None) -> np.ndarray:
    """Render `text` in the bitmap font; raises if it cannot fit the canvas."""
    if not text:
        raise ValidationError("cannot render empty text")
    rng = rng if rng is not None else np.random.default_rng(0)
    w, h = style.canvas
    ox, oy = style.offset
    s = style.scale
    if s < 1:
        raise ValidationError("scale must be >= 1")
    needed_w = ox + len(text) * GLYPH_PITCH * s + style.slant
    needed_h = oy + GLYPH_H * s + style.jitter
    if needed_w > w or needed_h > h or oy - style.jitter < 0 or ox - style.slant < 0:
        raise ValidationError(
            f"text of {len(text)} chars at scale {s} does not fit canvas {style.canvas}"
        )

    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = style.bg
    if style.background == "textured":
        noise = rng.integers(-18, 19, size=(h, w, 1))
        img = np.clip(img.astype(np.int16) + noise, 0, 255).astype(np.uint8)
    elif style.background != "plain":
        raise ValidationError(f"unknown background {style.background!r}")

    for i, char in enumerate(text):
        bits = GLYPHS[_lookup(char)]
        dy = int(rng.integers(-style.jitter, style.jitter + 1)) if style.jitter else 0
        shear = int(rng.integers(-style.slant, style.slant + 1)) if style.slant else 0
        gx = ox + i * GLYPH_PITCH * s
        gy = oy + dy
        for r in range(GLYPH_H):
            dx = (shear * (r - GLYPH_H // 2)) // GLYPH_H
            for c in range(GLYPH_W):
                if bits[r, c]:
                    x0 = gx + c * s + dx
                    y0 = gy + r * s
                    img[y0 : y0 + s, x0 : x0 + s] = style.fg
    return img
