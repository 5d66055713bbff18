"""Minimal PNG codec matching the evaluator's canonical byte form.

The protocol pins one encoding (see PROTOCOL.md at the repo root): RGB8,
filter byte 0 on every row, a single IDAT compressed at zlib level 6, no
ancillary chunks.  Encoding the same pixels therefore always yields the
same bytes, and sha256 of the file serves as a content id on both ends
of the wire.

Decoding is more permissive so locally produced test images work too:
any non-interlaced 8-bit grayscale, RGB, or RGBA PNG with row filters
0 through 4.  Output is always (H, W, 3) uint8; gray replicates,
alpha is dropped.
"""

from __future__ import annotations

import struct
import zlib
from binascii import crc32

import numpy as np

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6


class PngError(ValueError):
    pass


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", crc32(tag + payload) & 0xFFFFFFFF)
    )


def encode_png(pixels: np.ndarray) -> bytes:
    """(H, W, 3) uint8 -> canonical PNG bytes."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise PngError(f"expected (H, W, 3) uint8, got {arr.shape} {arr.dtype}")
    h, w = arr.shape[:2]
    raw = b"".join(b"\x00" + arr[y].tobytes() for y in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return (
        _SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(raw, _ZLIB_LEVEL))
        + _chunk(b"IEND", b"")
    )


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, h: int, w: int, bpp: int) -> bytearray:
    stride = w * bpp
    out = bytearray()
    prev = bytearray(stride)
    pos = 0
    for _y in range(h):
        ftype = raw[pos]
        row = bytearray(raw[pos + 1 : pos + 1 + stride])
        pos += 1 + stride
        if ftype == 1:  # sub
            for i in range(bpp, stride):
                row[i] = (row[i] + row[i - bpp]) & 0xFF
        elif ftype == 2:  # up
            for i in range(stride):
                row[i] = (row[i] + prev[i]) & 0xFF
        elif ftype == 3:  # average
            for i in range(stride):
                left = row[i - bpp] if i >= bpp else 0
                row[i] = (row[i] + (left + prev[i]) // 2) & 0xFF
        elif ftype == 4:  # paeth
            for i in range(stride):
                left = row[i - bpp] if i >= bpp else 0
                upleft = prev[i - bpp] if i >= bpp else 0
                row[i] = (row[i] + _paeth(left, prev[i], upleft)) & 0xFF
        elif ftype != 0:
            raise PngError(f"unsupported row filter {ftype}")
        out.extend(row)
        prev = row
    return out


def decode_png(data: bytes) -> np.ndarray:
    """PNG bytes -> (H, W, 3) uint8 pixel array."""
    if data[:8] != _SIGNATURE:
        raise PngError("not a PNG")
    pos = 8
    idat = b""
    header = None
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            header = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if header is None:
        raise PngError("missing IHDR")
    w, h, depth, color, _comp, _filt, interlace = header
    if depth != 8 or interlace != 0:
        raise PngError(f"unsupported bit depth {depth} or interlace {interlace}")
    channels = {0: 1, 2: 3, 6: 4}.get(color)
    if channels is None:
        raise PngError(f"unsupported color type {color}")
    raw = zlib.decompress(idat)
    if len(raw) != h * (1 + w * channels):
        raise PngError("pixel data has the wrong length")
    flat = _unfilter(raw, h, w, channels)
    arr = np.frombuffer(bytes(flat), dtype=np.uint8).reshape(h, w, channels)
    if channels == 1:
        arr = np.repeat(arr, 3, axis=2)
    elif channels == 4:
        arr = arr[:, :, :3]
    return arr
