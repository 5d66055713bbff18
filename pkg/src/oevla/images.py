"""Image plumbing: canonical PNG codec, content-addressed store, view concatenation.

All images are numpy uint8 arrays of shape (H, W, 3).  PNG encoding is pinned
to one canonical byte form (RGB8, filter 0 on every row, single IDAT,
zlib level 6) so that pixel-identical images always produce byte-identical
files and can be deduplicated by content hash.
"""

from __future__ import annotations

import hashlib
import os
import struct
import zlib

import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
ZLIB_LEVEL = 6  # canonical; both ends of the wire must agree


class ImageError(ValueError):
    pass


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def encode_png(image: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 array as a canonical PNG byte string."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ImageError(f"expected (H, W, 3) uint8 array, got {image.shape} {image.dtype}")
    h, w = image.shape[:2]
    if h == 0 or w == 0:
        raise ImageError("empty image")
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)  # RGB8, no interlace
    # filter byte 0 before every row
    raw = np.empty((h, 1 + w * 3), dtype=np.uint8)
    raw[:, 0] = 0
    raw[:, 1:] = image.reshape(h, w * 3)
    idat = zlib.compress(raw.tobytes(), ZLIB_LEVEL)
    return PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


def _unfilter(raw: np.ndarray, h: int, w: int, channels: int) -> np.ndarray:
    """Undo PNG row filters (types 0-4). raw is (h, 1 + w*channels)."""
    bpp = channels
    out = np.zeros((h, w * channels), dtype=np.uint8)
    for y in range(h):
        ftype = raw[y, 0]
        line = raw[y, 1:].astype(np.int32)
        prev = out[y - 1].astype(np.int32) if y > 0 else np.zeros(w * channels, np.int32)
        if ftype == 0:
            cur = line
        elif ftype == 2:  # Up
            cur = (line + prev) & 0xFF
        else:
            cur = np.zeros(w * channels, np.int32)
            for x in range(w * channels):
                a = cur[x - bpp] if x >= bpp else 0
                b = prev[x]
                if ftype == 1:  # Sub
                    cur[x] = (line[x] + a) & 0xFF
                elif ftype == 3:  # Average
                    cur[x] = (line[x] + (a + b) // 2) & 0xFF
                elif ftype == 4:  # Paeth
                    c = prev[x - bpp] if x >= bpp else 0
                    p = a + b - c
                    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                    if pa <= pb and pa <= pc:
                        pred = a
                    elif pb <= pc:
                        pred = b
                    else:
                        pred = c
                    cur[x] = (line[x] + pred) & 0xFF
                else:
                    raise ImageError(f"unsupported PNG filter type {ftype}")
        out[y] = cur.astype(np.uint8)
    return out


def decode_png(data: bytes) -> np.ndarray:
    """Decode a PNG byte string to an (H, W, 3) uint8 array.

    Supports 8-bit grayscale, RGB and RGBA, non-interlaced.  Alpha is dropped,
    grayscale is broadcast to three channels.
    """
    if not data.startswith(PNG_SIGNATURE):
        raise ImageError("not a PNG file")
    pos = len(PNG_SIGNATURE)
    ihdr = None
    idat = b""
    while pos + 8 <= len(data):
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if ihdr is None:
        raise ImageError("missing IHDR")
    w, h, depth, ctype, _comp, _filt, interlace = ihdr
    if depth != 8 or interlace != 0:
        raise ImageError(f"unsupported PNG (depth={depth}, interlace={interlace})")
    channels = {0: 1, 2: 3, 6: 4}.get(ctype)
    if channels is None:
        raise ImageError(f"unsupported PNG color type {ctype}")
    raw = np.frombuffer(zlib.decompress(idat), dtype=np.uint8)
    if raw.size != h * (1 + w * channels):
        raise ImageError("corrupt PNG payload")
    flat = _unfilter(raw.reshape(h, 1 + w * channels), h, w, channels)
    img = flat.reshape(h, w, channels)
    if channels == 1:
        img = np.repeat(img, 3, axis=2)
    elif channels == 4:
        img = img[:, :, :3]
    return np.ascontiguousarray(img)


def image_id(png_bytes: bytes) -> str:
    """Content id of an encoded image: sha256 over the canonical PNG bytes."""
    return hashlib.sha256(png_bytes).hexdigest()


def concat_views(static: np.ndarray, wrist: np.ndarray) -> np.ndarray:
    """Concatenate static and wrist views horizontally (static left, wrist right)."""
    static = np.asarray(static)
    wrist = np.asarray(wrist)
    if static.shape[0] != wrist.shape[0]:
        raise ImageError(
            f"view heights differ: static {static.shape[0]} vs wrist {wrist.shape[0]}"
        )
    return np.concatenate([static, wrist], axis=1)


class ImageStore:
    """Content-addressed image collection backed by an optional directory.

    put() encodes once and remembers the canonical bytes; flush() persists
    every in-memory image as <id>.png.  get() falls back to the backing
    directory for ids that were loaded rather than put.
    """

    def __init__(self, directory: str | None = None):
        self.directory = directory
        self._bytes: dict[str, bytes] = {}

    def put(self, image: np.ndarray) -> str:
        data = encode_png(image)
        iid = image_id(data)
        self._bytes.setdefault(iid, data)
        return iid

    def put_bytes(self, data: bytes) -> str:
        decode_png(data)  # validate
        iid = image_id(data)
        self._bytes.setdefault(iid, data)
        return iid

    def get_bytes(self, iid: str) -> bytes:
        if iid in self._bytes:
            return self._bytes[iid]
        if self.directory:
            path = os.path.join(self.directory, iid + ".png")
            if os.path.exists(path):
                with open(path, "rb") as f:
                    data = f.read()
                self._bytes[iid] = data
                return data
        raise KeyError(f"unknown image id {iid}")

    def get(self, iid: str) -> np.ndarray:
        return decode_png(self.get_bytes(iid))

    def __contains__(self, iid: str) -> bool:
        try:
            self.get_bytes(iid)
            return True
        except KeyError:
            return False

    def ids(self) -> list[str]:
        known = set(self._bytes)
        if self.directory and os.path.isdir(self.directory):
            for name in os.listdir(self.directory):
                if name.endswith(".png"):
                    known.add(name[:-4])
        return sorted(known)

    def flush(self, directory: str | None = None) -> None:
        directory = directory or self.directory
        if directory is None:
            raise ValueError("no directory to flush to")
        os.makedirs(directory, exist_ok=True)
        for iid, data in self._bytes.items():
            path = os.path.join(directory, iid + ".png")
            if not os.path.exists(path):
                tmp = path + ".tmp"
                with open(tmp, "wb") as f:
                    f.write(data)
                os.replace(tmp, path)
        self.directory = directory
