"""Frame decoding, grayscale conversion and padded sub-window extraction.

Images are plain ``float64`` numpy arrays of shape ``(height, width)`` with
values in ``[0, 1]``. Coordinates follow the usual image convention: ``x``
is the column, ``y`` the row, origin at the top-left pixel.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

LUMA = (0.299, 0.587, 0.114)

_NETPBM_WHITESPACE = b" \t\r\n\v\f"


@dataclass(frozen=True)
class Box:
    """Axis-aligned target box: top-left corner ``(x, y)`` and extent ``(w, h)``."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got w={self.w}, h={self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "Box":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def translated(self, dx: float, dy: float) -> "Box":
        return Box(self.x + dx, self.y + dy, self.w, self.h)

    def clamped(self, width: int, height: int) -> "Box":
        """Shift the box (keeping its size) so its center lies inside the frame."""
        cx, cy = self.center
        cx = min(max(cx, 0.0), float(width - 1))
        cy = min(max(cy, 0.0), float(height - 1))
        return Box.from_center(cx, cy, self.w, self.h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


def to_gray(rgb: np.ndarray) -> np.ndarray:
    """Convert an ``(H, W, 3)`` array in ``[0, 1]`` to luma."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb[..., 0] * LUMA[0] + rgb[..., 1] * LUMA[1] + rgb[..., 2] * LUMA[2]


def _read_netpbm_header(buf: bytes) -> tuple[bytes, int, int, int, int]:
    """Parse magic, width, height and maxval; return them with the payload offset."""
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < 4:
        while pos < n and buf[pos] in _NETPBM_WHITESPACE:
            pos += 1
        if pos < n and buf[pos] == ord("#"):
            while pos < n and buf[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and buf[pos] not in _NETPBM_WHITESPACE and buf[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise FormatError("truncated Netpbm header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= n or buf[pos] not in _NETPBM_WHITESPACE:
        raise FormatError("truncated Netpbm header")
    pos += 1
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"malformed Netpbm header: {tokens!r}") from exc
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise FormatError(f"invalid Netpbm dimensions/maxval: {width}x{height}, {maxval}")
    return magic, width, height, maxval, pos


def decode_netpbm(buf: bytes) -> np.ndarray:
    """Decode a binary PGM (P5) or PPM (P6) byte string to a grayscale image."""
    if len(buf) < 2 or buf[:2] not in (b"P5", b"P6"):
        raise FormatError("not a binary PGM/PPM file")
    magic, width, height, maxval, offset = _read_netpbm_header(buf)
    channels = 1 if magic == b"P5" else 3
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    need = count * dtype.itemsize
    if len(buf) - offset < need:
        raise FormatError(f"truncated raster: need {need} bytes, have {len(buf) - offset}")
    raw = np.frombuffer(buf, dtype=dtype, count=count, offset=offset).astype(np.float64)
    raw /= float(maxval)
    if channels == 1:
        return raw.reshape(height, width)
    return to_gray(raw.reshape(height, width, 3))


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load a frame as normalized grayscale.

    Binary PGM/PPM are decoded natively; other raster formats go through Pillow
    when it is installed.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:2] in (b"P5", b"P6"):
        return decode_netpbm(buf)
    try:
        from PIL import Image, UnidentifiedImageError
    except ImportError as exc:  # pragma: no cover - Pillow is optional
        raise FormatError(f"unsupported image format for {path} (install Pillow)") from exc
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
                return np.clip(arr, 0.0, 1.0)
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"cannot decode {path}: {exc}") from exc
    return to_gray(rgb)


def encode_pgm(img: np.ndarray) -> bytes:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM encoding needs a 2-D grayscale image")
    q = np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    header = b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0])
    return header + q.tobytes()


def save_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))


def save_ppm(path: str | os.PathLike, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb, dtype=np.float64)
    q = np.floor(np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (rgb.shape[1], rgb.shape[0]))
        fh.write(q.tobytes())


def window_origin(center: tuple[float, float], size: tuple[int, int]) -> tuple[int, int]:
    """Top-left pixel of a ``size = (w, h)`` window centred at ``center = (x, y)``."""
    cx = math.floor(center[0] + 0.5)
    cy = math.floor(center[1] + 0.5)
    return cx - int(size[0]) // 2, cy - int(size[1]) // 2


def extract_window(img: np.ndarray, center: tuple[float, float], size: tuple[int, int]) -> np.ndarray:
    """Cut a ``(h, w)`` window centred at ``center``, replicating edge pixels.

    ``center`` is ``(x, y)`` and is rounded to the nearest pixel (halves round
    up); ``size`` is ``(w, h)``.
    """
    w, h = int(size[0]), int(size[1])
    if w <= 0 or h <= 0:
        raise ValueError(f"window size must be positive, got {size}")
    x0, y0 = window_origin(center, (w, h))
    rows = np.clip(np.arange(y0, y0 + h), 0, img.shape[0] - 1)
    cols = np.clip(np.arange(x0, x0 + w), 0, img.shape[1] - 1)
    return img[np.ix_(rows, cols)]
