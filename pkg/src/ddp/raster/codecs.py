"""PNG/JPEG byte-stream codecs on top of Pillow.

Decoding always yields 8-bit RGB; any alpha channel is composited over
white.  Encoding is PNG-only so round-trips stay pixel-exact.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import CorruptDataError, UnsupportedFormatError
from .types import Raster

DECODE_FORMATS = ("PNG", "JPEG")
ENCODE_FORMATS = ("PNG",)


def decode_image(data: bytes) -> Raster:
    """Decode PNG or JPEG bytes to an RGB raster (alpha composited over white)."""
    try:
        img = Image.open(io.BytesIO(data))
        fmt = img.format
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(f"not a recognizable image: {exc}") from exc
    if fmt not in DECODE_FORMATS:
        raise UnsupportedFormatError(f"unsupported format {fmt!r}; expected PNG or JPEG")
    try:
        img.load()
    except Exception as exc:
        raise CorruptDataError(f"truncated or corrupt {fmt} stream: {exc}") from exc
    if img.mode in ("RGBA", "LA", "PA") or (img.mode == "P" and "transparency" in img.info):
        rgba = img.convert("RGBA")
        background = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
        img = Image.alpha_composite(background, rgba).convert("RGB")
    else:
        img = img.convert("RGB")
    return Raster(np.asarray(img, dtype=np.uint8))


def encode_image(img: Raster, fmt: str = "PNG") -> bytes:
    """Encode a raster; only lossless PNG is supported."""
    fmt = fmt.upper()
    if fmt not in ENCODE_FORMATS:
        raise UnsupportedFormatError(f"encoding to {fmt!r} unsupported; use PNG")
    pil = Image.fromarray(np.asarray(img.pixels), mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()
