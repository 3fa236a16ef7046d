"""Pure image operations: smoothing, downsampling, crops, masks, overlays.

Every function takes immutable Raster values and returns a new Raster.
Results are deterministic down to the byte: the float convolution runs the
same IEEE operation sequence on either kernel backend, and the box-average
downsample is exact integer arithmetic throughout.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import OutOfBoundsError
from . import backend
from .types import BinaryMask, LineSpec, PolarSpec, Raster, Rect

# Default sigma of the light smoothing pass; the heavy blur tool must exceed it.
LIGHT_SIGMA = 1.0
HEAVY_SIGMA = 6.0

WHITE = (255, 255, 255)
RED = (255, 0, 0)


def gaussian_kernel(sigma: float) -> tuple[np.ndarray, int]:
    """Normalized 1-D Gaussian taps and radius ceil(3*sigma)."""
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    weights /= weights.sum()
    return weights, radius


def _quantize(acc: np.ndarray) -> np.ndarray:
    """float64 -> uint8 with round-half-away-from-zero (values are >= 0)."""
    return np.clip(np.floor(acc + 0.5), 0.0, 255.0).astype(np.uint8)


def gaussian_smooth(img: Raster, sigma: float) -> Raster:
    """Separable Gaussian blur with clamp-to-edge borders; sigma=0 is identity."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img
    weights, radius = gaussian_kernel(sigma)
    out = np.empty((img.height, img.width, 3), dtype=np.uint8)
    for c in range(3):
        plane = np.ascontiguousarray(img.pixels[:, :, c], dtype=np.float64)
        tmp = backend.convolve_rows(plane, weights, radius)
        tmp = backend.convolve_rows(np.ascontiguousarray(tmp.T), weights, radius)
        out[:, :, c] = _quantize(np.asarray(tmp).T)
    return Raster._own(out)


def _round_div(num: np.ndarray | int, den: int):
    """round(num/den) half away from zero for non-negative integers."""
    return (2 * num + den) // (2 * den)


def downsample_max_dim(img: Raster, max_dim: int) -> Raster:
    """Area-average resize so that max(width, height) <= max_dim.

    Never upscales: inputs already within the bound come back unchanged.
    Output sizes are round(axis * max_dim / max_axis), floored at 1 pixel.
    """
    if max_dim < 1:
        raise ValueError(f"max_dim must be >= 1, got {max_dim}")
    w, h = img.width, img.height
    mx = max(w, h)
    if mx <= max_dim:
        return img
    ow = max(1, _round_div(w * max_dim, mx))
    oh = max(1, _round_div(h * max_dim, mx))
    out = np.empty((oh, ow, 3), dtype=np.uint8)
    den = w * h  # both axis passes carry a factor of the source extent
    for c in range(3):
        plane = np.ascontiguousarray(img.pixels[:, :, c], dtype=np.int64)
        tmp = backend.area_reduce_rows(plane, ow)            # (h, ow), scaled by w
        tmp = np.ascontiguousarray(np.asarray(tmp).T)
        num = np.asarray(backend.area_reduce_rows(tmp, oh)).T  # (oh, ow), scaled by w*h
        out[:, :, c] = _round_div(num, den).astype(np.uint8)
    return Raster._own(out)


def crop(img: Raster, region: Rect) -> Raster:
    """Exact pixel copy of `region`; out-of-bounds regions are an error."""
    region.validate_within(img)
    view = img.pixels[region.y:region.y + region.h, region.x:region.x + region.w]
    return Raster._own(np.ascontiguousarray(view))


def apply_white_mask(img: Raster, mask: BinaryMask) -> Raster:
    """Keep pixels where the mask is 1, replace the rest with pure white."""
    mask.validate_against(img)
    out = np.where(mask.bits[:, :, None], img.pixels, np.uint8(255))
    return Raster._own(np.ascontiguousarray(out))


def draw_red_box(img: Raster, region: Rect, thickness: int = 2) -> Raster:
    """Paint a red border band of the given thickness just inside `region`."""
    if thickness < 1:
        raise ValueError("thickness must be >= 1")
    region.validate_within(img)
    out = img.pixels.copy()
    x0, y0 = region.x, region.y
    x1, y1 = region.x + region.w, region.y + region.h
    t = thickness
    color = np.asarray(RED, dtype=np.uint8)
    out[y0:min(y0 + t, y1), x0:x1] = color
    out[max(y1 - t, y0):y1, x0:x1] = color
    out[y0:y1, x0:min(x0 + t, x1)] = color
    out[y0:y1, max(x1 - t, x0):x1] = color
    return Raster._own(out)


def draw_cartesian_auxlines(img: Raster, lines: list[LineSpec]) -> Raster:
    """Overlay full-width/full-height reference lines; later lines overdraw."""
    for line in lines:
        line.validate_within(img)
    if not lines:
        return img
    out = img.pixels.copy()
    for line in lines:
        color = np.asarray(line.color, dtype=np.uint8)
        p0 = line.position
        p1 = min(p0 + line.thickness, img.height if line.orientation == "horizontal" else img.width)
        if line.orientation == "horizontal":
            out[p0:p1, :] = color
        else:
            out[:, p0:p1] = color
    return Raster._own(out)


def _stamp(out: np.ndarray, px: float, py: float, thickness: int, color: np.ndarray) -> None:
    """Color the pixels whose centers lie within the stamp radius of (px, py).

    The 0.71 floor (just over sqrt(0.5)) guarantees that with samples every
    0.25 px along a curve, every pixel whose center is within half a pixel
    of the ideal curve gets painted, while staying inside the
    thickness/2 + 0.5 tolerance band.
    """
    h, w = out.shape[:2]
    rad = max(thickness / 2.0, 0.71)
    x_lo, x_hi = math.floor(px - rad), math.ceil(px + rad)
    y_lo, y_hi = math.floor(py - rad), math.ceil(py + rad)
    for y in range(max(y_lo, 0), min(y_hi + 1, h)):
        for x in range(max(x_lo, 0), min(x_hi + 1, w)):
            if (x - px) ** 2 + (y - py) ** 2 <= rad * rad:
                out[y, x] = color


def draw_polar_auxlines(img: Raster, spec: PolarSpec) -> Raster:
    """Overlay concentric circles and radial spokes around spec.center.

    Curves are rasterized by dense parametric sampling (step <= 0.25 px), so
    every painted pixel lies within thickness/2 + 0.5 px of the ideal curve
    and every pixel the ideal curve passes near is painted.
    """
    spec.validate_within(img)
    out = img.pixels.copy()
    color = np.asarray(spec.color, dtype=np.uint8)
    cx, cy = spec.center
    for radius in spec.radii:
        steps = max(8, math.ceil(2.0 * math.pi * radius / 0.25))
        for i in range(steps):
            a = 2.0 * math.pi * i / steps
            _stamp(out, cx + radius * math.cos(a), cy + radius * math.sin(a),
                   spec.thickness, color)
    for angle in spec.angles:
        a = math.radians(angle)
        dx, dy = math.cos(a), math.sin(a)
        steps = max(1, math.ceil(spec.spoke_length / 0.25))
        for i in range(steps + 1):
            u = spec.spoke_length * i / steps
            _stamp(out, cx + u * dx, cy + u * dy, spec.thickness, color)
    return Raster._own(out)


def apply_blur_mask(img: Raster, keep: Rect | None, sigma: float) -> Raster:
    """Blur the whole image, then restore the `keep` region sharp.

    keep=None blurs everything.  sigma must exceed the light-smoothing
    default so the blurred surround is clearly degraded.
    """
    if sigma <= LIGHT_SIGMA:
        raise ValueError(f"blur sigma must be > {LIGHT_SIGMA}, got {sigma}")
    if keep is not None:
        keep.validate_within(img)
    blurred = gaussian_smooth(img, sigma)
    if keep is None:
        return blurred
    out = blurred.pixels.copy()
    out[keep.y:keep.y + keep.h, keep.x:keep.x + keep.w] = \
        img.pixels[keep.y:keep.y + keep.h, keep.x:keep.x + keep.w]
    return Raster._own(out)


def enhance_contrast(img: Raster, p_low: float = 2.0, p_high: float = 98.0) -> Raster:
    """Percentile stretch per channel; degenerate (flat) channels pass through."""
    if not 0 <= p_low < p_high <= 100:
        raise ValueError(f"need 0 <= p_low < p_high <= 100, got ({p_low}, {p_high})")
    out = np.empty((img.height, img.width, 3), dtype=np.uint8)
    for c in range(3):
        ch = img.pixels[:, :, c]
        lo, hi = np.percentile(ch, [p_low, p_high])
        if hi <= lo:
            out[:, :, c] = ch
            continue
        levels = np.arange(256, dtype=np.float64)
        scaled = np.clip((levels - lo) / (hi - lo), 0.0, 1.0)
        lut = _quantize(255.0 * scaled)
        out[:, :, c] = lut[ch]
    return Raster._own(out)
