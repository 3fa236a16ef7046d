"""Image layer: immutable rasters, degradation operators, and codecs."""

from .backend import ACTIVE_BACKEND, available_backends, get_backend
from .codecs import decode_image, encode_image
from .ops import (
    HEAVY_SIGMA,
    LIGHT_SIGMA,
    apply_blur_mask,
    apply_white_mask,
    crop,
    downsample_max_dim,
    draw_cartesian_auxlines,
    draw_polar_auxlines,
    draw_red_box,
    enhance_contrast,
    gaussian_kernel,
    gaussian_smooth,
)
from .types import BinaryMask, LineSpec, PolarSpec, Raster, Rect

__all__ = [
    "ACTIVE_BACKEND",
    "available_backends",
    "get_backend",
    "decode_image",
    "encode_image",
    "Raster",
    "Rect",
    "BinaryMask",
    "LineSpec",
    "PolarSpec",
    "gaussian_smooth",
    "gaussian_kernel",
    "downsample_max_dim",
    "crop",
    "apply_white_mask",
    "draw_red_box",
    "draw_cartesian_auxlines",
    "draw_polar_auxlines",
    "apply_blur_mask",
    "enhance_contrast",
    "LIGHT_SIGMA",
    "HEAVY_SIGMA",
]
