#!/usr/bin/env python3
"""Regenerate the golden PNG corpus under tests/golden/.

Run after an intentional change to any raster operation, then review the
image diffs before committing.  Inputs are generated deterministically so
the corpus never depends on external files.
"""

from __future__ import annotations

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "tests"))

from conftest import checkerboard_raster, gradient_raster, occluded_dog_scene

from ddp.raster import (
    BinaryMask,
    LineSpec,
    PolarSpec,
    Rect,
    apply_blur_mask,
    apply_white_mask,
    crop,
    downsample_max_dim,
    draw_cartesian_auxlines,
    draw_polar_auxlines,
    draw_red_box,
    enhance_contrast,
    encode_image,
    gaussian_smooth,
)

GOLDEN_DIR = pathlib.Path(__file__).resolve().parents[1] / "tests" / "golden"


def cases() -> dict:
    grad = gradient_raster(64, 48)
    checker = checkerboard_raster(32, 32, cell=2)
    scene = occluded_dog_scene()
    return {
        "input_gradient_64x48.png": grad,
        "input_checker_32x32.png": checker,
        "input_scene_500x400.png": scene,
        "gradient_smooth_s1.png": gaussian_smooth(grad, 1.0),
        "gradient_smooth_s2.png": gaussian_smooth(grad, 2.0),
        "gradient_down_17.png": downsample_max_dim(grad, 17),
        "scene_down_150.png": downsample_max_dim(scene, 150),
        "scene_down_80.png": downsample_max_dim(scene, 80),
        "gradient_crop.png": crop(grad, Rect(10, 8, 24, 20)),
        "gradient_white_mask.png": apply_white_mask(
            grad, BinaryMask.from_rect(64, 48, Rect(16, 12, 32, 24))),
        "gradient_red_box.png": draw_red_box(grad, Rect(5, 5, 30, 20), 2),
        "gradient_cartesian.png": draw_cartesian_auxlines(
            grad, [LineSpec("horizontal", 24), LineSpec("vertical", 32)]),
        "gradient_polar.png": draw_polar_auxlines(
            grad, PolarSpec(center=(32, 24), radii=(10.0,),
                            angles=(0.0, 90.0, 225.0), spoke_length=15)),
        "checker_blur_s4.png": apply_blur_mask(checker, None, 4.0),
        "checker_blur_keep.png": apply_blur_mask(checker, Rect(8, 8, 16, 16), 4.0),
        "gradient_contrast.png": enhance_contrast(grad, 10.0, 90.0),
    }


def main() -> None:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    for name, raster in cases().items():
        (GOLDEN_DIR / name).write_bytes(encode_image(raster))
        print(f"wrote {name} ({raster.width}x{raster.height})")


if __name__ == "__main__":
    main()
