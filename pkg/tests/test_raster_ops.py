"""Raster operation contracts, checked against independent oracles."""

import numpy as np
import pytest

from ddp.errors import DimensionMismatchError, OutOfBoundsError
from ddp.raster import (
    BinaryMask,
    LineSpec,
    PolarSpec,
    Raster,
    Rect,
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

from conftest import checkerboard_raster, gradient_raster, random_raster
from oracles import (
    area_average_oracle,
    channel_variance_int,
    crop_oracle,
    downsample_dims_oracle,
    gaussian_oracle,
    percentile_oracle,
    white_mask_oracle,
)


class TestGaussianSmooth:
    def test_constant_image_is_identity(self):
        img = Raster.full(17, 9, (123, 45, 67))
        assert gaussian_smooth(img, 1.5) == img

    def test_sigma_zero_is_identity(self, rng):
        img = random_raster(rng, 12, 8)
        assert gaussian_smooth(img, 0.0) == img

    def test_kernel_weights_sum_to_one(self):
        for sigma in (0.3, 0.5, 1.0, 2.0, 6.0):
            weights, radius = gaussian_kernel(sigma)
            assert radius == int(np.ceil(3 * sigma))
            assert abs(weights.sum() - 1.0) < 1e-9

    def test_center_impulse_matches_peak_weight(self):
        arr = np.zeros((21, 21, 3), dtype=np.uint8)
        arr[10, 10] = 255
        out = gaussian_smooth(Raster(arr), 1.0)
        weights, radius = gaussian_kernel(1.0)
        expected = int(np.floor(255.0 * weights[radius] ** 2 + 0.5))
        assert out.pixels[10, 10, 0] == expected

    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
    def test_matches_dense_convolution_oracle(self, rng, sigma):
        img = random_raster(rng, 14, 11)
        got = gaussian_smooth(img, sigma).pixels.astype(int)
        want = gaussian_oracle(np.asarray(img.pixels), sigma).astype(int)
        assert np.abs(got - want).max() <= 1

    def test_preserves_dimensions(self, rng):
        img = random_raster(rng, 33, 21)
        out = gaussian_smooth(img, 2.5)
        assert (out.width, out.height) == (33, 21)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            gaussian_smooth(Raster.full(4, 4), -1.0)

    def test_deterministic_across_calls(self, rng):
        img = random_raster(rng, 25, 19)
        assert gaussian_smooth(img, 1.7) == gaussian_smooth(img, 1.7)


class TestDownsample:
    def test_headline_500x400_to_80x64(self, rng):
        img = random_raster(rng, 500, 400)
        out = downsample_max_dim(img, 80)
        assert (out.width, out.height) == (80, 64)

    def test_1920x1080_to_150x84(self):
        img = gradient_raster(1920, 1080)
        out = downsample_max_dim(img, 150)
        assert (out.width, out.height) == (150, 84)
        assert (out.width, out.height) == downsample_dims_oracle(1920, 1080, 150)

    def test_no_upscale(self, rng):
        img = random_raster(rng, 64, 64)
        assert downsample_max_dim(img, 80) == img

    def test_respects_max_dim_for_random_sizes(self, rng):
        for _ in range(50):
            w = int(rng.integers(1, 300))
            h = int(rng.integers(1, 300))
            max_dim = int(rng.integers(1, 200))
            out = downsample_max_dim(random_raster(rng, w, h), max_dim)
            assert max(out.width, out.height) <= max(max_dim, min(w, h, max_dim))
            assert max(out.width, out.height) <= max_dim or max(w, h) <= max_dim
            assert (out.width, out.height) == downsample_dims_oracle(w, h, max_dim)

    def test_matches_exact_area_average_oracle(self):
        img = gradient_raster(31, 23)
        out = downsample_max_dim(img, 9)
        want = area_average_oracle(np.asarray(img.pixels), out.width, out.height)
        assert np.array_equal(np.asarray(out.pixels), want)

    def test_matches_oracle_on_random_image(self, rng):
        img = random_raster(rng, 40, 25)
        out = downsample_max_dim(img, 13)
        want = area_average_oracle(np.asarray(img.pixels), out.width, out.height)
        assert np.array_equal(np.asarray(out.pixels), want)

    def test_constant_image_stays_constant(self):
        out = downsample_max_dim(Raster.full(333, 217, (7, 200, 99)), 50)
        assert np.array_equal(
            np.asarray(out.pixels),
            np.broadcast_to((7, 200, 99), (out.height, out.width, 3)),
        )


class TestCrop:
    def test_full_frame_is_identity(self, rng):
        img = random_raster(rng, 100, 100)
        assert crop(img, Rect(0, 0, 100, 100)) == img

    def test_pixel_copy_oracle(self, rng):
        img = random_raster(rng, 80, 64)
        out = crop(img, Rect(10, 10, 20, 20))
        assert (out.width, out.height) == (20, 20)
        want = crop_oracle(np.asarray(img.pixels), 10, 10, 20, 20)
        assert np.array_equal(np.asarray(out.pixels), want)
        assert tuple(out.pixels[0, 0]) == tuple(img.pixels[10, 10])

    def test_out_of_bounds_rejected(self, rng):
        img = random_raster(rng, 80, 64)
        with pytest.raises(OutOfBoundsError):
            crop(img, Rect(70, 0, 20, 20))
        with pytest.raises(OutOfBoundsError):
            crop(img, Rect(-1, 0, 5, 5))

    def test_composition(self, rng):
        img = random_raster(rng, 60, 50)
        inner = crop(crop(img, Rect(5, 7, 40, 30)), Rect(3, 2, 10, 12))
        assert inner == crop(img, Rect(8, 9, 10, 12))


class TestWhiteMask:
    def test_all_ones_is_identity(self, rng):
        img = random_raster(rng, 13, 9)
        assert apply_white_mask(img, BinaryMask.ones(13, 9)) == img

    def test_all_zeros_is_white(self, rng):
        img = random_raster(rng, 13, 9)
        out = apply_white_mask(img, BinaryMask.zeros(13, 9))
        assert (np.asarray(out.pixels) == 255).all()

    def test_left_half_oracle(self):
        img = gradient_raster(10, 10)
        mask = BinaryMask.from_rect(10, 10, Rect(0, 0, 5, 10))
        out = apply_white_mask(img, mask)
        want = white_mask_oracle(np.asarray(img.pixels), np.asarray(mask.bits))
        assert np.array_equal(np.asarray(out.pixels), want)
        assert np.array_equal(out.pixels[:, :5], img.pixels[:, :5])
        assert (out.pixels[:, 5:] == 255).all()

    def test_random_pairs_match_oracle(self, rng):
        for _ in range(10):
            w = int(rng.integers(1, 24))
            h = int(rng.integers(1, 24))
            img = random_raster(rng, w, h)
            bits = rng.integers(0, 2, (h, w)).astype(bool)
            out = apply_white_mask(img, BinaryMask(bits))
            assert np.array_equal(
                np.asarray(out.pixels),
                white_mask_oracle(np.asarray(img.pixels), bits),
            )

    def test_dimension_mismatch_rejected(self, rng):
        with pytest.raises(DimensionMismatchError):
            apply_white_mask(random_raster(rng, 8, 8), BinaryMask.ones(9, 8))


class TestRedBox:
    def test_full_frame_perimeter_count(self):
        img = Raster.full(10, 10, (0, 0, 0))
        out = draw_red_box(img, Rect(0, 0, 10, 10), 1)
        changed = (np.asarray(out.pixels) != 0).any(axis=2)
        assert changed.sum() == 2 * 10 + 2 * 10 - 4
        assert all(tuple(px) == (255, 0, 0)
                   for px in np.asarray(out.pixels)[changed])

    def test_inner_rect_count(self):
        img = Raster.full(10, 10, (0, 0, 0))
        out = draw_red_box(img, Rect(2, 2, 4, 4), 1)
        changed = (np.asarray(out.pixels) != 0).any(axis=2)
        assert changed.sum() == 2 * 4 + 2 * 4 - 4
        assert not changed[0:2].any() and not changed[:, 0:2].any()
        assert not changed[3:5, 3:5].any()  # interior untouched

    def test_thick_border_fills_region(self):
        img = Raster.full(12, 12, (9, 9, 9))
        out = draw_red_box(img, Rect(2, 2, 6, 6), 3)
        region = np.asarray(out.pixels)[2:8, 2:8]
        assert (region == (255, 0, 0)).all()

    def test_exterior_untouched(self, rng):
        img = random_raster(rng, 20, 20)
        out = draw_red_box(img, Rect(5, 5, 8, 8), 2)
        outside = np.ones((20, 20), dtype=bool)
        outside[5:13, 5:13] = False
        assert np.array_equal(np.asarray(out.pixels)[outside],
                              np.asarray(img.pixels)[outside])


class TestCartesianAuxlines:
    def test_single_horizontal_line_pixel_count(self):
        img = Raster.full(80, 64, (0, 0, 0))
        out = draw_cartesian_auxlines(img, [LineSpec("horizontal", 10, thickness=1)])
        diff = (np.asarray(out.pixels) != np.asarray(img.pixels)).any(axis=2)
        assert diff.sum() == 80
        assert diff[10].all() and not diff[:10].any() and not diff[11:].any()

    def test_empty_list_is_identity(self, rng):
        img = random_raster(rng, 9, 9)
        assert draw_cartesian_auxlines(img, []) == img

    def test_vertical_line_thickness_two(self):
        img = Raster.full(30, 20, (0, 0, 0))
        out = draw_cartesian_auxlines(img, [LineSpec("vertical", 0, thickness=2)])
        arr = np.asarray(out.pixels)
        assert (arr[:, 0] == (0, 255, 0)).all() and (arr[:, 1] == (0, 255, 0)).all()
        assert (arr[:, 2:] == 0).all()

    def test_later_lines_overdraw(self):
        img = Raster.full(10, 10, (0, 0, 0))
        out = draw_cartesian_auxlines(img, [
            LineSpec("horizontal", 4, thickness=1, color=(10, 10, 10)),
            LineSpec("vertical", 4, thickness=1, color=(200, 0, 0)),
        ])
        assert tuple(out.pixels[4, 4]) == (200, 0, 0)

    def test_position_out_of_bounds(self):
        img = Raster.full(10, 10)
        with pytest.raises(OutOfBoundsError):
            draw_cartesian_auxlines(img, [LineSpec("horizontal", 10)])


class TestPolarAuxlines:
    def test_horizontal_spoke(self):
        img = Raster.full(80, 64, (0, 0, 0))
        spec = PolarSpec(center=(40, 32), angles=(0.0,), spoke_length=10, thickness=1)
        out = draw_polar_auxlines(img, spec)
        changed = {(x, y) for y, x in zip(*np.nonzero(
            (np.asarray(out.pixels) != 0).any(axis=2)))}
        assert changed == {(x, 32) for x in range(40, 51)}

    def test_vertical_spoke(self):
        img = Raster.full(80, 64, (0, 0, 0))
        spec = PolarSpec(center=(40, 32), angles=(90.0,), spoke_length=10, thickness=1)
        out = draw_polar_auxlines(img, spec)
        changed = {(x, y) for y, x in zip(*np.nonzero(
            (np.asarray(out.pixels) != 0).any(axis=2)))}
        assert changed == {(40, y) for y in range(32, 43)}

    def test_zero_length_spoke_is_center_pixel(self):
        img = Raster.full(21, 21, (0, 0, 0))
        spec = PolarSpec(center=(10, 10), angles=(45.0,), spoke_length=0, thickness=1)
        out = draw_polar_auxlines(img, spec)
        changed = (np.asarray(out.pixels) != 0).any(axis=2)
        assert changed.sum() == 1 and changed[10, 10]

    def test_circle_pixels_near_ideal_radius(self):
        img = Raster.full(64, 64, (0, 0, 0))
        spec = PolarSpec(center=(32, 32), radii=(12.0,), thickness=1)
        out = draw_polar_auxlines(img, spec)
        ys, xs = np.nonzero((np.asarray(out.pixels) != 0).any(axis=2))
        assert len(xs) > 0
        dist = np.hypot(xs - 32.0, ys - 32.0)
        # tolerance band: thickness/2 + 0.5
        assert (np.abs(dist - 12.0) <= 1.0).all()
        # coverage: every pixel whose center is within half a pixel of the
        # ideal circle is painted
        painted = set(zip(xs.tolist(), ys.tolist()))
        for py in range(64):
            for px in range(64):
                if abs(np.hypot(px - 32.0, py - 32.0) - 12.0) <= 0.5:
                    assert (px, py) in painted

    def test_center_out_of_bounds(self):
        img = Raster.full(10, 10)
        with pytest.raises(OutOfBoundsError):
            draw_polar_auxlines(img, PolarSpec(center=(10, 3), radii=(2.0,)))

    def test_empty_spec_rejected(self):
        with pytest.raises(ValueError):
            PolarSpec(center=(5, 5))


class TestBlurMask:
    def test_keep_full_frame_is_identity(self, rng):
        img = random_raster(rng, 16, 12)
        out = apply_blur_mask(img, Rect(0, 0, 16, 12), 4.0)
        assert out == img

    def test_keep_none_on_constant_is_identity(self):
        img = Raster.full(15, 11, (77, 88, 99))
        assert apply_blur_mask(img, None, 4.0) == img

    def test_checkerboard_variance_drops(self):
        img = checkerboard_raster(24, 24, cell=2)
        out = apply_blur_mask(img, None, 4.0)
        for c in range(3):
            before = channel_variance_int(np.asarray(img.pixels)[:, :, c])
            after = channel_variance_int(np.asarray(out.pixels)[:, :, c])
            assert after < before

    def test_variance_non_increasing_in_sigma(self, rng):
        img = random_raster(rng, 20, 20)
        variances = []
        for sigma in (1.5, 2.0, 4.0, 8.0):
            out = apply_blur_mask(img, None, sigma)
            variances.append(channel_variance_int(np.asarray(out.pixels)[:, :, 0]))
        assert all(a >= b for a, b in zip(variances, variances[1:]))

    def test_keep_region_stays_sharp(self, rng):
        img = random_raster(rng, 30, 30)
        keep = Rect(8, 8, 10, 10)
        out = apply_blur_mask(img, keep, 5.0)
        assert np.array_equal(np.asarray(out.pixels)[8:18, 8:18],
                              np.asarray(img.pixels)[8:18, 8:18])
        full_blur = apply_blur_mask(img, None, 5.0)
        outside = np.ones((30, 30), dtype=bool)
        outside[8:18, 8:18] = False
        assert np.array_equal(np.asarray(out.pixels)[outside],
                              np.asarray(full_blur.pixels)[outside])

    def test_sigma_must_exceed_light_default(self, rng):
        with pytest.raises(ValueError):
            apply_blur_mask(random_raster(rng, 8, 8), None, 1.0)


class TestEnhanceContrast:
    def test_constant_image_unchanged(self):
        img = Raster.full(9, 9, (42, 42, 42))
        assert enhance_contrast(img) == img

    def test_two_level_image_stretches_to_extremes(self):
        plane = np.full((10, 10), 100, dtype=np.uint8)
        plane[5:] = 150
        img = Raster(np.stack([plane] * 3, axis=-1))
        lo = percentile_oracle(plane.reshape(-1), 2.0)
        hi = percentile_oracle(plane.reshape(-1), 98.0)
        assert (lo, hi) == (100.0, 150.0)
        out = enhance_contrast(img, 2.0, 98.0)
        assert set(np.asarray(out.pixels).reshape(-1).tolist()) == {0, 255}
        assert (np.asarray(out.pixels)[:5] == 0).all()
        assert (np.asarray(out.pixels)[5:] == 255).all()

    def test_monotonicity(self, rng):
        img = random_raster(rng, 16, 16)
        out = enhance_contrast(img, 5.0, 95.0)
        for c in range(3):
            src = np.asarray(img.pixels)[:, :, c].reshape(-1)
            dst = np.asarray(out.pixels)[:, :, c].reshape(-1)
            order = np.argsort(src, kind="stable")
            assert (np.diff(dst[order].astype(int)) >= 0).all()

    def test_bad_percentiles_rejected(self, rng):
        img = random_raster(rng, 4, 4)
        with pytest.raises(ValueError):
            enhance_contrast(img, 50.0, 50.0)
        with pytest.raises(ValueError):
            enhance_contrast(img, -1.0, 98.0)


class TestDimensionPreservation:
    def test_all_preserving_ops(self, rng):
        img = random_raster(rng, 19, 13)
        preserved = [
            gaussian_smooth(img, 1.0),
            apply_white_mask(img, BinaryMask.ones(19, 13)),
            draw_red_box(img, Rect(2, 2, 5, 5), 1),
            draw_cartesian_auxlines(img, [LineSpec("horizontal", 3)]),
            draw_polar_auxlines(img, PolarSpec(center=(9, 6), radii=(3.0,))),
            apply_blur_mask(img, None, 2.0),
            enhance_contrast(img),
        ]
        for out in preserved:
            assert (out.width, out.height) == (img.width, img.height)
