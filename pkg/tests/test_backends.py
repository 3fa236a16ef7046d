"""Kernel backend parity: the compiled and numpy paths must agree bitwise."""

import numpy as np
import pytest

from ddp.raster import available_backends, get_backend
from ddp.raster.ops import gaussian_kernel

needs_compiled = pytest.mark.skipif(
    "compiled" not in available_backends(),
    reason="compiled kernels not built",
)


@needs_compiled
@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0, 6.0])
def test_convolve_rows_bit_identical(rng, sigma):
    py = get_backend("python")
    cy = get_backend("compiled")
    weights, radius = gaussian_kernel(sigma)
    for shape in ((1, 1), (3, 40), (37, 53), (5, 2)):
        src = np.ascontiguousarray(rng.random(shape) * 255.0)
        a = np.asarray(py.convolve_rows(src, weights, radius))
        b = np.asarray(cy.convolve_rows(src, weights, radius))
        assert a.tobytes() == b.tobytes()


@needs_compiled
def test_area_reduce_rows_identical(rng):
    py = get_backend("python")
    cy = get_backend("compiled")
    for s, o in ((500, 80), (401, 17), (33, 32), (7, 3), (1, 1), (150, 149)):
        src = rng.integers(0, 256, (11, s)).astype(np.int64)
        a = np.asarray(py.area_reduce_rows(src, o))
        b = np.asarray(cy.area_reduce_rows(src, o))
        assert np.array_equal(a, b)


@needs_compiled
def test_full_ops_identical_across_backends(rng):
    """Whole-op outputs, not just kernels, must match byte for byte."""
    from ddp.raster import _kernels, _kernels_py, backend
    from ddp.raster import Raster, downsample_max_dim, gaussian_smooth

    img = Raster(rng.integers(0, 256, (67, 103, 3), dtype=np.uint8))
    results = {}
    originals = (backend.convolve_rows, backend.area_reduce_rows)
    for name, mod in (("python", _kernels_py), ("compiled", _kernels)):
        backend.convolve_rows = mod.convolve_rows
        backend.area_reduce_rows = mod.area_reduce_rows
        try:
            results[name] = (
                gaussian_smooth(img, 1.3).tobytes(),
                downsample_max_dim(img, 29).tobytes(),
            )
        finally:
            backend.convolve_rows, backend.area_reduce_rows = originals
    assert results["python"] == results["compiled"]
