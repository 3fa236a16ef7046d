"""Numpy implementations of the two hot kernels.

These are the fallback twins of the compiled Cython kernels in _kernels.pyx
and must produce bit-identical results:

* convolve_rows accumulates float64 products tap-by-tap in ascending tap
  order, exactly like the compiled inner loop, so every element sees the
  same IEEE operation sequence on either backend.
* area_reduce_rows is pure int64 arithmetic, where associativity makes the
  accumulation order irrelevant.
"""

from __future__ import annotations

import numpy as np


def convolve_rows(src: np.ndarray, weights: np.ndarray, radius: int) -> np.ndarray:
    """1-D convolution along axis 1 with clamp-to-edge handling.

    src is (H, W) float64, weights has length 2*radius + 1 and sums to 1.
    """
    h, w = src.shape
    padded = np.pad(src, ((0, 0), (radius, radius)), mode="edge")
    out = np.zeros((h, w), dtype=np.float64)
    for k in range(2 * radius + 1):
        out += weights[k] * padded[:, k:k + w]
    return out


def area_reduce_rows(src: np.ndarray, out_size: int) -> np.ndarray:
    """Exact box-average numerators along axis 1.

    Maps output cell i to the source footprint [i*S/O, (i+1)*S/O).  Working
    in coordinates scaled by O makes every coverage weight an integer, so
    the returned (H, out_size) int64 numerators are exact; dividing by S
    yields the true area average.
    """
    h, s = src.shape
    o = out_size
    a = src.astype(np.int64, copy=False)
    prefix = np.zeros((h, s + 1), dtype=np.int64)
    np.cumsum(a, axis=1, out=prefix[:, 1:])
    # G(x) = integral of the source over [0, x) in O-scaled coordinates
    bounds = np.arange(o + 1, dtype=np.int64) * s
    q, r = np.divmod(bounds, o)
    a_ext = np.concatenate([a, np.zeros((h, 1), dtype=np.int64)], axis=1)
    g = o * prefix[:, q] + r * a_ext[:, q]
    return g[:, 1:] - g[:, :-1]
