"""Value types for the image layer: rasters, rectangles, masks, line specs.

A Raster is an immutable 8-bit RGB pixel grid; every operation in ops.py
takes rasters in and returns new rasters out, so instances are safe to
share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatchError, OutOfBoundsError


class Raster:
    """Immutable 8-bit RGB image backed by a read-only (H, W, 3) uint8 array."""

    __slots__ = ("_data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("raster must be at least 1x1")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("channel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        else:
            arr = arr.copy()  # own the buffer so freezing cannot affect the caller
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def _own(cls, arr: np.ndarray) -> "Raster":
        """Wrap a freshly allocated contiguous uint8 array without copying."""
        out = object.__new__(cls)
        arr.flags.writeable = False
        out._data = arr
        return out

    @classmethod
    def full(cls, width: int, height: int, color=(0, 0, 0)) -> "Raster":
        """Constant-color raster of the given size."""
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:, :] = np.asarray(color, dtype=np.uint8)
        return cls._own(arr)

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def pixels(self) -> np.ndarray:
        """Read-only (H, W, 3) uint8 view of the pixel data."""
        return self._data

    def max_dim(self) -> int:
        return max(self.width, self.height)

    def tobytes(self) -> bytes:
        """Row-major RGB byte string (length = width * height * 3)."""
        return self._data.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(
            np.array_equal(self._data, other._data)
        )

    def __hash__(self):
        return hash((self._data.shape, self._data.tobytes()))

    def __repr__(self) -> str:
        return f"Raster({self.width}x{self.height})"


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in pixel coordinates (x right, y down)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"rect must be at least 1x1, got {self.w}x{self.h}")

    def validate_within(self, img: Raster) -> None:
        """Raise OutOfBoundsError unless the rect lies fully inside img."""
        if self.x < 0 or self.y < 0 or self.x + self.w > img.width or self.y + self.h > img.height:
            raise OutOfBoundsError(
                f"rect ({self.x},{self.y},{self.w},{self.h}) exceeds "
                f"{img.width}x{img.height} image"
            )

    def as_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


class BinaryMask:
    """Per-pixel keep/replace mask; 1 keeps the source pixel, 0 replaces it."""

    __slots__ = ("_bits",)

    def __init__(self, bits: np.ndarray):
        arr = np.asarray(bits)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        arr = (arr != 0)
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self._bits = arr

    @classmethod
    def ones(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_rect(cls, width: int, height: int, keep: Rect) -> "BinaryMask":
        """Mask that keeps the pixels inside `keep` and replaces everything else."""
        bits = np.zeros((height, width), dtype=bool)
        bits[keep.y:keep.y + keep.h, keep.x:keep.x + keep.w] = True
        return cls(bits)

    @property
    def width(self) -> int:
        return self._bits.shape[1]

    @property
    def height(self) -> int:
        return self._bits.shape[0]

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def validate_against(self, img: Raster) -> None:
        if (self.width, self.height) != (img.width, img.height):
            raise DimensionMismatchError(
                f"mask is {self.width}x{self.height}, image is {img.width}x{img.height}"
            )


@dataclass(frozen=True)
class LineSpec:
    """One full-width horizontal or full-height vertical reference line."""

    orientation: str  # "horizontal" | "vertical"
    position: int     # row index for horizontal, column index for vertical
    thickness: int = 2
    color: tuple = (0, 255, 0)

    def __post_init__(self):
        if self.orientation not in ("horizontal", "vertical"):
            raise ValueError(f"bad orientation {self.orientation!r}")
        if self.thickness < 1:
            raise ValueError("thickness must be >= 1")

    def validate_within(self, img: Raster) -> None:
        limit = img.height if self.orientation == "horizontal" else img.width
        if not 0 <= self.position < limit:
            raise OutOfBoundsError(
                f"{self.orientation} line at {self.position} outside 0..{limit - 1}"
            )


@dataclass(frozen=True)
class PolarSpec:
    """Concentric circles and/or radial spokes around a center point.

    Angles are degrees, measured from the +x axis toward +y (downward on
    screen); at least one of radii/angles must be non-empty.
    """

    center: tuple            # (x, y)
    radii: tuple = ()        # circle radii in pixels, each > 0
    angles: tuple = ()       # spoke angles in degrees, [0, 360)
    spoke_length: int = 0
    thickness: int = 2
    color: tuple = (0, 255, 0)

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(self.radii))
        object.__setattr__(self, "angles", tuple(self.angles))
        if not self.radii and not self.angles:
            raise ValueError("polar spec needs at least one circle or spoke")
        if any(r <= 0 for r in self.radii):
            raise ValueError("circle radii must be > 0")
        if self.thickness < 1:
            raise ValueError("thickness must be >= 1")

    def validate_within(self, img: Raster) -> None:
        cx, cy = self.center
        if not (0 <= cx < img.width and 0 <= cy < img.height):
            raise OutOfBoundsError(
                f"polar center ({cx},{cy}) outside {img.width}x{img.height} image"
            )
