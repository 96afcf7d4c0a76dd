"""Image containers and the separable convolution engine.

Every filter in the package is applied through :func:`convolve_separable`:
a 2D kernel written as an outer product of two 1D kernels is run as one
horizontal pass followed by one vertical pass. Borders are replicated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Union

import numpy as np
from scipy.ndimage import convolve1d

from .errors import ParameterError

if TYPE_CHECKING:
    from .symmetry import SeparableComplexFilter

DEFAULT_TRUNCATION = 3.0

# ITU-R BT.601 luma weights.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GrayImage:
    """Real-valued raster with intensities in [0, 1], indexed ``data[y, x]``."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ParameterError(f"GrayImage needs a non-empty 2D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("GrayImage contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ParameterError(
                f"GrayImage intensities must lie in [0, 1], got [{arr.min():.4g}, {arr.max():.4g}]"
            )
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class ComplexField:
    """Complex-valued raster, indexed ``data[y, x]``."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ParameterError(f"ComplexField needs a non-empty 2D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("ComplexField contains non-finite values")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.data)

    @property
    def argument(self) -> np.ndarray:
        return np.angle(self.data)


@dataclass(frozen=True)
class Kernel1D:
    """Odd-length 1D kernel; ``taps[radius + x]`` is the coefficient at offset ``x``."""

    taps: np.ndarray
    radius: int = field(init=False)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size % 2 == 0:
            raise ParameterError(f"Kernel1D needs an odd-length 1D tap array, got shape {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise ParameterError("Kernel1D taps must be finite")
        object.__setattr__(self, "taps", _frozen(taps))
        object.__setattr__(self, "radius", taps.size // 2)

    def __len__(self) -> int:
        return self.taps.size

    def at(self, x: int) -> float:
        """Coefficient at integer offset ``x`` (zero outside the support)."""
        if abs(x) > self.radius:
            return 0.0
        return float(self.taps[self.radius + x])

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.radius, self.radius + 1)

    @classmethod
    def impulse(cls) -> "Kernel1D":
        return cls(np.array([1.0]))


ImageLike = Union[GrayImage, ComplexField, np.ndarray]


def as_array(image: ImageLike) -> np.ndarray:
    if isinstance(image, (GrayImage, ComplexField)):
        return image.data
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ParameterError(f"expected a 2D raster, got shape {arr.shape}")
    return arr


def _support_radius(sigma: float, truncation: float) -> int:
    if not sigma > 0 or not math.isfinite(sigma):
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if truncation < 2:
        raise ParameterError(f"truncation must be >= 2 sigma, got {truncation}")
    return int(math.ceil(truncation * sigma))


def gaussian_kernel(sigma: float, truncation: float = DEFAULT_TRUNCATION) -> Kernel1D:
    """Sampled Gaussian on ``[-ceil(truncation*sigma), +ceil(truncation*sigma)]`` with unit sum."""
    radius = _support_radius(sigma, truncation)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return Kernel1D(g / g.sum())


def moment_kernel(sigma: float, order: int, truncation: float = DEFAULT_TRUNCATION) -> Kernel1D:
    """Sampled ``x**order * g(x)``.

    All orders are divided by the same constant, the sum of the order-0 taps,
    so products of moment kernels reproduce a unit-mass 2D Gaussian times a
    polynomial.
    """
    if order not in (0, 1, 2):
        raise ParameterError(f"moment order must be 0, 1 or 2, got {order}")
    radius = _support_radius(sigma, truncation)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return Kernel1D(x**order * g / g.sum())


def _check_kernel_fits(arr: np.ndarray, horizontal: Kernel1D, vertical: Kernel1D) -> None:
    h, w = arr.shape
    if len(horizontal) >= 2 * w:
        raise ParameterError(f"horizontal kernel ({len(horizontal)} taps) too long for width {w}")
    if len(vertical) >= 2 * h:
        raise ParameterError(f"vertical kernel ({len(vertical)} taps) too long for height {h}")


def _convolve_real(arr: np.ndarray, horizontal: Kernel1D, vertical: Kernel1D) -> np.ndarray:
    out = convolve1d(arr, horizontal.taps, axis=1, mode="nearest")
    return convolve1d(out, vertical.taps, axis=0, mode="nearest")


def separable_filter(image: ImageLike, horizontal: Kernel1D, vertical: Kernel1D) -> np.ndarray:
    """Array-level separable convolution; keeps the input's real/complex dtype."""
    arr = as_array(image)
    _check_kernel_fits(arr, horizontal, vertical)
    if np.iscomplexobj(arr):
        re = _convolve_real(np.ascontiguousarray(arr.real), horizontal, vertical)
        im = _convolve_real(np.ascontiguousarray(arr.imag), horizontal, vertical)
        return re + 1j * im
    return _convolve_real(arr.astype(np.float64, copy=False), horizontal, vertical)


def convolve_separable(image: ImageLike, horizontal: Kernel1D, vertical: Kernel1D) -> ComplexField:
    """``out(x, y) = sum_{u,v} in(x-u, y-v) * horizontal(u) * vertical(v)``, replicate borders."""
    return ComplexField(separable_filter(image, horizontal, vertical))


def apply_separable_complex_array(image: ImageLike, filt: "SeparableComplexFilter") -> np.ndarray:
    if not filt.terms:
        raise ParameterError("separable filter has no terms")
    arr = as_array(image)
    out = np.zeros(arr.shape, dtype=np.complex128)
    for horizontal, vertical, weight in filt.terms:
        out += weight * separable_filter(arr, horizontal, vertical)
    return out


def apply_separable_complex(image: ImageLike, filt: "SeparableComplexFilter") -> ComplexField:
    """Sum of weighted separable passes, one per filter term."""
    return ComplexField(apply_separable_complex_array(image, filt))


def convolve_dense(image: ImageLike, kernel: np.ndarray) -> np.ndarray:
    """Direct 2D convolution with a dense odd-sized kernel, replicate borders.

    Used as the reference path for the separable engine; cost grows with
    the kernel area rather than its side.
    """
    arr = as_array(image)
    kernel = np.asarray(kernel)
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ParameterError(f"dense kernel must have odd sides, got {kernel.shape}")
    ry, rx = kh // 2, kw // 2
    h, w = arr.shape
    padded = np.pad(arr, ((ry, ry), (rx, rx)), mode="edge")
    dtype = np.result_type(arr.dtype, kernel.dtype, np.float64)
    out = np.zeros((h, w), dtype=dtype)
    for j in range(kh):
        v = j - ry
        for i in range(kw):
            c = kernel[j, i]
            if c == 0:
                continue
            u = i - rx
            # in(x-u, y-v) lives at padded[y - v + ry, x - u + rx]
            out += c * padded[ry - v : ry - v + h, rx - u : rx - u + w]
    return out


def to_unit_range(raw: np.ndarray, mode: str | None = None) -> np.ndarray:
    """Map raw integer or float samples to [0, 1] according to their bit depth."""
    arr = np.asarray(raw)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if arr.dtype == np.uint16 or mode in ("I;16", "I;16B", "I;16L"):
        return arr.astype(np.float64) / 65535.0
    if np.issubdtype(arr.dtype, np.integer):
        info = np.iinfo(arr.dtype)
        return np.clip(arr.astype(np.float64) / float(info.max), 0.0, 1.0)
    arr = arr.astype(np.float64)
    if arr.size and arr.max() > 1.0:
        arr = arr / 255.0
    return np.clip(arr, 0.0, 1.0)


def load_image(path: str | Path) -> GrayImage:
    """Read a PNG/PGM raster as a [0, 1] grayscale image.

    Colour images are reduced with the 0.299/0.587/0.114 luma weights applied
    to the 8-bit channels in float64.
    """
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("RGB", "RGBA", "P", "CMYK", "YCbCr", "LA"):
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
            wr, wg, wb = LUMA_WEIGHTS
            return GrayImage(np.clip(wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2], 0.0, 1.0))
        if im.mode == "1":
            return GrayImage(np.asarray(im, dtype=np.float64))
        return GrayImage(to_unit_range(np.asarray(im), im.mode))


def save_image(path: str | Path, image: ImageLike) -> None:
    """Write an 8-bit grayscale raster (format chosen from the suffix)."""
    from PIL import Image

    arr = np.clip(np.real(as_array(image)), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(path)
