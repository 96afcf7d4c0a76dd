"""Symmetry derivatives of Gaussians and the eye-centre detector.

The order-``n`` filter is ``(-1/s^2)^|n| (x +/- iy)^|n| g(x, y)``.  Since the
2D Gaussian factors as ``g(x) g(y)``, the orders used here split into a few
products of 1D moment kernels:

* ``n = 1``:  ``-1/s^2 * (x g(x) g(y) + i g(x) y g(y))``
* ``n = -2``: ``1/s^4 * (x^2 g(x) g(y) - g(x) y^2 g(y) - 2i x g(x) y g(y))``

The detector squares the ``n = 1`` response to get the orientation field
``h`` (double-angle gradient), convolves ``h`` with the ``n = -2`` filter and
picks the strongest local maximum of ``|I20|`` whose argument is near zero,
which is the signature of concentric circles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from .errors import NoEyeFound, ParameterError
from .imgcore import (
    DEFAULT_TRUNCATION,
    ComplexField,
    GrayImage,
    ImageLike,
    Kernel1D,
    apply_separable_complex_array,
    as_array,
    convolve_dense,
    moment_kernel,
)

SUPPORTED_ORDERS = (-2, 1)
DEFAULT_ANGLE_THRESHOLD = math.pi / 6
DEFAULT_COVERAGE = 0.75
MAXIMA_WINDOW = 7
# Fixed derivative scale of the non-adaptive scenarios (edge width 7 px).
FIXED_SIGMA1 = 7.0 / 6.0
# |I20| at or below this is treated as no response at all.
MAGNITUDE_FLOOR = 1e-12


@dataclass(frozen=True)
class SeparableComplexFilter:
    """Complex 2D filter stored as weighted (horizontal, vertical) kernel pairs."""

    order: int
    sigma: float
    terms: tuple[tuple[Kernel1D, Kernel1D, complex], ...]
    truncation: float = DEFAULT_TRUNCATION

    @property
    def radius(self) -> int:
        return max(max(h.radius, v.radius) for h, v, _ in self.terms)

    def reconstruct(self) -> np.ndarray:
        """Dense ``[y, x]`` array assembled from the separable terms."""
        r = self.radius
        out = np.zeros((2 * r + 1, 2 * r + 1), dtype=np.complex128)
        for h, v, weight in self.terms:
            hh = np.zeros(2 * r + 1)
            vv = np.zeros(2 * r + 1)
            hh[r - h.radius : r + h.radius + 1] = h.taps
            vv[r - v.radius : r + v.radius + 1] = v.taps
            out += weight * np.outer(vv, hh)
        return out


def build_symmetry_filter(n: int, sigma: float, truncation: float = DEFAULT_TRUNCATION) -> SeparableComplexFilter:
    if n not in SUPPORTED_ORDERS:
        raise ParameterError(f"symmetry order must be one of {SUPPORTED_ORDERS}, got {n}")
    g = moment_kernel(sigma, 0, truncation)
    xg = moment_kernel(sigma, 1, truncation)
    if n == 1:
        c = -1.0 / sigma**2
        terms = ((xg, g, complex(c)), (g, xg, 1j * c))
    else:
        x2g = moment_kernel(sigma, 2, truncation)
        c = 1.0 / sigma**4
        terms = ((x2g, g, complex(c)), (g, x2g, complex(-c)), (xg, xg, -2j * c))
    return SeparableComplexFilter(order=n, sigma=float(sigma), terms=terms, truncation=truncation)


def sample_symmetry_filter(n: int, sigma: float, truncation: float = DEFAULT_TRUNCATION) -> np.ndarray:
    """Directly sampled dense filter ``(-1/s^2)^|n| (x +/- iy)^|n| g(x, y)`` on the same support.

    The 2D Gaussian is normalised to unit sum, matching the separable build.
    """
    if n not in SUPPORTED_ORDERS:
        raise ParameterError(f"symmetry order must be one of {SUPPORTED_ORDERS}, got {n}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    r = int(math.ceil(truncation * sigma))
    y, x = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    g = np.exp(-(x**2 + y**2) / (2.0 * sigma**2))
    g /= g.sum()
    z = x + 1j * y if n >= 0 else x - 1j * y
    return (-1.0 / sigma**2) ** abs(n) * z ** abs(n) * g


def _gradient(image: ImageLike, sigma1: float, method: str) -> np.ndarray:
    arr = as_array(image)
    if method == "separable":
        return apply_separable_complex_array(arr, build_symmetry_filter(1, sigma1))
    if method == "dense":
        return convolve_dense(arr, sample_symmetry_filter(1, sigma1))
    raise ParameterError(f"unknown convolution method {method!r}")


def complex_gradient(image: ImageLike, sigma: float, method: str = "separable") -> np.ndarray:
    """``Gamma^{1,sigma^2} * f``: approximately ``df/dx + i df/dy`` at scale ``sigma``."""
    return _gradient(image, sigma, method)


def orientation_field(image: ImageLike, sigma1: float, method: str = "separable") -> ComplexField:
    """Squared complex gradient; its argument is twice the gradient direction."""
    return ComplexField(_gradient(image, sigma1, method) ** 2)


def i20_response(h: ComplexField | np.ndarray, sigma2: float, method: str = "separable") -> ComplexField:
    """Convolve the orientation field with the order -2 symmetry filter."""
    arr = as_array(h)
    if method == "separable":
        return ComplexField(apply_separable_complex_array(arr, build_symmetry_filter(-2, sigma2)))
    if method == "dense":
        return ComplexField(convolve_dense(arr, sample_symmetry_filter(-2, sigma2)))
    raise ParameterError(f"unknown convolution method {method!r}")


def coverage_sigma(width: int, height: int, coverage: float = DEFAULT_COVERAGE) -> float:
    """Scale whose truncated support ``2*ceil(3s)+1`` spans ``coverage`` of the shorter side."""
    if not 0 < coverage <= 1:
        raise ParameterError(f"coverage must lie in (0, 1], got {coverage}")
    diameter = coverage * min(width, height)
    if diameter <= 1:
        raise ParameterError(f"image too small for coverage {coverage}")
    return (diameter - 1.0) / (2.0 * DEFAULT_TRUNCATION)


@dataclass(frozen=True)
class DetectionResult:
    center: tuple[int, int]
    magnitude: float
    argument: float
    sigma1: float = float("nan")
    sigma2: float = float("nan")


def local_maxima(magnitude: np.ndarray, window: int = MAXIMA_WINDOW) -> np.ndarray:
    """Boolean mask of pixels equal to the maximum of their ``window x window`` neighbourhood."""
    peak = maximum_filter(magnitude, size=window, mode="nearest")
    return (magnitude == peak) & (magnitude > MAGNITUDE_FLOOR)


def select_center(response: ComplexField, angle_threshold: float = DEFAULT_ANGLE_THRESHOLD) -> tuple[int, int]:
    """Strongest 7x7 local maximum of |I20| with |arg| below the threshold, as ``(x, y)``.

    Equal magnitudes resolve to the first in row-major order.
    """
    mag = response.magnitude
    candidates = local_maxima(mag) & (np.abs(response.argument) < angle_threshold)
    if not candidates.any():
        raise NoEyeFound("no local maximum of |I20| passed the angle threshold")
    scored = np.where(candidates, mag, -1.0)
    flat = int(np.argmax(scored))
    y, x = divmod(flat, mag.shape[1])
    return x, y


def detect_eye(
    image: GrayImage | np.ndarray,
    sigma1: float = FIXED_SIGMA1,
    angle_threshold: float = DEFAULT_ANGLE_THRESHOLD,
    coverage: float = DEFAULT_COVERAGE,
    method: str = "separable",
) -> DetectionResult:
    """Locate the eye as the strongest concentric-circle symmetry in the image."""
    arr = as_array(image)
    h, w = arr.shape
    if min(h, w) < 32:
        raise ParameterError(f"image must be at least 32 px on its shortest side, got {w}x{h}")
    sigma2 = coverage_sigma(w, h, coverage)
    field = orientation_field(arr, sigma1, method)
    response = i20_response(field, sigma2, method)
    x, y = select_center(response, angle_threshold)
    value = response.data[y, x]
    return DetectionResult(
        center=(x, y),
        magnitude=float(abs(value)),
        argument=float(np.angle(value)),
        sigma1=float(sigma1),
        sigma2=float(sigma2),
    )
