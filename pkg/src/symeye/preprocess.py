"""Eyelash suppression with a horizontal 1D rank filter, and sclera-radius rescaling."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import rank_filter

from .errors import DataError, ParameterError
from .imgcore import GrayImage, ImageLike, as_array
from .irismatch import EyeAnnotation

DEFAULT_L = 7
DEFAULT_P = 2
CATMULL_ROM_A = -0.5


def rank_filter_1d(image: ImageLike, L: int = DEFAULT_L, p: int = DEFAULT_P) -> GrayImage:
    """Replace each pixel by the ``p``-th brightest value of its horizontal ``1 x L`` window.

    ``p = 1`` is a running maximum and ``p = L`` a running minimum.  With
    ``p = 2`` dark structures narrower than about ``L/2`` disappear.
    """
    if not isinstance(L, (int, np.integer)) or L < 3 or L % 2 == 0:
        raise ParameterError(f"L must be an odd integer >= 3, got {L}")
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= L:
        raise ParameterError(f"p must be an integer in [1, {L}], got {p}")
    arr = as_array(image).astype(np.float64)
    # scipy ranks ascending from 0; the p-th brightest is ascending rank L - p
    out = rank_filter(arr, rank=int(L - p), size=(1, int(L)), mode="nearest")
    return GrayImage(out)


def adaptive_length(width: float) -> int:
    """Smallest odd integer not below ``max(3, round(width))``."""
    L = max(3, int(math.floor(width + 0.5)))
    return L if L % 2 == 1 else L + 1


def adaptive_rank_filter(image: ImageLike, edge_width: float) -> GrayImage:
    """Rank filter with ``p = 2`` and the window length tied to the estimated edge width."""
    if not 2.0 <= edge_width <= 22.0:
        raise ParameterError(f"edge width must lie in [2, 22], got {edge_width}")
    return rank_filter_1d(image, adaptive_length(edge_width), DEFAULT_P)


def _cubic_weights(t: np.ndarray, a: float = CATMULL_ROM_A) -> np.ndarray:
    """Keys cubic weights for the four taps at offsets -1, 0, 1, 2 from ``floor(x)``."""
    d = np.stack([1 + t, t, 1 - t, 2 - t], axis=-1)
    ad = np.abs(d)
    near = ((a + 2) * ad - (a + 3)) * ad**2 + 1
    far = ((a * ad - 5 * a) * ad + 8 * a) * ad - 4 * a
    return np.where(ad <= 1, near, np.where(ad < 2, far, 0.0))


def _resample_axis(arr: np.ndarray, size: int, scale: float, axis: int) -> np.ndarray:
    n = arr.shape[axis]
    src = np.arange(size, dtype=np.float64) / scale
    base = np.floor(src).astype(int)
    w = _cubic_weights(src - base)
    idx = np.clip(base[:, None] + np.arange(-1, 3)[None, :], 0, n - 1)
    moved = np.moveaxis(arr, axis, 0)
    out = np.einsum("ok,ok...->o...", w, moved[idx])
    return np.moveaxis(out, 0, axis)


def resize_bicubic(image: ImageLike, scale: float) -> GrayImage:
    """Uniform Catmull-Rom resampling; output pixel ``x`` samples source ``x / scale``."""
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}")
    arr = as_array(image).astype(np.float64)
    h, w = arr.shape
    new_h, new_w = max(1, round(h * scale)), max(1, round(w * scale))
    out = _resample_axis(arr, new_w, scale, axis=1)
    out = _resample_axis(out, new_h, scale, axis=0)
    return GrayImage(np.clip(out, 0.0, 1.0))


def resize_to_sclera(
    image: ImageLike,
    annotation: EyeAnnotation,
    target_radius: float,
) -> tuple[GrayImage, EyeAnnotation]:
    """Scale image and annotation so the sclera radius becomes ``target_radius``."""
    if not annotation.sclera.r > 0 or not target_radius > 0:
        raise DataError("sclera and target radii must be positive")
    scale = target_radius / annotation.sclera.r
    if scale == 1.0:
        return GrayImage(as_array(image)), annotation
    return resize_bicubic(image, scale), annotation.scaled(scale)


def mean_sclera_radius(annotations) -> float:
    radii = [a.sclera.r for a in annotations]
    if not radii:
        raise DataError("no annotations to average")
    return float(np.mean(radii))
