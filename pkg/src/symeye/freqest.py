"""Local frequency maps and the edge-transition width estimate used to adapt the detector.

The local frequency at a pixel is the square root of the ratio between the
windowed gradient energy and the windowed variance of the locally de-meaned
image.  For ``A cos(w x)`` that ratio is the squared transfer function of
the gradient filter at ``w``; inverting the (exactly known, discrete)
transfer function turns it back into ``w``.

Edge widths come from a quadratic ``T'(F) = a F^2 + b F + c`` fitted on
synthetic Gaussian-CDF edges of known width ``T`` (``sigma = T / 6``).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import DegenerateCalibration, FlatImage, ParameterError
from .imgcore import GrayImage, ImageLike, as_array, gaussian_kernel, moment_kernel, separable_filter
from .symmetry import complex_gradient

DEFAULT_WINDOW_SIGMA = 4.0
GRADIENT_SIGMA = 0.7
VARIANCE_FLOOR = 1e-6
DEFAULT_WIDTHS = tuple(range(2, 23))
WIDTH_RANGE = (2.0, 22.0)
CALIBRATION_SIZE = 129


@lru_cache(maxsize=8)
def _gradient_response(sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude response of the ``n = 1`` filter to ``cos(w x)``, up to its first peak."""
    k = moment_kernel(sigma, 1)
    x = k.offsets.astype(np.float64)
    omega = np.linspace(1e-4, math.pi, 20001)
    amp = np.sin(np.outer(omega, x)) @ k.taps / sigma**2
    peak = int(np.argmax(amp))
    omega, amp = omega[: peak + 1], amp[: peak + 1]
    omega.setflags(write=False)
    amp.setflags(write=False)
    return omega, amp


def _window(arr: np.ndarray, sigma: float) -> np.ndarray:
    k = gaussian_kernel(sigma)
    return separable_filter(arr, k, k)


def _frequency_terms(image: ImageLike, window_sigma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    f = as_array(image).astype(np.float64)
    k = gaussian_kernel(window_sigma)
    if f.shape[0] <= len(k) or f.shape[1] <= len(k):
        raise ParameterError(f"image {f.shape[1]}x{f.shape[0]} is not larger than the {len(k)}-px window")
    d = f - _window(f, window_sigma)
    variance = _window(d * d, window_sigma)
    energy = _window(np.abs(complex_gradient(d, GRADIENT_SIGMA)) ** 2, window_sigma)
    return variance, energy, f


def local_frequency_map(
    image: ImageLike,
    window_sigma: float = DEFAULT_WINDOW_SIGMA,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel absolute frequency (rad/px) and the validity mask.

    Pixels whose local variance is below ``VARIANCE_FLOOR`` are invalid and
    hold NaN.  Raises :class:`FlatImage` when no pixel is valid.
    """
    if not window_sigma > 0:
        raise ParameterError(f"window_sigma must be positive, got {window_sigma}")
    variance, energy, _ = _frequency_terms(image, window_sigma)
    valid = variance > VARIANCE_FLOOR
    if not valid.any():
        raise FlatImage("local variance is below the floor everywhere")
    ratio = np.full(variance.shape, np.nan)
    ratio[valid] = np.sqrt(energy[valid] / variance[valid])
    omega, amp = _gradient_response(GRADIENT_SIGMA)
    freq = np.full(variance.shape, np.nan)
    # beyond the response peak the inversion is ambiguous; clamp to it
    freq[valid] = np.interp(ratio[valid], amp, omega)
    return freq, valid


@dataclass(frozen=True)
class WidthCalibration:
    """``T'(F) = a F^2 + b F + c`` plus the range of frequencies it was fitted on."""

    a: float
    b: float
    c: float
    f_min: float
    f_max: float
    samples: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c, self.f_min, self.f_max)):
            raise DegenerateCalibration("calibration coefficients must be finite")

    def width(self, freq):
        """Unclamped polynomial evaluation."""
        freq = np.asarray(freq, dtype=np.float64)
        return (self.a * freq + self.b) * freq + self.c

    def to_dict(self) -> dict:
        record = asdict(self)
        record["samples"] = [list(s) for s in self.samples]
        record["format"] = "symeye.width-calibration"
        record["version"] = 1
        return record

    @classmethod
    def from_dict(cls, record: dict) -> "WidthCalibration":
        if record.get("format") != "symeye.width-calibration":
            raise ParameterError("not a width calibration record")
        return cls(
            a=float(record["a"]),
            b=float(record["b"]),
            c=float(record["c"]),
            f_min=float(record["f_min"]),
            f_max=float(record["f_max"]),
            samples=tuple((float(t), float(f)) for t, f in record.get("samples", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "WidthCalibration":
        return cls.from_dict(json.loads(Path(path).read_text()))


def reference_frequency(T: float, size: int = CALIBRATION_SIZE, window_sigma: float = DEFAULT_WINDOW_SIGMA) -> float:
    """Estimated frequency at the centre pixel of a synthetic CDF edge of width ``T``."""
    from .synthbench import gen_cdf_edge

    edge = gen_cdf_edge((size, size), T)
    freq, valid = local_frequency_map(edge, window_sigma)
    c = size // 2
    if not valid[c, c]:
        raise DegenerateCalibration(f"reference pixel is flat for T={T}")
    return float(freq[c, c])


def calibrate_width_polynomial(
    widths=DEFAULT_WIDTHS,
    window_sigma: float = DEFAULT_WINDOW_SIGMA,
) -> WidthCalibration:
    """Least-squares fit of ``T`` against ``(F^2, F, 1)`` over synthetic edges."""
    widths = [float(t) for t in widths]
    if len(set(widths)) < 3:
        raise ParameterError("need at least 3 distinct widths to fit a quadratic")
    freqs = np.array([reference_frequency(t, window_sigma=window_sigma) for t in widths])
    design = np.stack([freqs**2, freqs, np.ones_like(freqs)], axis=1)
    if np.linalg.matrix_rank(design) < 3:
        raise DegenerateCalibration("calibration frequencies do not determine a quadratic")
    (a, b, c), *_ = np.linalg.lstsq(design, np.asarray(widths), rcond=None)
    return WidthCalibration(
        a=float(a),
        b=float(b),
        c=float(c),
        f_min=float(freqs.min()),
        f_max=float(freqs.max()),
        samples=tuple(zip(widths, (float(f) for f in freqs))),
    )


@lru_cache(maxsize=1)
def default_calibration() -> WidthCalibration:
    return calibrate_width_polynomial()


def width_map(
    image: ImageLike,
    calibration: WidthCalibration,
    window_sigma: float = DEFAULT_WINDOW_SIGMA,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel clamped edge width and the validity mask."""
    freq, valid = local_frequency_map(image, window_sigma)
    widths = np.full(freq.shape, np.nan)
    widths[valid] = np.clip(calibration.width(freq[valid]), *WIDTH_RANGE)
    return widths, valid


def estimate_edge_width(
    image: GrayImage | np.ndarray,
    calibration: WidthCalibration | None = None,
    window_sigma: float = DEFAULT_WINDOW_SIGMA,
) -> float:
    """Average edge-transition width of the image, in pixels, within [2, 22].

    Valid pixels are averaged with weights equal to their squared gradient
    magnitude, so the estimate reflects pixels that sit on edges.
    """
    if calibration is None:
        calibration = default_calibration()
    widths, valid = width_map(image, calibration, window_sigma)
    weight = np.abs(complex_gradient(as_array(image).astype(np.float64), GRADIENT_SIGMA)) ** 2
    w = weight[valid]
    total = float(w.sum())
    if total <= 0:
        raise FlatImage("no gradient energy on valid pixels")
    value = float(np.sum(widths[valid] * w) / total)
    return float(np.clip(value, *WIDTH_RANGE))
