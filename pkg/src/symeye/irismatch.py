"""Simplified iris matcher: rubber-sheet unwrapping, 1D log-Gabor phase bits, masked Hamming distance."""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import DataError, EmptyOverlap, ParameterError
from .imgcore import GrayImage, ImageLike, as_array

RADIAL_SAMPLES = 20
ANGULAR_SAMPLES = 240
LG_WAVELENGTH = 18.0
LG_SIGMA_ON_F = 0.5


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        for v in (self.cx, self.cy, self.r):
            if not math.isfinite(v):
                raise DataError(f"circle has a non-finite value: {self}")
        if self.r <= 0:
            raise DataError(f"circle radius must be positive, got {self.r}")

    def contains(self, x, y):
        return (np.asarray(x) - self.cx) ** 2 + (np.asarray(y) - self.cy) ** 2 < self.r**2

    def scaled(self, s: float) -> "Circle":
        return Circle(self.cx * s, self.cy * s, self.r * s)

    def as_list(self) -> list[float]:
        return [float(self.cx), float(self.cy), float(self.r)]


@dataclass(frozen=True)
class EyeAnnotation:
    """Pupil and sclera (outer iris) circles plus optional occluding eyelid circles."""

    pupil: Circle
    sclera: Circle
    eyelids: dict[str, Circle] = field(default_factory=dict)

    def __post_init__(self):
        if not self.sclera.contains(self.pupil.cx, self.pupil.cy):
            raise DataError("pupil centre lies outside the sclera circle")
        unknown = set(self.eyelids) - {"upper", "lower"}
        if unknown:
            raise DataError(f"unknown eyelid keys: {sorted(unknown)}")

    def scaled(self, s: float) -> "EyeAnnotation":
        return EyeAnnotation(
            self.pupil.scaled(s),
            self.sclera.scaled(s),
            {k: c.scaled(s) for k, c in self.eyelids.items()},
        )


@dataclass(frozen=True)
class IrisCode:
    """Phase bits of shape ``(radial, angular, 2)`` (real sign, imaginary sign) and a same-shape validity mask."""

    bits: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        mask = np.asarray(self.mask, dtype=bool)
        if bits.shape != mask.shape:
            raise ParameterError(f"bits {bits.shape} and mask {mask.shape} differ in shape")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "mask", mask)

    def to_dict(self) -> dict:
        return {
            "format": "symeye.iriscode",
            "version": 1,
            "shape": list(self.bits.shape),
            "bits": base64.b64encode(np.packbits(self.bits.ravel()).tobytes()).decode("ascii"),
            "mask": base64.b64encode(np.packbits(self.mask.ravel()).tobytes()).decode("ascii"),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "IrisCode":
        if record.get("format") != "symeye.iriscode" or record.get("version") != 1:
            raise DataError("not a version-1 iris code record")
        shape = tuple(record["shape"])
        n = int(np.prod(shape))

        def unpack(s: str) -> np.ndarray:
            raw = np.frombuffer(base64.b64decode(s), dtype=np.uint8)
            return np.unpackbits(raw)[:n].astype(bool).reshape(shape)

        return cls(unpack(record["bits"]), unpack(record["mask"]))


def rubber_sheet(
    image: ImageLike,
    annotation: EyeAnnotation,
    radial: int = RADIAL_SAMPLES,
    angular: int = ANGULAR_SAMPLES,
) -> tuple[GrayImage, np.ndarray]:
    """Unwrap the iris annulus to a ``radial x angular`` strip.

    Row ``j`` samples the fraction ``(j + 1) / (radial + 1)`` of the way from
    the pupil boundary to the sclera boundary along each ray, so neither
    boundary itself is sampled.  The mask is False where a sample falls
    outside the image or inside an eyelid circle.
    """
    p, s = annotation.pupil, annotation.sclera
    if math.hypot(p.cx - s.cx, p.cy - s.cy) + p.r >= s.r:
        raise DataError("pupil circle is not strictly inside the sclera circle")
    arr = as_array(image).astype(np.float64)
    h, w = arr.shape
    theta = 2 * math.pi * np.arange(angular) / angular
    frac = (np.arange(radial) + 1.0) / (radial + 1.0)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    inner_x, inner_y = p.cx + p.r * cos_t, p.cy + p.r * sin_t
    outer_x, outer_y = s.cx + s.r * cos_t, s.cy + s.r * sin_t
    xs = inner_x[None, :] + frac[:, None] * (outer_x - inner_x)[None, :]
    ys = inner_y[None, :] + frac[:, None] * (outer_y - inner_y)[None, :]
    strip = map_coordinates(arr, [ys.ravel(), xs.ravel()], order=1, mode="nearest").reshape(radial, angular)
    mask = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    for lid in annotation.eyelids.values():
        mask &= ~lid.contains(xs, ys)
    return GrayImage(np.clip(strip, 0.0, 1.0)), mask


def log_gabor_1d(length: int, wavelength: float = LG_WAVELENGTH, sigma_on_f: float = LG_SIGMA_ON_F) -> np.ndarray:
    """One-sided log-Gabor transfer function on the ``numpy.fft`` frequency grid."""
    freqs = np.fft.fftfreq(length)
    f0 = 1.0 / wavelength
    out = np.zeros(length)
    pos = freqs > 0
    out[pos] = np.exp(-(np.log(freqs[pos] / f0) ** 2) / (2.0 * math.log(sigma_on_f) ** 2))
    return out


def encode_log_gabor_1d(
    normalized: ImageLike,
    mask: np.ndarray | None = None,
    wavelength: float = LG_WAVELENGTH,
    sigma_on_f: float = LG_SIGMA_ON_F,
) -> IrisCode:
    """Two phase-quadrant bits per sample from a circular 1D log-Gabor filtering of each row."""
    strip = as_array(normalized).astype(np.float64)
    rows, cols = strip.shape
    lg = log_gabor_1d(cols, wavelength, sigma_on_f)
    response = np.fft.ifft(np.fft.fft(strip, axis=1) * lg[None, :], axis=1)
    bits = np.stack([response.real > 0, response.imag > 0], axis=-1)
    valid = np.ones((rows, cols), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if valid.shape != (rows, cols):
        raise ParameterError(f"mask shape {valid.shape} does not match strip {strip.shape}")
    return IrisCode(bits, np.repeat(valid[..., None], 2, axis=-1))


def hamming_distance(a: IrisCode, b: IrisCode) -> float:
    """Fraction of disagreeing bits among those valid in both codes; no shifting."""
    if a.bits.shape != b.bits.shape:
        raise ParameterError(f"code shapes differ: {a.bits.shape} vs {b.bits.shape}")
    joint = a.mask & b.mask
    n = int(joint.sum())
    if n == 0:
        raise EmptyOverlap("iris codes have no jointly valid bits")
    return float(np.count_nonzero((a.bits ^ b.bits) & joint)) / n


def iris_code(image: ImageLike, annotation: EyeAnnotation) -> IrisCode:
    """Rubber sheet followed by log-Gabor encoding, with the sheet mask carried over."""
    strip, mask = rubber_sheet(image, annotation)
    return encode_log_gabor_1d(strip, mask)
