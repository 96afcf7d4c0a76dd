"""Retinotopic grid sampling with a log-polar Gabor bank, and chi-square template matching.

Each filter is a Gaussian in log-polar frequency coordinates
``(log|w|, angle(w))``, realised in the spatial domain by an inverse DFT on
a square raster and cropped to the window holding 99% of its energy.  At
every grid point the 5 x 6 complex responses form a jet; the magnitudes of
all jets, concatenated and divided by their sum, form the template.
Templates are compared once, without any rotation search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import DataError, ParameterError, ZeroVector
from .imgcore import GrayImage, as_array

NUM_FREQUENCIES = 5
NUM_ORIENTATIONS = 6
REALIZATION_SIZE = 128
ENERGY_FRACTION = 0.99
# Total magnitude below this is treated as an all-zero vector.
ZERO_TOTAL = 1e-10

# database -> {"dense": (rows, cols, spacing), "coarse": (...)}
GRID_TABLE: dict[str, dict[str, tuple[int, int, int]]] = {
    "biosec": {"dense": (13, 19, 30), "coarse": (7, 9, 60)},
    "casia": {"dense": (9, 11, 30), "coarse": (5, 5, 60)},
    "iitd": {"dense": (9, 13, 30), "coarse": (5, 7, 60)},
    "mobbio": {"dense": (9, 13, 16), "coarse": (5, 7, 32)},
    "ubiris": {"dense": (19, 23, 16), "coarse": (9, 11, 32)},
}

# Gabor wavelength span (px) per database.
WAVELENGTHS: dict[str, tuple[float, float]] = {
    "biosec": (16.0, 60.0),
    "casia": (16.0, 60.0),
    "iitd": (16.0, 60.0),
    "mobbio": (4.0, 16.0),
    "ubiris": (4.0, 16.0),
}


@dataclass(frozen=True)
class GridConfig:
    rows: int
    cols: int
    spacing: float
    center: tuple[float, float] = (0.0, 0.0)
    image_dims: tuple[int, int] | None = None  # (height, width)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.rows % 2 == 0 or self.cols % 2 == 0:
            raise ParameterError(f"grid rows and cols must be odd and positive, got {self.rows}x{self.cols}")
        if not self.spacing > 0:
            raise ParameterError(f"grid spacing must be positive, got {self.spacing}")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def points(self) -> np.ndarray:
        """``(rows*cols, 2)`` array of ``(x, y)`` positions, row-major."""
        r = (np.arange(self.rows) - (self.rows - 1) / 2) * self.spacing
        c = (np.arange(self.cols) - (self.cols - 1) / 2) * self.spacing
        yy, xx = np.meshgrid(r, c, indexing="ij")
        return np.stack([xx.ravel() + self.center[0], yy.ravel() + self.center[1]], axis=1)

    def in_bounds(self) -> np.ndarray:
        pts = np.rint(self.points())
        if self.image_dims is None:
            return np.ones(len(pts), dtype=bool)
        h, w = self.image_dims
        return (pts[:, 0] >= 0) & (pts[:, 0] < w) & (pts[:, 1] >= 0) & (pts[:, 1] < h)

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "spacing": self.spacing,
            "center": list(self.center),
            "image_dims": None if self.image_dims is None else list(self.image_dims),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "GridConfig":
        dims = record.get("image_dims")
        return cls(
            int(record["rows"]),
            int(record["cols"]),
            float(record["spacing"]),
            tuple(float(v) for v in record["center"]),
            None if dims is None else tuple(int(v) for v in dims),
        )


def build_grid(
    config: str | tuple[int, int, float],
    image_dims: tuple[int, int] | None,
    center: tuple[float, float],
    density: str = "dense",
) -> GridConfig:
    """Instantiate a grid about ``center`` from a table entry name or ``(rows, cols, spacing)``."""
    if isinstance(config, str):
        key = config.lower()
        if key not in GRID_TABLE:
            raise ParameterError(f"unknown grid config {config!r}; known: {sorted(GRID_TABLE)}")
        if density not in ("dense", "coarse"):
            raise ParameterError(f"density must be 'dense' or 'coarse', got {density!r}")
        rows, cols, spacing = GRID_TABLE[key][density]
    else:
        rows, cols, spacing = config
    return GridConfig(int(rows), int(cols), float(spacing), (float(center[0]), float(center[1])), image_dims)


def _half_peak_sigma(step: float) -> float:
    """Gaussian sigma for which neighbours ``step`` apart cross at half their peak."""
    return step / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class GaborBankSpec:
    wavelength_min: float = 4.0
    wavelength_max: float = 16.0
    num_frequencies: int = NUM_FREQUENCIES
    num_orientations: int = NUM_ORIENTATIONS
    amplitude: float = 1.0
    raster: int = REALIZATION_SIZE

    def __post_init__(self):
        if not 0 < self.wavelength_min < self.wavelength_max:
            raise ParameterError(
                f"need 0 < wavelength_min < wavelength_max, got {self.wavelength_min}, {self.wavelength_max}"
            )
        if self.wavelength_min < 2:
            raise ParameterError("wavelength_min below 2 px exceeds the Nyquist limit")
        if self.num_frequencies < 2 or self.num_orientations < 1:
            raise ParameterError("bank needs >= 2 frequencies and >= 1 orientation")

    @property
    def center_frequencies(self) -> np.ndarray:
        """Angular frequencies (rad/px), geometric from ``2pi/wavelength_max`` to ``2pi/wavelength_min``."""
        return np.geomspace(2 * math.pi / self.wavelength_max, 2 * math.pi / self.wavelength_min, self.num_frequencies)

    @property
    def orientations(self) -> np.ndarray:
        return np.arange(self.num_orientations) * math.pi / self.num_orientations

    @property
    def sigma_xi(self) -> float:
        step = math.log(self.wavelength_max / self.wavelength_min) / (self.num_frequencies - 1)
        return _half_peak_sigma(step)

    @property
    def sigma_phi(self) -> float:
        return _half_peak_sigma(math.pi / self.num_orientations)

    def response(self, k_freq: int, k_orient: int, wx, wy) -> np.ndarray:
        """Frequency response of channel ``(k_freq, k_orient)`` at angular frequencies ``(wx, wy)``."""
        wx = np.asarray(wx, dtype=np.float64)
        wy = np.asarray(wy, dtype=np.float64)
        rho = np.hypot(wx, wy)
        out = np.zeros(np.broadcast(wx, wy).shape)
        nz = rho > 0
        xi = np.log(rho[nz])
        xi0 = math.log(self.center_frequencies[k_freq])
        dphi = np.angle(np.exp(1j * (np.arctan2(wy, wx)[nz] - self.orientations[k_orient])))
        out[nz] = (
            self.amplitude
            * np.exp(-((xi - xi0) ** 2) / (2 * self.sigma_xi**2))
            * np.exp(-(dphi**2) / (2 * self.sigma_phi**2))
        )
        return out

    def to_dict(self) -> dict:
        return {
            "wavelength_min": self.wavelength_min,
            "wavelength_max": self.wavelength_max,
            "num_frequencies": self.num_frequencies,
            "num_orientations": self.num_orientations,
            "amplitude": self.amplitude,
            "raster": self.raster,
        }


@dataclass(frozen=True)
class GaborKernel:
    k_freq: int
    k_orient: int
    taps: np.ndarray  # complex, [y, x], odd square

    @property
    def radius(self) -> int:
        return self.taps.shape[0] // 2


def _crop_radius(energy: np.ndarray, fraction: float) -> int:
    n = energy.shape[0]
    c = n // 2
    total = energy.sum()
    # the largest odd square centred on index c of an even raster has radius c - 1
    for r in range(c):
        if energy[c - r : c + r + 1, c - r : c + r + 1].sum() >= fraction * total:
            return r
    return c - 1


def realize_kernel(spec: GaborBankSpec, k_freq: int, k_orient: int) -> GaborKernel:
    n = spec.raster
    w = 2 * math.pi * np.fft.fftfreq(n)
    wy, wx = np.meshgrid(w, w, indexing="ij")
    spatial = np.fft.fftshift(np.fft.ifft2(spec.response(k_freq, k_orient, wx, wy)))
    # ifft2 on an even raster puts the origin at index n // 2
    r = _crop_radius(np.abs(spatial) ** 2, ENERGY_FRACTION)
    c = n // 2
    taps = spatial[c - r : c + r + 1, c - r : c + r + 1]
    taps = taps - taps.mean()  # cropping leaks DC; remove it
    taps = np.array(taps, dtype=np.complex128)
    taps.setflags(write=False)
    return GaborKernel(k_freq, k_orient, taps)


@lru_cache(maxsize=16)
def build_gabor_bank(spec: GaborBankSpec) -> tuple[GaborKernel, ...]:
    """All ``num_frequencies * num_orientations`` kernels, frequency-major."""
    return tuple(
        realize_kernel(spec, kf, ko)
        for kf in range(spec.num_frequencies)
        for ko in range(spec.num_orientations)
    )


def bank_for(database: str) -> GaborBankSpec:
    key = database.lower()
    if key not in WAVELENGTHS:
        raise ParameterError(f"unknown database {database!r}")
    lo, hi = WAVELENGTHS[key]
    return GaborBankSpec(lo, hi)


@dataclass(frozen=True)
class PeriocularTemplate:
    grid: GridConfig
    values: np.ndarray  # (points, channels) complex
    mask: np.ndarray  # (points,) bool, False for out-of-image points
    magnitudes_pdf: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.magnitudes_pdf is None:
            object.__setattr__(self, "magnitudes_pdf", to_pdf(np.abs(self.values).ravel()))

    def to_dict(self) -> dict:
        return {
            "format": "symeye.periocular-template",
            "version": 1,
            "grid": self.grid.to_dict(),
            "channels": int(self.values.shape[1]),
            "mask": [bool(v) for v in self.mask],
            "pdf": [float(v) for v in self.magnitudes_pdf],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def from_dict(cls, record: dict) -> "PeriocularTemplate":
        if record.get("format") != "symeye.periocular-template" or record.get("version") != 1:
            raise DataError("not a version-1 periocular template record")
        grid = GridConfig.from_dict(record["grid"])
        pdf = np.asarray(record["pdf"], dtype=np.float64)
        channels = int(record["channels"])
        if pdf.size != grid.size * channels:
            raise DataError(f"pdf length {pdf.size} != {grid.size} points x {channels} channels")
        # magnitudes are all that survive serialisation
        values = pdf.reshape(grid.size, channels).astype(np.complex128)
        return cls(grid, values, np.asarray(record["mask"], dtype=bool), pdf)

    @classmethod
    def load(cls, path: str | Path) -> "PeriocularTemplate":
        return cls.from_dict(json.loads(Path(path).read_text()))


def to_pdf(vector: np.ndarray) -> np.ndarray:
    v = np.asarray(vector, dtype=np.float64)
    if np.any(v < 0):
        raise ParameterError("PDF input must be non-negative")
    total = float(v.sum())
    if not total > ZERO_TOTAL:
        raise ZeroVector("vector sums to zero; cannot normalise")
    return v / total


def extract_template(
    image: GrayImage | np.ndarray,
    grid: GridConfig,
    bank: tuple[GaborKernel, ...] | GaborBankSpec,
) -> PeriocularTemplate:
    """Gabor jets at every in-image grid point; out-of-image points keep zero responses."""
    if isinstance(bank, GaborBankSpec):
        bank = build_gabor_bank(bank)
    arr = as_array(image).astype(np.float64)
    h, w = arr.shape
    if grid.image_dims is not None and tuple(grid.image_dims) != (h, w):
        raise DataError(f"grid was built for {grid.image_dims}, image is {(h, w)}")
    grid = GridConfig(grid.rows, grid.cols, grid.spacing, grid.center, (h, w))
    inside = grid.in_bounds()
    if not inside.any():
        raise DataError("every grid point falls outside the image")
    pts = np.rint(grid.points()).astype(int)
    rmax = max(k.radius for k in bank)
    padded = np.pad(arr, rmax, mode="edge")
    values = np.zeros((grid.size, len(bank)), dtype=np.complex128)
    for k_idx, kernel in enumerate(bank):
        r = kernel.radius
        conj = np.conj(kernel.taps)
        for i in np.flatnonzero(inside):
            x, y = pts[i] + rmax
            patch = padded[y - r : y + r + 1, x - r : x + r + 1]
            values[i, k_idx] = np.sum(conj * patch)
    return PeriocularTemplate(grid, values, inside)


def chi2_distance(p, q) -> float:
    """``0.5 * sum((p - q)^2 / (p + q))``, with ``0/0`` terms dropped; lies in [0, 1] for PDFs."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ParameterError(f"length mismatch: {p.shape} vs {q.shape}")
    if not p.sum() > 0 or not q.sum() > 0:
        raise ZeroVector("chi-square input sums to zero")
    s = p + q
    nz = s > 0
    return float(0.5 * np.sum((p[nz] - q[nz]) ** 2 / s[nz]))


def match_templates(a: PeriocularTemplate, b: PeriocularTemplate) -> float:
    return chi2_distance(a.magnitudes_pdf, b.magnitudes_pdf)
