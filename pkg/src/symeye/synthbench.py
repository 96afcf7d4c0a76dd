"""Ground-truthed synthetic imagery: sinusoids, Gaussian-CDF edges and eyes.

Every generator is a pure function of its arguments (and seed), and returns
intensities in [0, 1].  Eye images come with their exact annotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .errors import ParameterError
from .imgcore import GrayImage, save_image
from .irismatch import Circle, EyeAnnotation

PUPIL_LEVEL = 0.12
IRIS_LEVEL = 0.42
SCLERA_LEVEL = 0.82
TEXTURE_AMPLITUDE = 0.02
TEXTURE_COMPONENTS = 8
DEFAULT_TEXTURE_WAVELENGTHS = (4.0, 16.0)


def _grid(dims: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    height, width = dims
    if height < 1 or width < 1:
        raise ParameterError(f"dims must be positive, got {dims}")
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    return x, y


def gen_sinusoid(dims: tuple[int, int], omega: float, orientation: float = 0.0) -> GrayImage:
    """``0.5 + 0.4 cos(omega (x cos t + y sin t))`` on a ``(height, width)`` raster."""
    if not 0 < omega < math.pi:
        raise ParameterError(f"omega must lie in (0, pi), got {omega}")
    x, y = _grid(dims)
    u = x * math.cos(orientation) + y * math.sin(orientation)
    return GrayImage(0.5 + 0.4 * np.cos(omega * u))


def cdf_profile(distance: np.ndarray, width: float) -> np.ndarray:
    """Gaussian CDF with ``sigma = width / 6``: 0.5 at distance 0, ~0.9987 at ``width/2``."""
    return ndtr(np.asarray(distance, dtype=np.float64) / (width / 6.0))


def gen_cdf_edge(dims: tuple[int, int], T: float, orientation: float = 0.0) -> GrayImage:
    """Straight edge through the image centre whose profile is a Gaussian CDF of width ``T``.

    ``orientation`` is the direction of increasing intensity (0: dark left,
    bright right).  The centre is the pixel ``(width // 2, height // 2)``.
    """
    if not 2 <= T <= 30:
        raise ParameterError(f"edge width T must lie in [2, 30], got {T}")
    x, y = _grid(dims)
    cy, cx = dims[0] // 2, dims[1] // 2
    u = (x - cx) * math.cos(orientation) + (y - cy) * math.sin(orientation)
    return GrayImage(cdf_profile(u, T))


def iris_texture(
    dims: tuple[int, int],
    seed: int,
    wavelengths: tuple[float, float] = DEFAULT_TEXTURE_WAVELENGTHS,
    components: int = TEXTURE_COMPONENTS,
    origin: tuple[float, float] | None = None,
) -> np.ndarray:
    """Zero-mean sum of random-phase plane waves with wavelengths drawn log-uniformly in range.

    Phases refer to ``origin`` (default: the raster centre), so the pattern
    moves with whatever it is anchored to.  Normalised to unit RMS over the raster.
    """
    lo, hi = wavelengths
    if not 0 < lo < hi:
        raise ParameterError(f"invalid texture wavelength range {wavelengths}")
    rng = np.random.default_rng(seed)
    x, y = _grid(dims)
    if origin is not None:
        x = x - (origin[0] - (dims[1] - 1) / 2)
        y = y - (origin[1] - (dims[0] - 1) / 2)
    out = np.zeros(dims)
    lam = np.exp(rng.uniform(math.log(lo), math.log(hi), components))
    theta = rng.uniform(0.0, math.pi, components)
    phase = rng.uniform(0.0, 2 * math.pi, components)
    for k in range(components):
        omega = 2 * math.pi / lam[k]
        out += np.cos(omega * (x * math.cos(theta[k]) + y * math.sin(theta[k])) + phase[k])
    rms = math.sqrt(float(np.mean(out**2)))
    return out / rms if rms > 0 else out


def gen_synthetic_eye(
    dims: tuple[int, int],
    pupil: Circle,
    sclera: Circle,
    edge_T: float = 8.0,
    texture_seed: int = 0,
    noise_sigma: float = 0.0,
    noise_seed: int | None = None,
    texture_wavelengths: tuple[float, float] = DEFAULT_TEXTURE_WAVELENGTHS,
    texture_amplitude: float = TEXTURE_AMPLITUDE,
    eyelids: dict[str, Circle] | None = None,
) -> tuple[GrayImage, EyeAnnotation]:
    """Dark pupil, textured iris annulus and bright sclera with CDF-smoothed boundaries.

    Occluding eyelid discs, when given, are painted at sclera level.
    """
    annotation = EyeAnnotation(pupil=pupil, sclera=sclera, eyelids=dict(eyelids or {}))
    if not 2 <= edge_T <= 30:
        raise ParameterError(f"edge_T must lie in [2, 30], got {edge_T}")
    x, y = _grid(dims)
    d_pupil = np.hypot(x - pupil.cx, y - pupil.cy)
    d_sclera = np.hypot(x - sclera.cx, y - sclera.cy)
    in_pupil = cdf_profile(pupil.r - d_pupil, edge_T)
    in_iris = cdf_profile(sclera.r - d_sclera, edge_T)
    texture = texture_amplitude * iris_texture(dims, texture_seed, texture_wavelengths, origin=(sclera.cx, sclera.cy))
    iris = IRIS_LEVEL + texture
    img = SCLERA_LEVEL * (1.0 - in_iris) + in_iris * ((1.0 - in_pupil) * iris + in_pupil * PUPIL_LEVEL)
    for lid in annotation.eyelids.values():
        cover = cdf_profile(lid.r - np.hypot(x - lid.cx, y - lid.cy), edge_T)
        img = img * (1.0 - cover) + SCLERA_LEVEL * cover
    if noise_sigma > 0:
        rng = np.random.default_rng(texture_seed if noise_seed is None else noise_seed)
        img = img + rng.normal(0.0, noise_sigma, size=img.shape)
    return GrayImage(np.clip(img, 0.0, 1.0)), annotation


def add_lashes(
    image: GrayImage,
    annotation: EyeAnnotation,
    count: int = 20,
    seed: int = 0,
    level: float = 0.05,
    width: float = 1.0,
) -> GrayImage:
    """Overlay thin dark near-vertical strokes hanging over the upper half of the eye.

    Strokes start above the sclera circle and reach down into the iris, so
    they cross the boundaries the detector relies on.
    """
    rng = np.random.default_rng(seed)
    h, w = image.shape
    x, y = _grid((h, w))
    img = np.array(image.data)
    s = annotation.sclera
    for _ in range(count):
        x0 = s.cx + rng.uniform(-1.1, 1.1) * s.r
        y0 = s.cy - rng.uniform(0.9, 1.3) * s.r
        length = rng.uniform(0.6, 1.2) * s.r
        tilt = rng.uniform(-0.35, 0.35)
        dx, dy = math.sin(tilt), math.cos(tilt)
        # distance to the segment from (x0, y0) along (dx, dy)
        t = np.clip((x - x0) * dx + (y - y0) * dy, 0.0, length)
        dist = np.hypot(x - (x0 + t * dx), y - (y0 + t * dy))
        ink = np.clip(1.0 - dist / width, 0.0, 1.0) if width > 0 else (dist < 0.5).astype(float)
        img = img * (1.0 - ink) + level * ink
    return GrayImage(np.clip(img, 0.0, 1.0))


@dataclass(frozen=True)
class SyntheticIdentity:
    """Per-identity geometry and texture seed."""

    identity: str
    pupil_r: float
    sclera_r: float
    texture_seed: int


def random_identity(rng: np.random.Generator, index: int, dims: tuple[int, int]) -> SyntheticIdentity:
    short = min(dims)
    sclera_r = rng.uniform(0.22, 0.32) * short
    pupil_r = rng.uniform(0.3, 0.45) * sclera_r
    return SyntheticIdentity(f"id{index:03d}", pupil_r, sclera_r, int(rng.integers(0, 2**31 - 1)))


def sample_eye(
    ident: SyntheticIdentity,
    dims: tuple[int, int],
    rng: np.random.Generator,
    edge_T: float = 8.0,
    noise_sigma: float = 0.02,
    jitter: float = 2.0,
    texture_wavelengths: tuple[float, float] = DEFAULT_TEXTURE_WAVELENGTHS,
) -> tuple[GrayImage, EyeAnnotation]:
    """One perturbed capture of an identity: small translation, pupil dilation and sensor noise."""
    h, w = dims
    cx = w / 2 + rng.uniform(-jitter, jitter)
    cy = h / 2 + rng.uniform(-jitter, jitter)
    pupil_r = ident.pupil_r * rng.uniform(0.95, 1.05)
    off = rng.uniform(-0.05, 0.05, 2) * pupil_r
    pupil = Circle(cx + off[0], cy + off[1], pupil_r)
    sclera = Circle(cx, cy, ident.sclera_r)
    return gen_synthetic_eye(
        dims,
        pupil,
        sclera,
        edge_T=edge_T,
        texture_seed=ident.texture_seed,
        noise_sigma=noise_sigma,
        noise_seed=int(rng.integers(0, 2**31 - 1)),
        texture_wavelengths=texture_wavelengths,
    )


def corpus_grid(dims: tuple[int, int]) -> dict[str, list]:
    """Grid shapes sized for a synthetic raster; the coarse grid doubles the spacing with fewer points."""
    spacing = max(4, round(min(dims) / 10))
    return {"dense": [7, 9, spacing], "coarse": [5, 5, 2 * spacing]}


def emit_corpus(
    out_dir: str | Path,
    identities: int = 10,
    samples: int = 4,
    sessions: int = 1,
    dims: tuple[int, int] = (128, 160),
    seed: int = 0,
    edge_T: float = 8.0,
    noise_sigma: float = 0.02,
    lashes: int = 0,
) -> Path:
    """Write PNG images plus a ``manifest.jsonl`` describing them; returns the manifest path.

    With ``sessions == 2``, ``samples`` images are written per session.
    """
    from .evalfusion import DatasetManifest, ImageRecord, write_manifest

    if sessions not in (1, 2):
        raise ParameterError(f"sessions must be 1 or 2, got {sessions}")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    for i in range(identities):
        ident = random_identity(rng, i, dims)
        for session in range(1, sessions + 1):
            for k in range(samples):
                img, ann = sample_eye(ident, dims, rng, edge_T=edge_T, noise_sigma=noise_sigma)
                if lashes:
                    img = add_lashes(img, ann, count=lashes, seed=int(rng.integers(0, 2**31 - 1)))
                rel = f"images/{ident.identity}_s{session}_{k}.png"
                save_image(out / rel, img)
                records.append(ImageRecord(rel, ident.identity, session, ann))
    manifest = DatasetManifest(
        records=tuple(records),
        tags={
            "source": "synthbench",
            "seed": seed,
            "dims": list(dims),
            "wavelengths": list(DEFAULT_TEXTURE_WAVELENGTHS),
            "grid": corpus_grid(dims),
        },
        root=out,
    )
    path = out / "manifest.jsonl"
    write_manifest(manifest, path)
    return path

