"""Batch runs: scenario-configured detection, periocular/iris matching, fusion and reporting."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError, SymeyeError
from .evalfusion import (
    DatasetManifest,
    ScoreSet,
    ND_THRESHOLDS,
    compute_eer,
    curve_value,
    fuse_mean,
    generate_protocol,
    genuine_stats,
    normalized_distance,
    tanh_normalize,
)
from .freqest import WidthCalibration, default_calibration, estimate_edge_width
from .imgcore import GrayImage, load_image
from .irismatch import EyeAnnotation, hamming_distance, iris_code
from .periocular import GRID_TABLE, WAVELENGTHS, GaborBankSpec, GridConfig, build_grid, chi2_distance, extract_template
from .preprocess import DEFAULT_L, DEFAULT_P, adaptive_length, adaptive_rank_filter, mean_sclera_radius, rank_filter_1d, resize_to_sclera
from .symmetry import DEFAULT_ANGLE_THRESHOLD, DEFAULT_COVERAGE, FIXED_SIGMA1, DetectionResult, detect_eye

log = logging.getLogger(__name__)

MATCHERS = ("periocular", "iris")
REPORT_VERSION = 1


@dataclass(frozen=True)
class Scenario:
    number: int
    rank_filter: bool
    adaptive: bool


SCENARIOS = {
    1: Scenario(1, rank_filter=False, adaptive=False),
    2: Scenario(2, rank_filter=True, adaptive=False),
    3: Scenario(3, rank_filter=False, adaptive=True),
    4: Scenario(4, rank_filter=True, adaptive=True),
}


@dataclass(frozen=True)
class ScenarioDetection:
    result: DetectionResult
    edge_width: float | None
    rank_length: int | None


def scenario_detect(
    image: GrayImage,
    scenario: int,
    calibration: WidthCalibration | None = None,
    angle_threshold: float = DEFAULT_ANGLE_THRESHOLD,
    coverage: float = DEFAULT_COVERAGE,
) -> ScenarioDetection:
    """Detect the eye with one of the four preprocessing set-ups.

    1: no rank filter, sigma1 = 7/6.  2: rank filter L=7, p=2, sigma1 = 7/6.
    3: no rank filter, sigma1 = T'/6.  4: rank filter with L from T', sigma1 = T'/6.
    """
    if scenario not in SCENARIOS:
        raise ParameterError(f"scenario must be 1..4, got {scenario}")
    sc = SCENARIOS[scenario]
    width = None
    length = None
    sigma1 = FIXED_SIGMA1
    if sc.adaptive:
        width = estimate_edge_width(image, calibration or default_calibration())
        sigma1 = width / 6.0
    work = image
    if sc.rank_filter:
        if sc.adaptive:
            work = adaptive_rank_filter(image, width)
            length = adaptive_length(width)
        else:
            work = rank_filter_1d(image, DEFAULT_L, DEFAULT_P)
            length = DEFAULT_L
    result = detect_eye(work, sigma1=sigma1, angle_threshold=angle_threshold, coverage=coverage)
    return ScenarioDetection(result, width, length)


@dataclass(frozen=True)
class PipelineConfig:
    scenario: int = 4
    density: str = "dense"
    grid: tuple[int, int, float] | None = None  # explicit (rows, cols, spacing) overrides grid_config
    grid_config: str = "mobbio"
    wavelengths: tuple[float, float] | None = None
    centers: str = "manual"
    resize: bool = False
    matchers: tuple[str, ...] = MATCHERS
    angle_threshold: float = DEFAULT_ANGLE_THRESHOLD
    coverage: float = DEFAULT_COVERAGE
    workers: int | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"scenario must be 1..4, got {self.scenario}")
        if self.density not in ("dense", "coarse"):
            raise ParameterError(f"density must be dense or coarse, got {self.density!r}")
        if self.centers not in ("manual", "auto"):
            raise ParameterError(f"centers must be manual or auto, got {self.centers!r}")
        unknown = set(self.matchers) - set(MATCHERS)
        if unknown or not self.matchers:
            raise ParameterError(f"matchers must be a non-empty subset of {MATCHERS}")
        rows, cols, spacing = self.grid_spec()
        GridConfig(int(rows), int(cols), float(spacing))
        self.bank_spec()

    def grid_spec(self) -> tuple[int, int, float]:
        if self.grid is not None:
            return self.grid
        key = self.grid_config.lower()
        if key not in GRID_TABLE:
            raise ParameterError(f"unknown grid config {self.grid_config!r}")
        return GRID_TABLE[key][self.density]

    def bank_spec(self) -> GaborBankSpec:
        lo, hi = self.wavelengths or WAVELENGTHS.get(self.grid_config.lower(), (4.0, 16.0))
        return GaborBankSpec(float(lo), float(hi))


CONFIG_KEYS = (
    "scenario", "density", "grid", "grid_config", "wavelengths", "centers",
    "resize", "matchers", "angle_threshold", "coverage", "workers",
)


def resolve_config(*layers: dict) -> PipelineConfig:
    """Merge settings layers, lowest precedence first; ``None`` values do not override.

    ``grid`` may be a ``(rows, cols, spacing)`` triple or a mapping from
    density to triple.  A layer naming ``grid_config`` without ``grid``
    discards any explicit grid from the layers below it.
    """
    merged: dict = {}
    for layer in layers:
        items = {k: v for k, v in (layer or {}).items() if v is not None}
        unknown = set(items) - set(CONFIG_KEYS)
        if unknown:
            raise ParameterError(f"unknown configuration keys: {sorted(unknown)}")
        if "grid_config" in items and "grid" not in items:
            merged.pop("grid", None)
        merged.update(items)
    grid = merged.get("grid")
    if isinstance(grid, dict):
        density = merged.get("density", "dense")
        grid = grid.get(density)
    if grid is not None:
        if len(grid) != 3:
            raise ParameterError(f"grid must be [rows, cols, spacing], got {grid!r}")
        merged["grid"] = (int(grid[0]), int(grid[1]), float(grid[2]))
    else:
        merged.pop("grid", None)
    for key in ("wavelengths", "matchers"):
        if key in merged:
            merged[key] = tuple(merged[key])
    return PipelineConfig(**merged)


@dataclass
class ImageOutcome:
    path: str
    detection: DetectionResult | None = None
    edge_width: float | None = None
    template_pdf: np.ndarray | None = None
    code: object | None = None
    error: str | None = None


def process_image(
    image: GrayImage,
    annotation: EyeAnnotation,
    config: PipelineConfig,
    calibration: WidthCalibration | None,
    path: str = "",
) -> ImageOutcome:
    """Detection, periocular template and iris code for one image; failures are captured, not raised."""
    out = ImageOutcome(path)
    try:
        det = scenario_detect(image, config.scenario, calibration, config.angle_threshold, config.coverage)
        out.detection = det.result
        out.edge_width = det.edge_width
    except SymeyeError as exc:
        out.error = f"detection: {exc}"
        if config.centers == "auto":
            return out
    try:
        if "periocular" in config.matchers:
            if config.centers == "manual":
                center = (annotation.pupil.cx, annotation.pupil.cy)
            else:
                center = out.detection.center
            grid = build_grid(config.grid_spec(), image.shape, center)
            out.template_pdf = extract_template(image, grid, config.bank_spec()).magnitudes_pdf
        if "iris" in config.matchers:
            out.code = iris_code(image, annotation)
    except SymeyeError as exc:
        out.error = f"features: {exc}"
        out.template_pdf = None
        out.code = None
    return out


def _load_and_process(args) -> ImageOutcome:
    path, full_path, annotation, config, calibration, target_radius = args
    try:
        image = load_image(full_path)
    except (OSError, SymeyeError) as exc:
        return ImageOutcome(path, error=f"load: {exc}")
    if target_radius is not None:
        image, annotation = resize_to_sclera(image, annotation, target_radius)
    return process_image(image, annotation, config, calibration, path)


@dataclass
class EvalReport:
    config: dict
    images: int
    failures: int
    nd_pupil: list[float]
    nd_sclera: list[float]
    pupil_curve: list[tuple[float, float]]
    sclera_curve: list[tuple[float, float]]
    eer: dict[str, float]
    score_rows: list[dict] = field(default_factory=list)
    failed_images: list[str] = field(default_factory=list)

    @property
    def failure_rate(self) -> float:
        return self.failures / self.images if self.images else 1.0

    def summary(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "config": self.config,
            "images": self.images,
            "failures": self.failures,
            "failed_images": self.failed_images,
            "detection": {
                "pupil_accuracy_nd0.4": curve_value(self.pupil_curve, 0.4),
                "pupil_accuracy_nd1.0": curve_value(self.pupil_curve, 1.0),
                "sclera_accuracy_nd0.4": curve_value(self.sclera_curve, 0.4),
                "sclera_accuracy_nd1.0": curve_value(self.sclera_curve, 1.0),
            },
            "eer": self.eer,
            "comparisons": {
                "genuine": sum(1 for r in self.score_rows if r["label"] == "genuine"),
                "impostor": sum(1 for r in self.score_rows if r["label"] == "impostor"),
            },
        }

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "detection_curve.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["nd_threshold", "pupil_accuracy", "sclera_accuracy"])
            for (t, p), (_, s) in zip(self.pupil_curve, self.sclera_curve):
                w.writerow([f"{t:.2f}", repr(p), repr(s)])
        columns = ["enrol", "query", "label", *self.config["matchers"]]
        if "fused" in self.eer:
            columns.append("fused")
        with (out / "scores.csv").open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
            w.writeheader()
            for row in self.score_rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        with (out / "eer.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["matcher", "eer"])
            for name, value in self.eer.items():
                w.writerow([name, repr(value)])
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def _score_pairs(manifest: DatasetManifest, outcomes: dict[str, ImageOutcome], config: PipelineConfig):
    rows = []
    for pair in generate_protocol(manifest):
        a, b = outcomes[pair.enrol], outcomes[pair.query]
        row = {"enrol": pair.enrol, "query": pair.query, "label": "genuine" if pair.genuine else "impostor"}
        ok = True
        for matcher in config.matchers:
            if matcher == "periocular":
                if a.template_pdf is None or b.template_pdf is None:
                    ok = False
                    break
                row[matcher] = chi2_distance(a.template_pdf, b.template_pdf)
            else:
                if a.code is None or b.code is None:
                    ok = False
                    break
                try:
                    row[matcher] = hamming_distance(a.code, b.code)
                except SymeyeError:
                    ok = False
                    break
        if ok:
            rows.append(row)
    return rows


def fuse_rows(rows: list[dict], matchers: tuple[str, ...]) -> None:
    """Add a ``fused`` similarity to each row: tanh-normalised per matcher, then averaged."""
    norm = {}
    for m in matchers:
        mu, sd = genuine_stats([r[m] for r in rows if r["label"] == "genuine"])
        norm[m] = (mu, sd)
    for r in rows:
        r["fused"] = fuse_mean(tanh_normalize(r[m], *norm[m], polarity="distance") for m in matchers)


def run_pipeline(
    manifest: DatasetManifest,
    config: PipelineConfig,
    calibration: WidthCalibration | None = None,
) -> EvalReport:
    if SCENARIOS[config.scenario].adaptive and calibration is None:
        calibration = default_calibration()
    target = mean_sclera_radius(r.annotation for r in manifest.records) if config.resize else None
    jobs = [
        (r.path, str(manifest.resolve(r)), r.annotation, config, calibration, target)
        for r in manifest.records
    ]
    workers = config.workers if config.workers is not None else (os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_load_and_process, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_load_and_process(j) for j in jobs]
    outcomes = {o.path: o for o in results}

    scale = {r.path: (target / r.annotation.sclera.r if target else 1.0) for r in manifest.records}
    nd_p, nd_s, failed = [], [], []
    for rec in manifest.records:
        o = outcomes[rec.path]
        ann = rec.annotation.scaled(scale[rec.path]) if target else rec.annotation
        if o.detection is None:
            nd_p.append(float("inf"))
            nd_s.append(float("inf"))
        else:
            nd_p.append(normalized_distance(o.detection.center, ann.pupil))
            nd_s.append(normalized_distance(o.detection.center, ann.sclera))
        if o.error:
            failed.append(f"{rec.path}: {o.error}")
            log.warning("%s: %s", rec.path, o.error)
    failures = sum(
        1
        for o in results
        if o.error and (o.error.startswith(("load", "features")) or config.centers == "auto")
    )

    pupil_curve = _curve_from_nd(nd_p)
    sclera_curve = _curve_from_nd(nd_s)

    rows = _score_pairs(manifest, outcomes, config)
    eer: dict[str, float] = {}
    for m in config.matchers:
        g = [r[m] for r in rows if r["label"] == "genuine"]
        i = [r[m] for r in rows if r["label"] == "impostor"]
        if g and i:
            eer[m] = compute_eer(ScoreSet(g, i, "distance"))
    if len(config.matchers) > 1 and rows and len(eer) == len(config.matchers):
        fuse_rows(rows, config.matchers)
        g = [r["fused"] for r in rows if r["label"] == "genuine"]
        i = [r["fused"] for r in rows if r["label"] == "impostor"]
        eer["fused"] = compute_eer(ScoreSet(g, i, "similarity"))

    cfg = {
        "scenario": config.scenario,
        "density": config.density,
        "grid": list(config.grid_spec()),
        "wavelengths": [config.bank_spec().wavelength_min, config.bank_spec().wavelength_max],
        "centers": config.centers,
        "resize": config.resize,
        "matchers": list(config.matchers),
        "angle_threshold": config.angle_threshold,
        "coverage": config.coverage,
    }
    return EvalReport(cfg, len(results), failures, nd_p, nd_s, pupil_curve, sclera_curve, eer, rows, failed)


def _curve_from_nd(nd: list[float]) -> list[tuple[float, float]]:
    # failed detections carry nd = inf and count as misses
    arr = np.asarray(nd, dtype=np.float64)
    return [(float(t), float(np.count_nonzero(arr <= t)) / arr.size) for t in ND_THRESHOLDS]
