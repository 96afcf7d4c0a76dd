"""Command line front end: ``symeye {calibrate,detect,extract,match,eval,synth}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import SymeyeError
from .evalfusion import load_manifest
from .freqest import WidthCalibration, calibrate_width_polynomial, default_calibration
from .imgcore import load_image
from .irismatch import IrisCode, hamming_distance
from .periocular import GRID_TABLE, PeriocularTemplate, build_grid, extract_template, match_templates
from .pipeline import CONFIG_KEYS, PipelineConfig, resolve_config, run_pipeline, scenario_detect
from .symmetry import DEFAULT_ANGLE_THRESHOLD, DEFAULT_COVERAGE

log = logging.getLogger("symeye")

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_ERROR = 2
FAILURE_LIMIT = 0.5


def _parse_widths(text: str) -> list[float]:
    """``2..22`` or ``2,4,8``."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return [float(t) for t in range(int(lo), int(hi) + 1)]
    return [float(t) for t in text.split(",") if t.strip()]


def _load_calibration(path: str | None) -> WidthCalibration:
    return WidthCalibration.load(path) if path else default_calibration()


def _add_detector_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", type=int, choices=(1, 2, 3, 4), help="preprocessing scenario (default 4)")
    p.add_argument("--angle-threshold", type=float, help=f"max |arg I20| in radians (default {DEFAULT_ANGLE_THRESHOLD:.4f})")
    p.add_argument("--coverage", type=float, help=f"I20 filter coverage of the shortest side (default {DEFAULT_COVERAGE})")
    p.add_argument("--calibration", help="width calibration JSON from 'symeye calibrate'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symeye", description=__doc__)
    parser.add_argument("--version", action="version", version=f"symeye {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit the edge-width polynomial on synthetic edges")
    p.add_argument("--widths", default="2..22", help="edge widths, '2..22' or comma list (default 2..22)")
    p.add_argument("--out", required=True, help="output JSON path")

    p = sub.add_parser("detect", help="locate the eye centre in images")
    p.add_argument("images", nargs="+")
    _add_detector_flags(p)

    p = sub.add_parser("extract", help="periocular template around a centre")
    p.add_argument("image")
    p.add_argument("--center", type=float, nargs=2, metavar=("X", "Y"), help="grid centre; detected when omitted")
    p.add_argument("--grid", choices=("dense", "coarse"), default="dense")
    p.add_argument("--grid-config", default="mobbio", help=f"one of {sorted(GRID_TABLE)} (default mobbio)")
    p.add_argument("--grid-shape", type=float, nargs=3, metavar=("ROWS", "COLS", "SPACING"), help="explicit grid")
    _add_detector_flags(p)
    p.add_argument("--out", required=True, help="output template JSON")

    p = sub.add_parser("match", help="compare two periocular templates or two iris codes")
    p.add_argument("a")
    p.add_argument("b")

    p = sub.add_parser("eval", help="run the full pipeline over an annotated manifest")
    p.add_argument("manifest")
    _add_detector_flags(p)
    p.add_argument("--grid", choices=("dense", "coarse"), help="grid density (default dense)")
    p.add_argument("--grid-config", help=f"grid table entry, one of {sorted(GRID_TABLE)}")
    p.add_argument("--resize-sclera", action=argparse.BooleanOptionalAction, default=None,
                   help="rescale every image to the mean sclera radius")
    p.add_argument("--centers", choices=("manual", "auto"), help="annotated or detected grid centres (default manual)")
    p.add_argument("--matchers", help="comma list from periocular,iris (default both)")
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--config", help="JSON settings file; flags take precedence over it")
    p.add_argument("--out", required=True, help="report directory")

    p = sub.add_parser("synth", help="write a synthetic annotated corpus")
    p.add_argument("out")
    p.add_argument("--identities", type=int, default=10)
    p.add_argument("--samples", type=int, default=4, help="images per identity and session")
    p.add_argument("--sessions", type=int, choices=(1, 2), default=1)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--edge-width", type=float, default=8.0)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--lashes", type=int, default=0, help="dark strokes per image")
    return parser


def _detector_kwargs(args) -> dict:
    return {
        "angle_threshold": DEFAULT_ANGLE_THRESHOLD if args.angle_threshold is None else args.angle_threshold,
        "coverage": DEFAULT_COVERAGE if args.coverage is None else args.coverage,
    }


def cmd_calibrate(args) -> int:
    cal = calibrate_width_polynomial(_parse_widths(args.widths))
    cal.save(args.out)
    print(json.dumps({"a": cal.a, "b": cal.b, "c": cal.c}))
    return EXIT_OK


def cmd_detect(args) -> int:
    cal = _load_calibration(args.calibration)
    scenario = args.scenario or 4
    failed = 0
    for path in args.images:
        try:
            det = scenario_detect(load_image(path), scenario, cal, **_detector_kwargs(args))
        except (OSError, SymeyeError) as exc:
            log.error("%s: %s", path, exc)
            failed += 1
            continue
        r = det.result
        print(json.dumps({
            "image": path,
            "x": r.center[0],
            "y": r.center[1],
            "magnitude": r.magnitude,
            "argument": r.argument,
            "sigma1": r.sigma1,
            "sigma2": r.sigma2,
            "edge_width": det.edge_width,
        }))
    return EXIT_FAILURES if failed > FAILURE_LIMIT * len(args.images) else EXIT_OK


def cmd_extract(args) -> int:
    image = load_image(args.image)
    if args.center is not None:
        center = tuple(args.center)
    else:
        det = scenario_detect(image, args.scenario or 4, _load_calibration(args.calibration), **_detector_kwargs(args))
        center = det.result.center
    cfg = PipelineConfig(density=args.grid, grid_config=args.grid_config,
                         grid=tuple(args.grid_shape) if args.grid_shape else None)
    rows, cols, spacing = cfg.grid_spec()
    grid = build_grid((int(rows), int(cols), spacing), image.shape, center)
    template = extract_template(image, grid, cfg.bank_spec())
    template.save(args.out)
    return EXIT_OK


def _load_record(path: str):
    record = json.loads(Path(path).read_text())
    fmt = record.get("format")
    if fmt == "symeye.periocular-template":
        return PeriocularTemplate.from_dict(record)
    if fmt == "symeye.iriscode":
        return IrisCode.from_dict(record)
    raise SymeyeError(f"{path}: unrecognised record format {fmt!r}")


def cmd_match(args) -> int:
    a, b = _load_record(args.a), _load_record(args.b)
    if type(a) is not type(b):
        raise SymeyeError("cannot compare a periocular template with an iris code")
    if isinstance(a, PeriocularTemplate):
        print(json.dumps({"matcher": "periocular", "chi2": match_templates(a, b)}))
    else:
        print(json.dumps({"matcher": "iris", "hamming": hamming_distance(a, b)}))
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    file_layer = json.loads(Path(args.config).read_text()) if args.config else {}
    tag_layer = {k: v for k, v in manifest.tags.items() if k in CONFIG_KEYS}
    flag_layer = {
        "scenario": args.scenario,
        "density": args.grid,
        "grid_config": args.grid_config,
        "resize": args.resize_sclera,
        "centers": args.centers,
        "matchers": tuple(m.strip() for m in args.matchers.split(",")) if args.matchers else None,
        "angle_threshold": args.angle_threshold,
        "coverage": args.coverage,
        "workers": args.workers,
    }
    config = resolve_config(tag_layer, file_layer, flag_layer)
    calibration = WidthCalibration.load(args.calibration) if args.calibration else None
    report = run_pipeline(manifest, config, calibration)
    report.write(args.out)
    print(json.dumps(report.summary(), sort_keys=True))
    if report.failure_rate > FAILURE_LIMIT:
        log.error("%d of %d images failed", report.failures, report.images)
        return EXIT_FAILURES
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthbench import emit_corpus

    path = emit_corpus(
        args.out,
        identities=args.identities,
        samples=args.samples,
        sessions=args.sessions,
        dims=(args.height, args.width),
        seed=args.seed,
        edge_T=args.edge_width,
        noise_sigma=args.noise,
        lashes=args.lashes,
    )
    print(path)
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "detect": cmd_detect,
    "extract": cmd_extract,
    "match": cmd_match,
    "eval": cmd_eval,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SymeyeError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
