"""Verification protocol, score normalisation and fusion, and detection/verification metrics."""

from __future__ import annotations

import json
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ManifestError, ParameterError
from .irismatch import Circle, EyeAnnotation

TANH_SCALE = 0.01
# nd thresholds 0.00, 0.05, ..., 2.00; k / 20 keeps 0.4 and 1.0 exact.
ND_THRESHOLDS = tuple(k / 20 for k in range(41))


# --------------------------------------------------------------------------
# Manifests


@dataclass(frozen=True)
class ImageRecord:
    path: str
    identity: str
    session: int
    annotation: EyeAnnotation

    def to_dict(self) -> dict:
        ann = self.annotation
        rec = {
            "image": self.path,
            "identity": self.identity,
            "session": self.session,
            "pupil": ann.pupil.as_list(),
            "sclera": ann.sclera.as_list(),
        }
        if ann.eyelids:
            rec["eyelids"] = {k: c.as_list() for k, c in sorted(ann.eyelids.items())}
        return rec


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ImageRecord, ...]
    tags: dict = field(default_factory=dict)
    root: Path | None = None

    def identities(self) -> "OrderedDict[str, list[ImageRecord]]":
        """Records grouped by identity, both in first-appearance order."""
        groups: OrderedDict[str, list[ImageRecord]] = OrderedDict()
        for rec in self.records:
            groups.setdefault(rec.identity, []).append(rec)
        return groups

    @property
    def two_sessions(self) -> bool:
        return any(r.session == 2 for r in self.records)

    def resolve(self, rec: ImageRecord) -> Path:
        p = Path(rec.path)
        return p if p.is_absolute() or self.root is None else self.root / p


def _circle(value, what: str, line: int) -> Circle:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ManifestError(f"{what} must be [cx, cy, r], got {value!r}", line)
    try:
        cx, cy, r = (float(v) for v in value)
        return Circle(cx, cy, r)
    except (TypeError, ValueError, DataError) as exc:
        raise ManifestError(f"malformed {what} circle {value!r}: {exc}", line) from None


def parse_record(obj: dict, line: int) -> ImageRecord:
    if not isinstance(obj, dict):
        raise ManifestError("record must be a JSON object", line)
    for key in ("image", "identity"):
        if key not in obj:
            raise ManifestError(f"missing {key!r}", line)
    session = obj.get("session", 1)
    if session not in (1, 2):
        raise ManifestError(f"session must be 1 or 2, got {session!r}", line)
    pupil = _circle(obj["pupil"], "pupil", line)
    sclera = _circle(obj["sclera"], "sclera", line)
    lids_raw = obj.get("eyelids") or {}
    if not isinstance(lids_raw, dict):
        raise ManifestError("eyelids must be an object with optional 'upper'/'lower'", line)
    lids = {k: _circle(v, f"{k} eyelid", line) for k, v in lids_raw.items() if v is not None}
    try:
        ann = EyeAnnotation(pupil, sclera, lids)
    except DataError as exc:
        raise ManifestError(str(exc), line) from None
    return ImageRecord(str(obj["image"]), str(obj["identity"]), int(session), ann)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a JSON-lines manifest: an optional ``{"dataset": {...}}`` header, then one record per image."""
    path = Path(path)
    records: list[ImageRecord] = []
    tags: dict = {}
    unannotated: list[str] = []
    seen: set[str] = set()
    with path.open() as fh:
        for line_no, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", line_no) from None
            if isinstance(obj, dict) and "dataset" in obj and "image" not in obj:
                tags = dict(obj["dataset"])
                continue
            if isinstance(obj, dict) and "image" in obj and ("pupil" not in obj or "sclera" not in obj):
                unannotated.append(f"{obj['image']} (line {line_no})")
                continue
            rec = parse_record(obj, line_no)
            if rec.path in seen:
                raise ManifestError(f"duplicate image {rec.path!r}", line_no)
            seen.add(rec.path)
            records.append(rec)
    if unannotated:
        raise ManifestError("images without pupil/sclera annotation: " + ", ".join(unannotated))
    return DatasetManifest(tuple(records), tags, path.parent)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    lines = []
    if manifest.tags:
        lines.append(json.dumps({"dataset": manifest.tags}, sort_keys=True))
    lines.extend(json.dumps(r.to_dict(), sort_keys=True) for r in manifest.records)
    Path(path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# Protocol


@dataclass(frozen=True)
class Pair:
    enrol: str
    query: str
    genuine: bool


def generate_protocol(manifest: DatasetManifest) -> list[Pair]:
    """Genuine and impostor comparisons in a deterministic order.

    Genuine: with two sessions, every session-1 image against every
    session-2 image of the same eye; otherwise every unordered pair of an
    eye's images.  Impostor: the first (session-1) image of each eye
    against the query image of every other eye, where the query image is
    the first session-2 image with two sessions, else the second image.
    An eye with a single image uses it for both roles.
    """
    groups = manifest.identities()
    two = manifest.two_sessions
    pairs: list[Pair] = []
    for recs in groups.values():
        if two:
            s1 = [r for r in recs if r.session == 1]
            s2 = [r for r in recs if r.session == 2]
            pairs.extend(Pair(a.path, b.path, True) for a in s1 for b in s2)
        else:
            pairs.extend(Pair(recs[i].path, recs[j].path, True) for i in range(len(recs)) for j in range(i + 1, len(recs)))
    if len(groups) < 2:
        warnings.warn("single identity in manifest: impostor set is empty", RuntimeWarning, stacklevel=2)
        return pairs

    def enrol_of(recs: list[ImageRecord]) -> ImageRecord:
        s1 = [r for r in recs if r.session == 1]
        return (s1 or recs)[0]

    def query_of(recs: list[ImageRecord]) -> ImageRecord:
        if two:
            s2 = [r for r in recs if r.session == 2]
            if s2:
                return s2[0]
        return recs[1] if len(recs) > 1 else recs[0]

    ids = list(groups)
    for i in ids:
        enrol = enrol_of(groups[i])
        for j in ids:
            if j != i:
                pairs.append(Pair(enrol.path, query_of(groups[j]).path, False))
    return pairs


# --------------------------------------------------------------------------
# Normalisation and fusion


def tanh_normalize(s, mu: float, sigma: float, polarity: str = "similarity"):
    """``0.5 * (tanh(0.01 (s - mu) / sigma) + 1)``; distances have their sign flipped first.

    ``mu`` and ``sigma`` describe the genuine scores in the raw polarity.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    z = (np.asarray(s, dtype=np.float64) - mu) / sigma
    if polarity == "distance":
        z = -z
    elif polarity != "similarity":
        raise ParameterError(f"polarity must be 'distance' or 'similarity', got {polarity!r}")
    out = 0.5 * (np.tanh(TANH_SCALE * z) + 1.0)
    return float(out) if out.ndim == 0 else out


def genuine_stats(genuine: Sequence[float]) -> tuple[float, float]:
    g = np.asarray(genuine, dtype=np.float64)
    if g.size < 2:
        raise ParameterError("need at least two genuine scores to estimate mean and deviation")
    return float(g.mean()), float(g.std(ddof=1))


def fuse_mean(scores: Iterable[float]) -> float:
    values = [float(s) for s in scores]
    if not values:
        raise ParameterError("cannot fuse an empty score list")
    return math.fsum(values) / len(values)


# --------------------------------------------------------------------------
# Metrics


def normalized_distance(point: tuple[float, float], circle: Circle) -> float:
    if not circle.r > 0:
        raise DataError("circle radius must be positive")
    return math.hypot(point[0] - circle.cx, point[1] - circle.cy) / circle.r


def detection_accuracy_curve(
    centers: Sequence[tuple[float, float]],
    annotations: Sequence[EyeAnnotation],
    reference: str = "pupil",
    thresholds: Sequence[float] = ND_THRESHOLDS,
) -> list[tuple[float, float]]:
    """Fraction of detections with normalised distance ``<= t`` for each threshold ``t``."""
    if len(centers) != len(annotations):
        raise DataError(f"{len(centers)} detections for {len(annotations)} annotations")
    if reference not in ("pupil", "sclera"):
        raise ParameterError(f"reference must be 'pupil' or 'sclera', got {reference!r}")
    if not centers:
        raise DataError("no detections to evaluate")
    nd = np.array([normalized_distance(c, getattr(a, reference)) for c, a in zip(centers, annotations)])
    return [(float(t), float(np.count_nonzero(nd <= t)) / nd.size) for t in thresholds]


def curve_value(curve: Sequence[tuple[float, float]], threshold: float) -> float:
    for t, v in curve:
        if t == threshold:
            return v
    raise ParameterError(f"threshold {threshold} not on the curve lattice")


@dataclass
class ScoreSet:
    genuine: list[float]
    impostor: list[float]
    polarity: str = "distance"

    def as_similarity(self) -> tuple[np.ndarray, np.ndarray]:
        g = np.asarray(self.genuine, dtype=np.float64)
        i = np.asarray(self.impostor, dtype=np.float64)
        if self.polarity == "distance":
            return -g, -i
        if self.polarity != "similarity":
            raise ParameterError(f"unknown polarity {self.polarity!r}")
        return g, i


def error_rates(genuine: np.ndarray, impostor: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """FAR and FRR for similarity scores at every observed score plus ``+inf``.

    A comparison is accepted when its score is ``>=`` the threshold.
    """
    thresholds = np.append(np.unique(np.concatenate([genuine, impostor])), np.inf)
    g = np.sort(genuine)
    i = np.sort(impostor)
    frr = np.searchsorted(g, thresholds, side="left") / g.size
    far = 1.0 - np.searchsorted(i, thresholds, side="left") / i.size
    return thresholds, far, frr


def compute_eer(scores: ScoreSet) -> float:
    """Equal error rate from a threshold sweep, interpolating linearly where FAR and FRR cross."""
    if not scores.genuine or not scores.impostor:
        raise ParameterError("EER needs non-empty genuine and impostor scores")
    g, i = scores.as_similarity()
    _, far, frr = error_rates(g, i)
    diff = far - frr
    k = int(np.argmax(diff <= 0))  # the +inf sentinel guarantees a hit
    if diff[k] == 0 or k == 0:
        return float(far[k])
    alpha = diff[k - 1] / (diff[k - 1] - diff[k])
    return float(far[k - 1] + alpha * (far[k] - far[k - 1]))
