"""Core drawing types, the clock-bearing convention and stroke-file I/O.

Coordinates follow pen-capture convention: x grows rightward, y grows
downward.  Angles about the clock centre are *clock bearings*: 0 degrees
at 12 o'clock, increasing clockwise, so numeral ``n`` sits near ``30 * n``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateBearingError, DrawingFormatError, EmptyDrawingError

FORMAT_VERSION = 1
COHORTS = ("healthy", "impaired", "unknown")
ROLES = ("digit", "circle", "hand", "noise", "overwritten")


@dataclass(frozen=True)
class PenPoint:
    x: float
    y: float
    t: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.t)):
            raise ValueError("pen point fields must be finite")
        if self.t < 0:
            raise ValueError("pen point timestamp must be >= 0")


class Stroke:
    """An ordered run of timestamped pen points.

    ``points`` is a read-only ``(n, 3)`` float array of ``(x, y, t)`` rows.
    """

    __slots__ = ("id", "points", "_length")

    def __init__(self, id: int, points):
        pts = np.array(points, dtype=float).reshape(-1, 3)
        if len(pts) == 0:
            raise ValueError(f"stroke {id} has no points")
        if not np.all(np.isfinite(pts)):
            raise ValueError(f"stroke {id} has non-finite values")
        if np.any(pts[:, 2] < 0):
            raise ValueError(f"stroke {id} has negative timestamps")
        if np.any(np.diff(pts[:, 2]) < 0):
            raise ValueError(f"stroke {id} has decreasing timestamps")
        pts.setflags(write=False)
        self.id = int(id)
        self.points = pts
        self._length = None

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, :2]

    @property
    def start_time(self) -> float:
        return float(self.points[0, 2])

    @property
    def end_time(self) -> float:
        return float(self.points[-1, 2])

    @property
    def length(self) -> float:
        """Path length of the polyline."""
        if self._length is None:
            d = np.diff(self.xy, axis=0)
            self._length = float(np.hypot(d[:, 0], d[:, 1]).sum())
        return self._length

    @property
    def centroid(self) -> np.ndarray:
        return self.xy.mean(axis=0)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, Stroke):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.id, self.points.tobytes()))

    def __repr__(self):
        return (f"Stroke(id={self.id}, n={len(self.points)}, "
                f"t=[{self.start_time:.0f}, {self.end_time:.0f}])")


@dataclass(frozen=True, eq=False)
class Drawing:
    """Strokes sorted by start time (ties keep input order) plus metadata."""

    strokes: tuple
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if not self.strokes:
            raise EmptyDrawingError("drawing has no strokes")
        ordered = tuple(sorted(self.strokes, key=lambda s: (s.start_time, s.id)))
        object.__setattr__(self, "strokes", ordered)
        object.__setattr__(self, "meta", dict(self.meta))
        object.__setattr__(self, "_by_id", {s.id: s for s in ordered})
        if len(self._by_id) != len(ordered):
            raise ValueError("duplicate stroke ids")

    @classmethod
    def from_point_lists(cls, point_lists: Iterable, meta=None) -> "Drawing":
        return cls(tuple(Stroke(i, p) for i, p in enumerate(point_lists)), meta or {})

    def stroke(self, stroke_id: int) -> Stroke:
        return self._by_id[stroke_id]

    @property
    def ids(self) -> list:
        return [s.id for s in self.strokes]

    @property
    def cohort(self) -> str:
        return self.meta.get("cohort", "unknown")

    def all_points(self) -> np.ndarray:
        return np.concatenate([s.xy for s in self.strokes])

    def __eq__(self, other):
        if not isinstance(other, Drawing):
            return NotImplemented
        return dict(self.meta) == dict(other.meta) and self.strokes == other.strokes

    def __len__(self):
        return len(self.strokes)


@dataclass(frozen=True)
class GTSlice:
    label: int
    strokes: frozenset

    def __post_init__(self):
        if not 1 <= self.label <= 12:
            raise ValueError(f"ground-truth label {self.label} outside 1..12")
        object.__setattr__(self, "strokes", frozenset(self.strokes))


@dataclass(frozen=True)
class GTLayer:
    """One chronological ink group in the numeral region.

    ``role`` is ``digit`` for final-intent numerals, ``overwritten`` for ink
    later replaced, ``augment`` for ink added onto an earlier numeral and
    ``noise`` for scratch-outs.  ``label`` is the numeral the ink depicts
    (``None`` for noise).
    """

    strokes: frozenset
    role: str
    label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "strokes", frozenset(self.strokes))


@dataclass(frozen=True)
class GTEvent:
    kind: str
    numeral: int
    strokes: frozenset
    by: frozenset = frozenset()
    drawn_label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "strokes", frozenset(self.strokes))
        object.__setattr__(self, "by", frozenset(self.by))


@dataclass(frozen=True)
class GroundTruth:
    slices: tuple
    roles: Mapping
    layers: tuple = ()
    events: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "roles", {int(k): v for k, v in dict(self.roles).items()})
        seen = set()
        for s in self.slices:
            if seen & s.strokes:
                raise ValueError("a stroke belongs to two ground-truth slices")
            seen |= s.strokes

    def digit_strokes(self) -> set:
        return {i for s in self.slices for i in s.strokes}


# -- bearings ---------------------------------------------------------------

def bearing(p, center) -> float:
    """Clock bearing in [0, 360) of point ``p`` about ``center``."""
    px, py = (p.x, p.y) if isinstance(p, PenPoint) else (float(p[0]), float(p[1]))
    dx = px - float(center[0])
    dy = py - float(center[1])
    if dx == 0.0 and dy == 0.0:
        raise DegenerateBearingError("bearing of the centre point is undefined")
    deg = math.degrees(math.atan2(dx, -dy)) % 360.0
    return 0.0 if deg >= 360.0 else deg


def bearings(xy: np.ndarray, center) -> np.ndarray:
    """Vectorised :func:`bearing`; points on the centre map to 0."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    deg = np.degrees(np.arctan2(xy[:, 0] - center[0], -(xy[:, 1] - center[1]))) % 360.0
    deg[deg >= 360.0] = 0.0
    return deg


def bearing_diff(a: float, b: float) -> float:
    """Minimal circular distance between two bearings, in [0, 180]."""
    d = abs(a - b) % 360.0
    return 360.0 - d if d > 180.0 else d


def bearing_point(center, radius: float, deg: float) -> np.ndarray:
    """Point at clock bearing ``deg`` and distance ``radius`` from ``center``."""
    r = math.radians(deg)
    return np.array([center[0] + radius * math.sin(r), center[1] - radius * math.cos(r)])


# -- file I/O ---------------------------------------------------------------

def _stroke_line(text: str, index: int) -> int | None:
    hits = [m.start() for m in re.finditer(r'"points"', text)]
    if index < len(hits):
        return text.count("\n", 0, hits[index]) + 1
    return None


def parse_drawing(text: str, source: str = "<string>") -> Drawing:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DrawingFormatError(f"{source}: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("strokes"), list):
        raise DrawingFormatError(f"{source}: top level must hold a 'strokes' list", line=1)
    fmt = doc.get("format", FORMAT_VERSION)
    if fmt != FORMAT_VERSION:
        raise DrawingFormatError(f"{source}: unsupported format {fmt!r}", line=1)
    if not doc["strokes"]:
        raise EmptyDrawingError(f"{source}: empty stroke list")
    strokes = []
    for i, entry in enumerate(doc["strokes"]):
        pts = entry.get("points") if isinstance(entry, dict) else None
        try:
            if not isinstance(pts, list) or any(len(p) != 3 for p in pts):
                raise ValueError(f"stroke {i}: points must be [x, y, t] triples")
            strokes.append(Stroke(i, pts))
        except (TypeError, ValueError) as exc:
            raise DrawingFormatError(f"{source}: {exc}", line=_stroke_line(text, i)) from exc
    meta = doc.get("meta") or {}
    return Drawing(tuple(strokes), meta)


def load_drawing(path) -> Drawing:
    path = Path(path)
    return parse_drawing(path.read_text(encoding="utf-8"), source=str(path))


def _fmt(v: float) -> str:
    r = round(float(v), 3)
    return str(int(r)) if r == int(r) else repr(r)


def dump_drawing(d: Drawing) -> str:
    """Serialise with one stroke per line, in stroke-id order."""
    head = json.dumps({"format": FORMAT_VERSION, "meta": dict(d.meta)}, sort_keys=True)
    lines = []
    for s in sorted(d.strokes, key=lambda s: s.id):
        pts = ",".join(f"[{_fmt(x)},{_fmt(y)},{int(t)}]" for x, y, t in s.points)
        lines.append('{"points":[' + pts + "]}")
    return head[:-1] + ',\n"strokes":[\n' + ",\n".join(lines) + "\n]}\n"


def save_drawing(d: Drawing, path) -> None:
    Path(path).write_text(dump_drawing(d), encoding="utf-8")


def gt_path_for(drawing_path) -> Path:
    p = Path(drawing_path)
    name = p.name[:-5] if p.name.endswith(".json") else p.name
    return p.with_name(name + ".gt.json")


def _ids(seq) -> list:
    return sorted(int(i) for i in seq)


def dump_ground_truth(gt: GroundTruth) -> str:
    doc = {
        "format": FORMAT_VERSION,
        "slices": [{"label": s.label, "strokes": _ids(s.strokes)} for s in gt.slices],
        "roles": {str(k): gt.roles[k] for k in sorted(gt.roles)},
        "layers": [{"strokes": _ids(l.strokes), "role": l.role, "label": l.label}
                   for l in gt.layers],
        "events": [{"kind": e.kind, "numeral": e.numeral, "strokes": _ids(e.strokes),
                    "by": _ids(e.by), "drawn_label": e.drawn_label} for e in gt.events],
    }
    return json.dumps(doc, sort_keys=True) + "\n"


def parse_ground_truth(text: str, source: str = "<string>") -> GroundTruth:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DrawingFormatError(f"{source}: {exc.msg}", line=exc.lineno) from exc
    if doc.get("format", FORMAT_VERSION) != FORMAT_VERSION:
        raise DrawingFormatError(f"{source}: unsupported format", line=1)
    try:
        slices = tuple(GTSlice(int(s["label"]), s["strokes"]) for s in doc["slices"])
        layers = tuple(GTLayer(l["strokes"], l["role"], l.get("label"))
                       for l in doc.get("layers", []))
        events = tuple(GTEvent(e["kind"], int(e["numeral"]), e["strokes"], e.get("by", ()),
                               e.get("drawn_label")) for e in doc.get("events", []))
        return GroundTruth(slices, doc.get("roles", {}), layers, events)
    except (KeyError, TypeError, ValueError) as exc:
        raise DrawingFormatError(f"{source}: {exc}") from exc


def load_ground_truth(path) -> GroundTruth:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing ground-truth sidecar {path}")
    return parse_ground_truth(path.read_text(encoding="utf-8"), source=str(path))


def save_ground_truth(gt: GroundTruth, path) -> None:
    Path(path).write_text(dump_ground_truth(gt), encoding="utf-8")


def list_drawings(corpus_dir) -> list:
    """Stroke files in a corpus directory, sorted by name (sidecars excluded)."""
    root = Path(corpus_dir)
    return sorted(p for p in root.glob("*.json")
                  if not p.name.endswith(".gt.json") and p.name != "manifest.json")


def load_corpus(corpus_dir, require_gt: bool = True) -> list:
    """``[(name, Drawing, GroundTruth | None), ...]`` sorted by file name."""
    out = []
    for p in list_drawings(corpus_dir):
        gp = gt_path_for(p)
        if require_gt and not gp.exists():
            raise FileNotFoundError(f"missing ground-truth sidecar for {p.name}")
        gt = load_ground_truth(gp) if gp.exists() else None
        out.append((p.name[:-5], load_drawing(p), gt))
    return out


def stroke_ids(strokes: Sequence) -> frozenset:
    return frozenset(s.id for s in strokes)
