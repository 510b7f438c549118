"""Clock centre/size estimation and digit-stroke clustering."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ClusteringError, FitError
from .geometry import Ellipse, circularity, fit_ellipse

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClockGeometry:
    center: tuple
    clock_radius: float
    source: str                       # "ellipse-fit" | "centroid-fallback"
    ellipse: Ellipse | None = None
    diagonal: float = 0.0             # bounding-box diagonal of the drawing

    def __post_init__(self):
        if not self.clock_radius > 0:
            raise ValueError("clock_radius must be positive")
        if (self.source == "ellipse-fit") != (self.ellipse is not None):
            raise ValueError("source must be 'ellipse-fit' exactly when an ellipse is present")

    @property
    def eps_buf(self) -> float:
        """Hull buffer: 2% of the semi-major axis, else 2% of the bbox diagonal."""
        if self.ellipse is not None:
            return 0.02 * self.ellipse.a
        return 0.02 * (self.diagonal or 2 * self.clock_radius)

    def to_dict(self) -> dict:
        out = {"center": list(self.center), "clock_radius": self.clock_radius,
               "source": self.source}
        if self.ellipse is not None:
            e = self.ellipse
            out["ellipse"] = {"center": list(e.center), "a": e.a, "b": e.b, "phi": e.phi}
        return out


@dataclass(frozen=True)
class StrokePartition:
    digit_strokes: frozenset
    circle_strokes: frozenset = frozenset()
    hand_strokes: frozenset = frozenset()


def estimate_geometry(d, circularity_min: float = 0.5, length_frac_min: float = 0.5
                      ) -> ClockGeometry:
    """Centre and size from the clock circle, or the centroid when there is none.

    Circle candidates are strokes with circularity at least
    ``circularity_min`` whose path length is at least ``length_frac_min``
    times the longest stroke's.  Their pooled points are fitted with an
    ellipse; without candidates (or if the fit fails) the centre is the
    mean of all points and the radius half the bounding-box diagonal.
    """
    pts = d.all_points()
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    diag = float(np.hypot(*(hi - lo)))
    longest = max(s.length for s in d.strokes)
    cands = [s for s in d.strokes
             if s.length >= length_frac_min * longest and longest > 0
             and circularity(s) >= circularity_min]
    if cands:
        try:
            e = fit_ellipse(np.concatenate([s.xy for s in cands]))
            return ClockGeometry(e.center, e.a, "ellipse-fit", e, diag)
        except FitError as exc:
            log.debug("circle fit failed (%s); using centroid", exc)
    center = pts.mean(axis=0)
    radius = diag / 2.0 if diag > 0 else 1.0
    return ClockGeometry((float(center[0]), float(center[1])), radius,
                         "centroid-fallback", None, diag)


def kmeans(X: np.ndarray, k: int, restarts: int = 50, seed: int = 0, max_iter: int = 100):
    """Lloyd's algorithm with k-means++ seeding; best of ``restarts`` runs.

    Returns ``(labels, centers, inertia)``.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers = np.empty((k, X.shape[1]))
        centers[0] = X[rng.integers(n)]
        d2 = ((X - centers[0]) ** 2).sum(axis=1)
        for j in range(1, k):
            tot = d2.sum()
            idx = rng.choice(n, p=d2 / tot) if tot > 0 else rng.integers(n)
            centers[j] = X[idx]
            d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
        labels = None
        for _ in range(max_iter):
            dist = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
            new = dist.argmin(axis=1)
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            for j in range(k):
                members = X[labels == j]
                if len(members):
                    centers[j] = members.mean(axis=0)
                else:
                    far = dist.min(axis=1).argmax()
                    centers[j] = X[far]
                    labels[far] = j
        inertia = float(((X - centers[labels]) ** 2).sum())
        if best is None or inertia < best[2] - 1e-12:
            best = (labels.copy(), centers.copy(), inertia)
    return best


def stroke_features(strokes, center) -> np.ndarray:
    """Per-stroke (start time, mean radial distance) rows, z-scored per column."""
    c = np.asarray(center, dtype=float)
    raw = np.array([[s.start_time, float(np.hypot(*(s.xy - c).T).mean())] for s in strokes])
    sd = raw.std(axis=0)
    sd[sd == 0] = 1.0
    return (raw - raw.mean(axis=0)) / sd, raw


def extract_digit_cluster(d, g: ClockGeometry, seed: int = 0, restarts: int = 50
                          ) -> StrokePartition:
    """Split strokes into digit / circle / hand groups with 3-means.

    The largest cluster (ties: more total ink) is the digit cluster; of
    the other two, the one further from the centre on average is the
    circle group.
    """
    strokes = sorted(d.strokes, key=lambda s: (s.start_time, s.id))
    if len(strokes) < 3:
        raise ClusteringError(f"need at least 3 strokes to cluster, got {len(strokes)}")
    X, raw = stroke_features(strokes, g.center)
    labels, _, _ = kmeans(X, 3, restarts=restarts, seed=seed)
    groups = []
    for j in range(3):
        members = [i for i in range(len(strokes)) if labels[i] == j]
        if not members:
            continue
        ink = sum(strokes[i].length for i in members)
        radial = float(raw[members, 1].mean())
        groups.append((len(members), ink, radial, members))
    groups.sort(key=lambda g_: (-g_[0], -g_[1], g_[3][0]))
    digit = frozenset(strokes[i].id for i in groups[0][3])
    rest = sorted(groups[1:], key=lambda g_: -g_[2])
    circle = frozenset(strokes[i].id for i in rest[0][3]) if len(rest) > 0 else frozenset()
    hand = frozenset(strokes[i].id for i in rest[1][3]) if len(rest) > 1 else frozenset()
    return StrokePartition(digit, circle, hand)
