"""Spatio-temporal slices and the boosted stroke-pair segmenter."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateBearingError, ModelMismatchError, TrainingError
from .model import bearing, bearing_diff, bearings

FEATURES = ("d_angle", "d_time")
MODEL_FORMAT = 1


@dataclass(frozen=True, eq=False)
class STSlice:
    """A chronologically contiguous group of strokes.

    ``angular_mid`` is the clock bearing of the ink centroid,
    ``angular_width`` the largest circular difference between point
    bearings (at most 180), and ``layer`` the creation index.
    """

    strokes: tuple
    angular_mid: float
    angular_width: float
    time_span: tuple
    layer: int

    @classmethod
    def from_strokes(cls, strokes, center, layer: int = 0) -> "STSlice":
        strokes = tuple(sorted(strokes, key=lambda s: (s.start_time, s.id)))
        if not strokes:
            raise ValueError("a slice needs at least one stroke")
        xy = np.concatenate([s.xy for s in strokes])
        try:
            mid = bearing(xy.mean(axis=0), center)
        except DegenerateBearingError:
            mid = 0.0
        span = (min(s.start_time for s in strokes), max(s.end_time for s in strokes))
        return cls(strokes, mid, angular_width(xy, center), span, int(layer))

    @cached_property
    def xy(self) -> np.ndarray:
        return np.concatenate([s.xy for s in self.strokes])

    @cached_property
    def ids(self) -> frozenset:
        return frozenset(s.id for s in self.strokes)

    @property
    def start_time(self) -> float:
        return self.time_span[0]

    def __len__(self):
        return len(self.strokes)

    def __repr__(self):
        ids = ",".join(str(s.id) for s in self.strokes)
        return f"STSlice([{ids}], mid={self.angular_mid:.1f}, layer={self.layer})"

    def to_dict(self) -> dict:
        return {"strokes": [s.id for s in self.strokes],
                "angular_mid": round(self.angular_mid, 6),
                "angular_width": round(self.angular_width, 6),
                "time_span": [float(self.time_span[0]), float(self.time_span[1])],
                "layer": self.layer}


def angular_width(xy: np.ndarray, center) -> float:
    """Largest pairwise circular bearing difference of the points, capped at 180."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    r = np.hypot(*(xy - np.asarray(center, dtype=float)).T)
    xy = xy[r > 1e-12]
    if len(xy) < 2:
        return 0.0
    b = np.unique(bearings(xy, center))
    if len(b) < 2:
        return 0.0
    # for each bearing, the partner closest to its antipode is the farthest one
    target = (b + 180.0) % 360.0
    idx = np.searchsorted(b, target) % len(b)
    best = 0.0
    for cand in (idx, (idx - 1) % len(b)):
        d = np.abs(b[cand] - b)
        best = max(best, float(np.minimum(d, 360.0 - d).max()))
    return min(best, 180.0)


# -- pair features -------------------------------------------------------------

@dataclass(frozen=True)
class PairFeatures:
    d_angle: float
    d_time: float

    def __post_init__(self):
        if not (0.0 <= self.d_angle <= 180.0):
            raise ValueError(f"d_angle out of range: {self.d_angle}")
        if self.d_time < 0:
            raise ValueError(f"d_time must be >= 0, got {self.d_time}")

    def as_array(self) -> np.ndarray:
        return np.array([self.d_angle, self.d_time])


def _stroke_bearing(s, center) -> float:
    try:
        return bearing(s.centroid, center)
    except DegenerateBearingError:
        return 0.0


def pair_features(prev, nxt, g) -> PairFeatures:
    """Centroid bearing difference and pen-up gap of two consecutive strokes."""
    center = g.center if hasattr(g, "center") else g
    d_angle = bearing_diff(_stroke_bearing(prev, center), _stroke_bearing(nxt, center))
    d_time = max(0.0, float(nxt.start_time - prev.end_time))
    return PairFeatures(d_angle, d_time)


def pair_matrix(strokes, center) -> np.ndarray:
    """``(n-1, 2)`` features of consecutive strokes in the given order."""
    out = np.empty((max(len(strokes) - 1, 0), 2))
    for i in range(len(strokes) - 1):
        f = pair_features(strokes[i], strokes[i + 1], center)
        out[i] = f.d_angle, f.d_time
    return out


# -- boosted stumps ----------------------------------------------------------

@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    polarity: int      # +1: votes boundary above the threshold
    weight: float

    def __call__(self, X: np.ndarray) -> np.ndarray:
        s = np.where(X[:, self.feature] > self.threshold, 1.0, -1.0)
        return self.weight * self.polarity * s


@dataclass(frozen=True)
class SegmenterModel:
    """Additive stump model; ``P(boundary) = logistic(score)``."""

    rounds: tuple
    intercept: float
    features: tuple = FEATURES
    loss_curve: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not self.rounds:
            raise ValueError("a segmenter needs at least one round")
        bad = [r.feature for r in self.rounds if not 0 <= r.feature < len(FEATURES)]
        if bad:
            raise ModelMismatchError(f"stump feature index out of range: {bad}")

    def _columns(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(FEATURES):
            raise ModelMismatchError(f"expected {len(FEATURES)} features, got {X.shape[1]}")
        return X

    def score(self, X) -> np.ndarray:
        X = self._columns(X)
        out = np.full(len(X), self.intercept)
        for r in self.rounds:
            out += r(X)
        return out

    def probability(self, X) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.score(X)))

    def to_dict(self) -> dict:
        return {"format": MODEL_FORMAT, "kind": "segmenter",
                "features": list(self.features), "intercept": self.intercept,
                "rounds": [[r.feature, r.threshold, r.polarity, r.weight] for r in self.rounds]}

    @classmethod
    def from_dict(cls, d: dict) -> "SegmenterModel":
        if d.get("format") != MODEL_FORMAT or d.get("kind") != "segmenter":
            raise ModelMismatchError("not a version-1 segmenter model")
        rounds = tuple(Stump(int(f), float(t), int(p), float(w)) for f, t, p, w in d["rounds"])
        return cls(rounds, float(d["intercept"]), tuple(d.get("features", FEATURES)))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "SegmenterModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _fit_stump(X: np.ndarray, z: np.ndarray, w: np.ndarray, allowed) -> tuple:
    """Weighted least-squares stump ``c_lo if x <= thr else c_hi``.

    Returns ``(sse, feature, threshold, c_lo, c_hi)``.
    """
    best = None
    W, WZ = w.sum(), (w * z).sum()
    for f in allowed:
        order = np.argsort(X[:, f], kind="stable")
        xs, ws, zs = X[order, f], w[order], z[order]
        cw, cz = np.cumsum(ws), np.cumsum(ws * zs)
        # split after position i only where the feature value changes
        cut = np.flatnonzero(np.diff(xs) > 0)
        if len(cut) == 0:
            c = WZ / W
            cand = (float(((z - c) ** 2 * w).sum()), f, float(xs[-1]), c, c)
        else:
            wl, zl = cw[cut], cz[cut]
            wr, zr = W - wl, WZ - zl
            ok = (wl > 0) & (wr > 0)
            if not ok.any():
                continue
            # SSE = sum(w z^2) - zl^2/wl - zr^2/wr
            gain = np.where(ok, zl ** 2 / np.where(ok, wl, 1) + zr ** 2 / np.where(ok, wr, 1), -np.inf)
            k = int(np.argmax(gain))
            i = cut[k]
            sse = float((w * z * z).sum() - gain[k])
            thr = 0.5 * (xs[i] + xs[i + 1])
            cand = (sse, f, float(thr), float(zl[k] / wl[k]), float(zr[k] / wr[k]))
        if best is None or cand[0] < best[0] - 1e-12:
            best = cand
    return best


def train_segmenter(pairs, rounds: int = 50, features=FEATURES, z_max: float = 4.0
                    ) -> SegmenterModel:
    """LogitBoost with regression stumps on stroke-pair features.

    Parameters
    ----------
    pairs : sequence of ``(PairFeatures | array-like, bool)``
    rounds : number of boosting rounds
    features : names of the features the stumps may split on; the
        temporal-only baseline passes ``("d_time",)``
    z_max : clip for the Newton working response
    """
    X = np.array([p.as_array() if isinstance(p, PairFeatures) else np.asarray(p, dtype=float)
                  for p, _ in pairs], dtype=float).reshape(-1, 2)
    y = np.array([bool(b) for _, b in pairs], dtype=float)
    if len(y) == 0 or y.min() == y.max():
        raise TrainingError("segmenter training needs both boundary and non-boundary pairs")
    if rounds < 1:
        raise TrainingError("need at least one boosting round")
    allowed = [FEATURES.index(f) for f in features]
    F = np.zeros(len(y))
    intercept = 0.0
    stumps, curve = [], []
    for _ in range(rounds):
        p = 1.0 / (1.0 + np.exp(-F))
        w = np.clip(p * (1 - p), 1e-10, None)
        z = np.clip((y - p) / w, -z_max, z_max)
        _, f, thr, lo, hi = _fit_stump(X, z, w, allowed)
        a, b = 0.5 * (lo + hi), 0.5 * (hi - lo)
        intercept += a
        stump = Stump(f, thr, 1 if b >= 0 else -1, abs(b))
        stumps.append(stump)
        F = F + a + stump(X)
        curve.append(float(np.mean(np.logaddexp(0.0, -F * (2 * y - 1)))))
    return SegmenterModel(tuple(stumps), float(intercept), FEATURES, tuple(curve))


# -- segmentation ----------------------------------------------------------------

def _slices_from_cuts(strokes, cuts, center) -> list:
    out, cur = [], [strokes[0]]
    for i in range(1, len(strokes)):
        if cuts[i - 1]:
            out.append(STSlice.from_strokes(cur, center, len(out)))
            cur = []
        cur.append(strokes[i])
    out.append(STSlice.from_strokes(cur, center, len(out)))
    return out


def _chronological(strokes) -> list:
    strokes = list(strokes)
    if not strokes:
        raise ValueError("cannot segment an empty stroke list")
    return sorted(strokes, key=lambda s: (s.start_time, s.id))


def segment(strokes, model: SegmenterModel, g) -> list:
    """Cut the chronological stroke sequence wherever P(boundary) > 0.5."""
    strokes = _chronological(strokes)
    center = g.center if hasattr(g, "center") else g
    if len(strokes) == 1:
        return _slices_from_cuts(strokes, [], center)
    cuts = model.probability(pair_matrix(strokes, center)) > 0.5
    return _slices_from_cuts(strokes, cuts, center)


def threshold_segment(strokes, g, angle_thresh: float = 15.0, time_thresh: float = 5000.0
                      ) -> list:
    """Cut wherever the angle or the pen-up gap exceeds its threshold."""
    strokes = _chronological(strokes)
    center = g.center if hasattr(g, "center") else g
    if len(strokes) == 1:
        return _slices_from_cuts(strokes, [], center)
    P = pair_matrix(strokes, center)
    cuts = (P[:, 0] > angle_thresh) | (P[:, 1] > time_thresh)
    return _slices_from_cuts(strokes, cuts, center)


# -- training data -------------------------------------------------------------

def layer_index(gt) -> dict:
    """Stroke id -> index of the ground-truth layer it belongs to."""
    out = {}
    for k, layer in enumerate(gt.layers):
        for sid in layer.strokes:
            out[sid] = k
    return out


def labeled_pairs(d, gt, g, strokes=None) -> list:
    """``(PairFeatures, boundary)`` for consecutive strokes of the digit set.

    A pair is a boundary when its strokes belong to different
    ground-truth layers.  ``strokes`` defaults to the ground-truth digit
    strokes (everything that belongs to some layer).
    """
    layer_of = layer_index(gt)
    if strokes is None:
        strokes = [s for s in d.strokes if s.id in layer_of]
    strokes = _chronological(strokes) if strokes else []
    out = []
    for a, b in zip(strokes, strokes[1:]):
        la, lb = layer_of.get(a.id, -1 - a.id), layer_of.get(b.id, -1 - b.id)
        out.append((pair_features(a, b, g), la != lb))
    return out

