"""Feature images and a nearest-exemplar numeral recognizer."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ModelMismatchError, TrainingError

GRID = 24
BOX = 20                  # longest ink side in cells
N_ORIENT = 4              # 0, 45, 90, 135 degrees
N_CHANNELS = N_ORIENT + 1
FEATURE_DIM = N_CHANNELS * GRID * GRID
LABELS = tuple(range(1, 13))
MODEL_FORMAT = 1


def _polylines(strokes) -> list:
    out = []
    for s in strokes:
        xy = s.xy if hasattr(s, "xy") else np.asarray(s, dtype=float)[:, :2]
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if len(xy):
            out.append(xy)
    return out


def _splat(img: np.ndarray, u: np.ndarray, v: np.ndarray, w: np.ndarray) -> None:
    # bilinear deposit at continuous grid coordinates (cell centres at i + 0.5)
    x, y = u - 0.5, v - 0.5
    x0, y0 = np.floor(x).astype(int), np.floor(y).astype(int)
    fx, fy = x - x0, y - y0
    for dx, dy, k in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                      (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        cx, cy = x0 + dx, y0 + dy
        ok = (cx >= 0) & (cx < GRID) & (cy >= 0) & (cy < GRID)
        np.add.at(img, (cy[ok], cx[ok]), (w * k)[ok])


def extract_features(strokes, sigma: float = 1.0) -> np.ndarray:
    """Five 24x24 channels: four orientation maps and an endpoint map.

    The ink is scaled so its longest side spans 20 cells and centred.
    Segment ink is split between the two nearest orientation bins,
    every stroke deposits its two endpoints, each channel is smoothed
    with a Gaussian of ``sigma`` cells and scaled to a maximum of 1.

    Returns
    -------
    ndarray, shape (5, 24, 24)
    """
    lines = _polylines(strokes)
    if not lines:
        raise ValueError("cannot extract features from empty ink")
    allp = np.concatenate(lines)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    side = float((hi - lo).max())
    scale = BOX / side if side > 0 else 1.0
    mid = 0.5 * (lo + hi)
    img = np.zeros((N_CHANNELS, GRID, GRID))
    for xy in lines:
        g = (xy - mid) * scale + GRID / 2.0
        ends = g[[0, -1]]
        _splat(img[N_ORIENT], ends[:, 0], ends[:, 1], np.ones(2))
        if len(g) < 2:
            continue
        d = np.diff(g, axis=0)
        seg_len = np.hypot(d[:, 0], d[:, 1])
        keep = seg_len > 1e-12
        if not keep.any():
            continue
        p0, d, seg_len = g[:-1][keep], d[keep], seg_len[keep]
        theta = np.degrees(np.arctan2(-d[:, 1], d[:, 0])) % 180.0
        # rounding keeps exact bin angles from leaking ~1e-16 into a neighbour,
        # which the per-channel max normalization would blow up
        pos = np.round(theta / 45.0, 9)
        b0 = np.floor(pos).astype(int) % N_ORIENT
        frac = pos - np.floor(pos)
        # sample each segment at most half a cell apart
        k = np.maximum(1, np.ceil(seg_len / 0.5).astype(int))
        rep = np.repeat(np.arange(len(k)), k)
        j = np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)
        t = (j + 0.5) / k[rep]
        pts = p0[rep] + t[:, None] * d[rep]
        w = seg_len[rep] / k[rep]
        for b, share in ((b0, 1.0 - frac), ((b0 + 1) % N_ORIENT, frac)):
            for c in range(N_ORIENT):
                m = (b[rep] == c) & (share[rep] > 0)
                if m.any():
                    _splat(img[c], pts[m, 0], pts[m, 1], (w * share[rep])[m])
    for c in range(N_CHANNELS):
        if sigma > 0:
            img[c] = gaussian_filter(img[c], sigma, mode="constant")
        top = img[c].max()
        if top > 0:
            img[c] /= top
    return np.clip(img, 0.0, 1.0)


def feature_vector(strokes) -> np.ndarray:
    return extract_features(strokes).reshape(-1)


@dataclass(frozen=True)
class ScoreVector:
    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        if s.shape != (len(LABELS),):
            raise ValueError(f"need {len(LABELS)} scores, got shape {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def best_label(self) -> int:
        return LABELS[int(np.argmax(self.scores))]

    @property
    def best_score(self) -> float:
        return float(self.scores.max())


class RecognizerModel:
    """Exemplar feature vectors per class plus the softmax temperature."""

    def __init__(self, exemplars: np.ndarray, labels, tau: float, tau_scale: float = 0.1,
                 nn_mean: float | None = None):
        X = np.asarray(exemplars, dtype=float)
        y = np.asarray(labels, dtype=int)
        if X.ndim != 2 or X.shape[1] != FEATURE_DIM or len(X) != len(y):
            raise ModelMismatchError("exemplar matrix does not match the feature layout")
        missing = sorted(set(LABELS) - set(y.tolist()))
        if missing:
            raise TrainingError(f"no exemplars for class(es) {missing}")
        if not tau > 0:
            raise ValueError("tau must be positive")
        self.exemplars, self.labels = X, y
        self.tau, self.tau_scale, self.nn_mean = float(tau), float(tau_scale), nn_mean
        self._sq = (X * X).sum(axis=1)

    def class_distances(self, F: np.ndarray) -> np.ndarray:
        """``(n, 12)`` minimum Euclidean distance from each row to each class."""
        F = np.atleast_2d(F)
        d2 = (F * F).sum(axis=1)[:, None] + self._sq[None] - 2.0 * F @ self.exemplars.T
        d = np.sqrt(np.maximum(d2, 0.0))
        out = np.empty((len(F), len(LABELS)))
        for k, lab in enumerate(LABELS):
            out[:, k] = d[:, self.labels == lab].min(axis=1)
        return out

    def scores(self, F: np.ndarray) -> np.ndarray:
        z = -self.class_distances(F) / self.tau
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def save(self, path) -> None:
        np.savez_compressed(path, format=MODEL_FORMAT, exemplars=self.exemplars.astype(np.float32),
                            labels=self.labels, tau=self.tau, tau_scale=self.tau_scale,
                            nn_mean=np.nan if self.nn_mean is None else self.nn_mean)

    @classmethod
    def load(cls, path) -> "RecognizerModel":
        with np.load(path) as z:
            if int(z["format"]) != MODEL_FORMAT:
                raise ModelMismatchError("unsupported recognizer model format")
            nn = float(z["nn_mean"])
            return cls(z["exemplars"].astype(float), z["labels"], float(z["tau"]),
                       float(z["tau_scale"]), None if np.isnan(nn) else nn)

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.save(buf)
        return buf.getvalue()


def _mean_loo_nn(X: np.ndarray) -> float:
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None] - 2.0 * X @ X.T
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(np.maximum(d2.min(axis=1), 0.0)).mean())


def train_recognizer(examples, tau_scale: float = 0.1, tau: float | None = None
                     ) -> RecognizerModel:
    """Store feature vectors of ``(strokes, label)`` examples.

    The softmax temperature defaults to ``tau_scale`` times the mean
    leave-one-out nearest-neighbour distance among the exemplars.
    """
    examples = list(examples)
    labels = [int(lab) for _, lab in examples]
    missing = sorted(set(LABELS) - set(labels))
    if missing:
        raise TrainingError(f"no training examples for class(es) {missing}")
    X = np.array([feature_vector(s) for s, _ in examples])
    nn = _mean_loo_nn(X) if len(X) > 1 else 1.0
    if tau is None:
        tau = tau_scale * nn if nn > 0 else tau_scale
    return RecognizerModel(X, labels, tau, tau_scale, nn)


def recognize(model: RecognizerModel, strokes) -> ScoreVector:
    return ScoreVector(model.scores(feature_vector(strokes))[0])


def recognize_many(model: RecognizerModel, stroke_sets) -> list:
    stroke_sets = list(stroke_sets)
    if not stroke_sets:
        return []
    F = np.array([feature_vector(s) for s in stroke_sets])
    return [ScoreVector(row) for row in model.scores(F)]
