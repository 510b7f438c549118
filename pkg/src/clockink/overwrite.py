"""Overwrite and augmentation detection among overlapping slices."""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import convex_hull, hull_overlap
from .stslice import STSlice


@dataclass(frozen=True, eq=False)
class OverwriteEvent:
    removed: STSlice
    by: STSlice
    classification: object = None     # ScoreVector of the removed ink, if a recognizer was given
    overlap: float = 0.0

    def to_dict(self) -> dict:
        out = {"removed": sorted(self.removed.ids), "by": sorted(self.by.ids),
               "overlap": round(self.overlap, 6)}
        if self.classification is not None:
            out["label"] = self.classification.best_label
            out["scores"] = [round(float(v), 6) for v in self.classification.scores]
        return out


@dataclass(frozen=True, eq=False)
class AugmentationEvent:
    base: STSlice
    absorbed: STSlice
    overlap: float = 0.0

    def to_dict(self) -> dict:
        return {"base": sorted(self.base.ids), "absorbed": sorted(self.absorbed.ids),
                "overlap": round(self.overlap, 6)}


def merge(a: STSlice, b: STSlice, center) -> STSlice:
    """Chronological union of two disjoint slices; keeps the earlier layer."""
    if a.ids & b.ids:
        raise ValueError(f"cannot merge slices sharing strokes {sorted(a.ids & b.ids)}")
    return STSlice.from_strokes(a.strokes + b.strokes, center, min(a.layer, b.layer))


class _Hulls:
    # hull cache keyed by stroke-id set
    def __init__(self, eps_buf: float):
        self.eps_buf = eps_buf
        self._cache = {}

    def __call__(self, s: STSlice):
        h = self._cache.get(s.ids)
        if h is None:
            h = self._cache[s.ids] = convex_hull(s.xy, self.eps_buf)
        return h

    def overlap(self, a: STSlice, b: STSlice) -> float:
        return hull_overlap(self(a), self(b))


def detect_overwrites(slices, g, theta1: float = 0.6, theta2: float = 0.05,
                      recognizer=None):
    """Remove overwritten slices and fold augmentations into their base.

    Pairs ``(i, j)`` with ``j > i`` are visited in chronological order.
    Overlap above ``theta1`` marks ``s_i`` overwritten by ``s_j``: it is
    classified (when a recognizer is given), recorded and dropped.
    Overlap in ``(theta2, theta1]`` merges ``s_j`` into ``s_i``, which
    then continues to be compared against later slices.

    Returns
    -------
    kept, overwrites, augmentations
    """
    if not 0.0 <= theta2 < theta1:
        raise ValueError(f"need 0 <= theta2 < theta1, got {theta2}, {theta1}")
    from .recognizer import recognize

    hulls = _Hulls(g.eps_buf)
    work = list(sorted(slices, key=lambda s: (s.start_time, s.layer)))
    alive = [True] * len(work)
    overwrites, augments = [], []
    for i in range(len(work)):
        if not alive[i]:
            continue
        for j in range(i + 1, len(work)):
            if not alive[j]:
                continue
            ov = hulls.overlap(work[i], work[j])
            if ov > theta1:
                cls = recognize(recognizer, work[i].strokes) if recognizer is not None else None
                overwrites.append(OverwriteEvent(work[i], work[j], cls, ov))
                alive[i] = False
                break
            if ov > theta2:
                augments.append(AugmentationEvent(work[i], work[j], ov))
                work[i] = merge(work[i], work[j], g.center)
                alive[j] = False
    kept = [s for s, ok in zip(work, alive) if ok]
    return kept, overwrites, augments
