"""Valley detection and segmentation repair driven by CRF confidence."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .crf import chain_order, predict, slice_base_features
from .geometry import convex_hull, hull_overlap
from .overwrite import merge
from .recognizer import recognize_many
from .stslice import STSlice

log = logging.getLogger(__name__)

MAX_ENUM = 12


@dataclass(frozen=True)
class Valley:
    site: tuple          # one slice index (under) or two consecutive ones (over)
    kind: str            # "under" | "over"
    scores: tuple        # (site scores..., left neighbour, right neighbour)


@dataclass(frozen=True)
class RepairRecord:
    iteration: int
    kind: str
    site: tuple          # stroke-id lists of the slices at the site
    before: float
    after: float
    accepted: bool

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "kind": self.kind,
                "site": [sorted(ids) for ids in self.site],
                "before": round(self.before, 9), "after": round(self.after, 9),
                "accepted": self.accepted}


@dataclass
class RepairResult:
    slices: list
    labels: np.ndarray
    posteriors: np.ndarray
    log: list = field(default_factory=list)
    dropped: list = field(default_factory=list)     # (removed part, overwriting part)
    notes: list = field(default_factory=list)


# -- valleys -------------------------------------------------------------------

def find_valleys(scores, widths=None, counts=None, ratio: float = 0.7, mode: str = "both",
                 notes: list | None = None) -> list:
    """Confidence valleys on a circular sequence of slice scores.

    A single slice is a valley when its score is at most ``ratio`` times
    both circular neighbours' (``mode="any"``: either neighbour).  Two
    consecutive slices each at most ``ratio`` times their outer
    neighbour form an ``over`` valley.  A single valley is ``under``
    only if its angular width and stroke count both exceed the mean
    plus one standard deviation of the drawing's slices; otherwise it
    is skipped (and noted).
    """
    s = np.asarray(scores, dtype=float)
    n = len(s)
    if n < 3:
        return []
    if mode not in ("both", "any"):
        raise ValueError(f"unknown valley mode {mode!r}")
    left, right = np.roll(s, 1), np.roll(s, -1)
    lo_l, lo_r = s <= ratio * left, s <= ratio * right
    single = (lo_l & lo_r) if mode == "both" else (lo_l | lo_r)
    out = []
    in_pair = np.zeros(n, dtype=bool)
    if n >= 4:
        for i in range(n):
            j = (i + 1) % n
            if lo_l[i] and lo_r[j]:
                out.append(Valley((i, j), "over", (s[i], s[j], s[(i - 1) % n], s[(j + 1) % n])))
                in_pair[i] = in_pair[j] = True
    if widths is not None and counts is not None:
        w, c = np.asarray(widths, dtype=float), np.asarray(counts, dtype=float)
        wide = w > w.mean() + w.std()
        many = c > c.mean() + c.std()
    else:
        wide = many = np.zeros(n, dtype=bool)
    for i in np.flatnonzero(single & ~in_pair):
        if wide[i] and many[i]:
            out.append(Valley((int(i),), "under", (s[i], s[(i - 1) % n], s[(i + 1) % n])))
        elif notes is not None:
            notes.append(f"valley at slice {int(i)} is neither paired nor unusually wide/dense; skipped")
    return out


# -- under-segmentation: split a slice -----------------------------------------------

def _compositions(m: int, gaps=None, cap: int = MAX_ENUM):
    """Cut-position sets for chronological compositions of ``m`` strokes."""
    points = list(range(1, m))
    if m > cap:
        order = np.argsort(-np.asarray(gaps, dtype=float), kind="stable")[:cap - 1]
        points = sorted(int(k) + 1 for k in order)
    for r in range(len(points) + 1):
        for cuts in itertools.combinations(points, r):
            yield cuts


def repair_underseg(slices, index: int, recognizer, g, theta1: float = 0.6,
                    scorer=None):
    """Split one slice into the chronological partition with the best mean score.

    Returns ``(new_slices, dropped)`` where ``dropped`` lists
    ``(part, later_part)`` pairs for parts overwritten inside the winning
    partition; unchanged input gives ``(slices, [])``.
    """
    slices = list(slices)
    s = slices[index]
    m = len(s.strokes)
    if m < 2:
        return slices, []
    score = scorer or _Scorer(recognizer)
    strokes = s.strokes
    gaps = [b.start_time - a.end_time for a, b in zip(strokes, strokes[1:])]
    whole = score(strokes)
    best, best_cuts = -np.inf, ()
    for cuts in _compositions(m, gaps):
        bounds = (0,) + cuts + (m,)
        val = np.mean([score(strokes[a:b]) for a, b in zip(bounds, bounds[1:])])
        if val > best + 1e-12:
            best, best_cuts = val, cuts
    if not best > whole or not best_cuts:
        return slices, []
    bounds = (0,) + best_cuts + (m,)
    parts = [STSlice.from_strokes(strokes[a:b], g.center, s.layer) for a, b in zip(bounds, bounds[1:])]
    alive = [True] * len(parts)
    dropped = []
    hulls = [convex_hull(p.xy, g.eps_buf) for p in parts]
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            if alive[j] and hull_overlap(hulls[i], hulls[j]) > theta1:
                alive[i] = False
                dropped.append((parts[i], parts[j]))
                break
    keep = [p for p, ok in zip(parts, alive) if ok]
    return slices[:index] + keep + slices[index + 1:], dropped


# -- over-segmentation: merge two slices ----------------------------------------------

def repair_overseg(slices, i: int, j: int, recognizer, g, scorer=None):
    """Merge two angularly consecutive slices if the merged ink scores higher."""
    slices = list(slices)
    score = scorer or _Scorer(recognizer)
    a, b = slices[i], slices[j]
    merged = merge(a, b, g.center)
    if score(merged.strokes) > 0.5 * (score(a.strokes) + score(b.strokes)):
        lo, hi = min(i, j), max(i, j)
        return slices[:lo] + [merged] + slices[lo + 1:hi] + slices[hi + 1:]
    return slices


class _Scorer:
    # recognizer best_score per stroke set, cached
    def __init__(self, recognizer):
        self.recognizer = recognizer
        self.cache = {}

    def __call__(self, strokes) -> float:
        key = frozenset(s.id for s in strokes)
        v = self.cache.get(key)
        if v is None:
            v = self.cache[key] = recognize_many(self.recognizer, [strokes])[0].best_score
        return v


class _FeatureCache:
    def __init__(self, cfg):
        self.cfg = cfg
        self.rows = {}

    def __call__(self, slices) -> np.ndarray:
        missing = [s for s in slices if s.ids not in self.rows]
        if missing:
            for s, row in zip(missing, slice_base_features(missing, self.cfg)):
                self.rows[s.ids] = row
        return np.array([self.rows[s.ids] for s in slices])


# -- the loop --------------------------------------------------------------------

def repair_loop(slices, crf_model, recognizer, g, theta1: float = 0.6, ratio: float = 0.7,
                mode: str = "both", eps: float = 1e-6, max_iter: int | None = None
                ) -> RepairResult:
    """Alternate CRF labelling and valley repairs until nothing improves.

    Each iteration labels the slices, finds valleys, and tries repair
    sites in order of their most confident neighbour.  A repair is kept
    only if the mean MAP posterior over all slices rises by more than
    ``eps``.  At most ``2 * len(slices)`` iterations run.
    """
    slices = list(slices)
    feats = _FeatureCache(crf_model.config())
    scorer = _Scorer(recognizer)

    def label(sl):
        lab, post = predict(crf_model, sl, base=feats(sl))
        return lab, post, float(post.max(axis=1).mean())

    labels, post, cur = label(slices)
    result = RepairResult(slices, labels, post)
    cap = 2 * len(slices) if max_iter is None else max_iter
    for it in range(cap):
        if len(slices) < 3:
            break
        order = chain_order(slices)
        ring = [slices[k] for k in order]
        best = post[order].max(axis=1)
        valleys = find_valleys(best, [s.angular_width for s in ring],
                               [len(s.strokes) for s in ring], ratio, mode, result.notes)
        if not valleys:
            break
        valleys.sort(key=lambda v: -max(v.scores[-2:]))
        accepted = False
        for v in valleys:
            idx = [slices.index(ring[k]) for k in v.site]
            if v.kind == "over":
                cand = repair_overseg(slices, idx[0], idx[1], recognizer, g, scorer)
                dropped = []
            else:
                cand, dropped = repair_underseg(slices, idx[0], recognizer, g, theta1, scorer)
            if cand == slices:
                continue
            new_labels, new_post, new_score = label(cand)
            ok = new_score > cur + eps
            result.log.append(RepairRecord(it, v.kind, tuple(slices[k].ids for k in idx),
                                           cur, new_score, ok))
            if ok:
                slices, labels, post, cur = cand, new_labels, new_post, new_score
                result.dropped.extend(dropped)
                accepted = True
                break
        if not accepted:
            break
    result.slices, result.labels, result.posteriors = slices, labels, post
    return result
