"""Seeded synthetic clock drawings with ground truth.

Each clock is a circle, twelve numerals placed at their clock bearings
and two hands, drawn in a configurable phase order with pen-up gaps.
Optional per-numeral events model the phenomena the interpretation
pipeline has to cope with: delayed and immediate overwriting, augmenting
a "1" with a hat or foot, crossing out and rewriting beside, numerals
split into angularly separate parts, ambiguous (distorted) numerals and
missing numerals.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .model import (Drawing, GroundTruth, GTEvent, GTLayer, GTSlice, Stroke,
                    bearing_point, dump_drawing, dump_ground_truth)

NUMERALS = tuple(range(1, 13))
MULTI_PART = (4, 5, 10, 11, 12)
# numeral -> numerals it is plausibly confused with when drawn badly
CONFUSABLE = {1: (7,), 2: (7, 3), 3: (8, 5), 4: (9,), 5: (6, 3), 6: (5, 8),
              7: (1, 2), 8: (3, 6), 9: (4, 7), 10: (11,), 11: (10,), 12: (2,)}


def _load_glyphs() -> dict:
    text = resources.files("clockink").joinpath("data/glyphs.json").read_text()
    doc = json.loads(text)
    return {k: [np.array(s, dtype=float) for s in v] for k, v in doc["glyphs"].items()}


GLYPHS = _load_glyphs()


@dataclass(frozen=True)
class DigitTemplate:
    """Polyline strokes of one numeral in a unit-height box, in drawing order.

    ``parts`` gives, per stroke, which glyph (0 or 1) of a two-digit
    numeral it belongs to; single-glyph numerals with several strokes use
    the stroke index so the last stroke can be split off.
    """

    numeral: int
    strokes: tuple
    parts: tuple
    width: float


def _make_template(n: int, gap: float = 0.12) -> DigitTemplate:
    text = str(n)
    strokes, parts = [], []
    x = 0.0
    for gi, ch in enumerate(text):
        glyph = GLYPHS[ch]
        lo = min(s[:, 0].min() for s in glyph)
        hi = max(s[:, 0].max() for s in glyph)
        for si, s in enumerate(glyph):
            strokes.append(s - [lo - x, 0.0])
            parts.append(gi if len(text) > 1 else si)
        x += (hi - lo) + gap
    width = x - gap
    return DigitTemplate(n, tuple(strokes), tuple(parts), width)


TEMPLATES = {n: _make_template(n) for n in NUMERALS}


@dataclass
class SynthConfig:
    """Generator parameters.  Lengths are fractions of the clock radius.

    Event probabilities apply per numeral and may be a single float or a
    ``{numeral: probability}`` mapping.
    """

    seed: int = 0
    cohort: str = "healthy"
    clock_radius: float = 100.0
    radius_var: float = 0.1
    draw_circle: bool = True
    draw_hands: bool = True
    circle_arcs: int = 1
    jitter_sigma: float = 0.008
    point_noise: float = 0.0015
    angle_noise_deg: float = 2.0
    radial_noise: float = 0.02
    digit_radius: float = 0.78
    digit_scale: float = 0.16
    digit_scale_var: float = 0.06
    rotation_deg: float = 4.0
    slant: float = 0.08
    glyph_gap_sd: float = 0.2        # spacing spread between the glyphs of 10, 11, 12 (digit heights)
    p_missing: object = 0.0
    p_distort: object = 0.0
    distort_strength: float = 0.12
    p_split: object = 0.0
    split_deg: tuple = (3.0, 5.0)
    split_pause_ms: tuple = (1500.0, 3000.0)
    p_overwrite: object = 0.0
    p_immediate: float = 0.0
    p_overwrite_same: float = 0.2
    overwrite_with: dict = field(default_factory=dict)
    immediate_offset: float = 0.25
    beside_gap: float = 0.15         # clearance between scratch and rewrite, in digit heights
    p_crossout: object = 0.0
    p_augment: object = 0.0
    p_chain: object = 0.0
    chain_over: dict = field(default_factory=dict)
    gap_intra_ms: tuple = (220.0, 0.35)
    gap_inter_ms: tuple = (900.0, 0.4)
    pause_ms: tuple = (10000.0, 15000.0)
    correction_pause_ms: tuple = (1200.0, 3000.0)
    pen_speed: float = 0.09
    sample_ms: float = 13.3
    order: tuple = ("circle", "digits", "hands")
    p_start_at_twelve: float = 0.3

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name.startswith("p_"):
                v = getattr(self, f.name)
                vals = v.values() if isinstance(v, dict) else [v]
                if any(not 0.0 <= float(p) <= 1.0 for p in vals):
                    raise ValueError(f"{f.name} must lie in [0, 1]")
        for name in ("jitter_sigma", "point_noise", "angle_noise_deg", "radial_noise",
                     "digit_scale_var", "rotation_deg", "distort_strength"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        self.overwrite_with = {int(k): int(v) for k, v in self.overwrite_with.items()}
        self.chain_over = {int(k): int(v) for k, v in self.chain_over.items()}
        for name in ("p_missing", "p_distort", "p_split", "p_overwrite", "p_crossout",
                     "p_augment", "p_chain"):
            v = getattr(self, name)
            if isinstance(v, dict):
                setattr(self, name, {int(k): float(p) for k, p in v.items()})
        self.order = tuple(self.order)
        self.split_deg = tuple(self.split_deg)
        self.split_pause_ms = tuple(self.split_pause_ms)

    def prob(self, name: str, numeral: int) -> float:
        v = getattr(self, name)
        if isinstance(v, dict):
            return float(v.get(numeral, v.get(str(numeral), 0.0)))
        return float(v)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
            elif isinstance(v, dict):
                out[k] = {str(a): b for a, b in v.items()}
        return out


def load_preset(name: str) -> dict:
    """Raw preset document: either config overrides or ``{"mixture": ...}``."""
    path = resources.files("clockink").joinpath(f"data/presets/{name}.json")
    if not path.is_file():
        raise ValueError(f"unknown preset {name!r}")
    return json.loads(path.read_text())


def preset_config(name: str, seed: int = 0) -> SynthConfig:
    doc = load_preset(name)
    if "mixture" in doc:
        raise ValueError(f"preset {name!r} is a mixture; use generate_corpus")
    return SynthConfig.from_dict({**doc, "seed": seed})


# -- stroke construction -----------------------------------------------------

def _densify(pts: np.ndarray, step: float) -> np.ndarray:
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        return pts[:1].copy()
    n = max(2, int(math.ceil(s[-1] / step)) + 1)
    q = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(q, s, pts[:, 0]), np.interp(q, s, pts[:, 1])])


def _smooth_noise(rng, n: int, sigma: float, width: float = 10.0) -> np.ndarray:
    # Gaussian-filtered white noise: a slow wobble along the stroke, not a scribble
    if sigma <= 0 or n == 0:
        return np.zeros((n, 2))
    half = int(math.ceil(3 * width))
    raw = rng.normal(0.0, 1.0, (n + 2 * half, 2))
    k = np.exp(-0.5 * (np.arange(-half, half + 1) / width) ** 2)
    k /= np.sqrt((k ** 2).sum())
    sm = np.column_stack([np.convolve(raw[:, 0], k, "valid"), np.convolve(raw[:, 1], k, "valid")])
    return sm[:n] * sigma


class _Clock:
    """Mutable builder for one drawing."""

    def __init__(self, cfg: SynthConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.R = cfg.clock_radius * (1.0 + rng.uniform(-cfg.radius_var, cfg.radius_var))
        self.center = np.array([200.0, 200.0]) + rng.normal(0.0, 5.0, 2)

    # geometry of one numeral instance
    def glyph_strokes(self, numeral: int, center, h: float, *, distort: bool = False,
                      box=None) -> list:
        cfg, rng = self.cfg, self.rng
        tpl = TEMPLATES[numeral]
        strokes = [s.copy() for s in tpl.strokes]
        width = tpl.width
        if numeral >= 10 and cfg.glyph_gap_sd > 0:
            extra = max(rng.normal(0.0, cfg.glyph_gap_sd), -0.08)
            strokes = [st + [extra * k, 0.0] for st, k in zip(strokes, tpl.parts)]
            width += extra
        mid = np.array([width / 2.0, 0.5])
        rot = math.radians(rng.normal(0.0, cfg.rotation_deg))
        shear = rng.normal(0.0, cfg.slant)
        c, s_ = math.cos(rot), math.sin(rot)
        A = np.array([[c, -s_], [s_, c]]) @ np.array([[1.0, -shear], [0.0, 1.0]])
        out = []
        jitter = cfg.jitter_sigma * self.R
        for st in strokes:
            dense = _densify(st, 0.05)
            p = (dense - mid) @ A.T * h
            sigma = jitter + (cfg.distort_strength * h if distort else 0.0)
            p = p + _smooth_noise(rng, len(p), sigma)
            out.append(p)
        if box is not None:
            out = self._fit_box(out, box)
        else:
            out = [p + center for p in out]
        return out

    def _fit_box(self, strokes: list, box) -> list:
        lo, hi = box
        allp = np.concatenate(strokes)
        slo, shi = allp.min(axis=0), allp.max(axis=0)
        span = np.maximum(shi - slo, 1e-6)
        target = np.maximum(hi - lo, 1e-6)
        # a thin stroke set keeps its own width rather than being stretched
        scale = np.where(span > 0.2 * target, target / span, target[1] / span[1])
        scale = scale * self.rng.uniform(0.95, 1.05, 2)
        mid_src = (slo + shi) / 2.0
        mid_dst = (lo + hi) / 2.0 + self.rng.normal(0.0, 0.03, 2) * target
        return [(p - mid_src) * scale + mid_dst for p in strokes]

    def numeral_center(self, numeral: int) -> np.ndarray:
        cfg, rng = self.cfg, self.rng
        deg = 30.0 * numeral + rng.normal(0.0, cfg.angle_noise_deg)
        r = self.R * (cfg.digit_radius + rng.normal(0.0, cfg.radial_noise))
        return bearing_point(self.center, r, deg)

    def beside(self, strokes: list, scratch: list, center, h: float) -> list:
        """Shift ``strokes`` toward the clock centre until clear of ``scratch``."""
        u = self.center - np.asarray(center)
        u = u / np.linalg.norm(u)
        old = np.concatenate(scratch) @ u
        new = np.concatenate(strokes) @ u
        shift = old.max() - new.min() + self.cfg.beside_gap * h
        return [p + shift * u for p in strokes]

    def digit_height(self) -> float:
        cfg = self.cfg
        return self.R * cfg.digit_scale * max(0.4, 1.0 + self.rng.normal(0.0, cfg.digit_scale_var))

    def rotate_about_center(self, pts: np.ndarray, deg: float) -> np.ndarray:
        # positive deg moves points clockwise on the clock face (y-down frame)
        r = math.radians(deg)
        c, s = math.cos(r), math.sin(r)
        d = pts - self.center
        return np.column_stack([d[:, 0] * c - d[:, 1] * s, d[:, 0] * s + d[:, 1] * c]) + self.center

    def scratch(self, box) -> list:
        lo, hi = box
        pad = 0.1 * (hi - lo)
        lo, hi = lo - pad, hi + pad
        passes = int(self.rng.integers(5, 9))
        ys = np.linspace(lo[1], hi[1], passes)
        pts = []
        for i, y in enumerate(ys):
            x = hi[0] if i % 2 else lo[0]
            pts.append((x + self.rng.normal(0, 0.03) * (hi[0] - lo[0]), y))
        return [_densify(np.array(pts), 1.0)]

    def circle(self) -> list:
        cfg, rng = self.cfg, self.rng
        e = rng.uniform(0.0, 0.03)
        phi = rng.uniform(0.0, math.pi)
        start = rng.uniform(-40.0, 40.0)
        arcs = max(1, int(cfg.circle_arcs))
        sweep = 365.0 / arcs
        out = []
        for k in range(arcs):
            a0 = start + k * sweep
            t = np.radians(np.linspace(a0, a0 + sweep + (0 if arcs > 1 else 5.0), 120))
            u = self.R * (1 + e) * np.sin(t)
            v = -self.R * (1 - e) * np.cos(t)
            c, s = math.cos(phi), math.sin(phi)
            p = np.column_stack([u * c - v * s, u * s + v * c]) + self.center
            p = p + _smooth_noise(rng, len(p), 0.004 * self.R, 6.0)
            out.append(p)
        return out

    def hands(self) -> list:
        rng = self.rng
        out = []
        for deg, frac in ((330.0 + rng.normal(0, 6), 0.45), (60.0 + rng.normal(0, 6), 0.65)):
            start = self.center + rng.normal(0.0, 0.02 * self.R, 2)
            end = bearing_point(self.center, frac * self.R * rng.uniform(0.9, 1.1), deg)
            out.append(_densify(np.array([start, end]), 1.0))
        return out


@dataclass
class _Action:
    strokes: list
    kind: str                 # circle | hand | digit | overwritten | augment | noise
    label: int | None = None
    immediate: bool = False   # drawn right after the previous action
    tag: object = None
    pauses: dict = field(default_factory=dict)   # stroke index -> pen-up gap before it (ms)


def _render(actions: list, cfg: SynthConfig, rng, t0: float, first_gap=None,
            radius: float = 100.0):
    """Assign timestamps; returns [(points (n,3), action_index), ...] and end time."""
    out = []
    t = t0
    for ai, act in enumerate(actions):
        if ai > 0 or first_gap is not None:
            if act.immediate:
                t += rng.lognormal(math.log(cfg.gap_intra_ms[0]), cfg.gap_intra_ms[1])
            elif ai == 0:
                t += first_gap
            else:
                t += rng.lognormal(math.log(cfg.gap_inter_ms[0]), cfg.gap_inter_ms[1])
        for si, ctrl in enumerate(act.strokes):
            if si in act.pauses:
                t += act.pauses[si]
            elif si > 0:
                t += rng.lognormal(math.log(cfg.gap_intra_ms[0]), cfg.gap_intra_ms[1])
            step = cfg.pen_speed * cfg.sample_ms
            pts = _densify(ctrl, step)
            pts = pts + rng.normal(0.0, cfg.point_noise * radius, pts.shape)
            ts = t + cfg.sample_ms * np.arange(len(pts))
            out.append((np.column_stack([np.round(pts, 2), np.round(ts)]), ai))
            t = float(np.round(ts[-1]))
    return out, t


def generate_clock(cfg: SynthConfig, seed: int | None = None):
    """Generate one ``(Drawing, GroundTruth)`` pair, deterministic per seed."""
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    clk = _Clock(cfg, rng)

    digit_actions: list = []
    corrections: list = []      # lists of actions drawn after the numeral phase
    events: list = []           # (kind, numeral, removed actions, by actions, drawn label)
    final: dict = {}            # numeral -> actions forming the final-intent slice

    order = list(NUMERALS)
    if rng.random() < cfg.p_start_at_twelve:
        order = [12] + order[:-1]

    for n in order:
        if rng.random() < cfg.prob("p_missing", n):
            events.append(("missing", n, [], [], None))
            continue
        center = clk.numeral_center(n)
        h = clk.digit_height()
        distort = rng.random() < cfg.prob("p_distort", n)
        drawn = n
        if distort and rng.random() < 0.5:
            drawn = int(rng.choice(CONFUSABLE[n]))
        if distort:
            events.append(("distort", n, [], [], drawn))

        kind = None
        for name, ok in (("p_chain", n != 1), ("p_overwrite", n != 1), ("p_crossout", n != 1),
                         ("p_augment", n == 1), ("p_split", n in MULTI_PART)):
            if ok and rng.random() < cfg.prob(name, n):
                kind = name[2:]
                break

        if kind == "overwrite":
            m = cfg.overwrite_with.get(n)
            if m is None:
                if rng.random() < cfg.p_overwrite_same:
                    m = n
                else:
                    m = int(rng.choice([k for k in NUMERALS if k not in (1, n)]))
            first = _Action(clk.glyph_strokes(m, center, h), "overwritten", m)
            box = _bbox(first.strokes)
            immediate = rng.random() < cfg.p_immediate
            if immediate:
                shift = (box[1][0] - box[0][0]) * cfg.immediate_offset * rng.choice([-1, 1])
                box = (box[0] + [shift, 0.0], box[1] + [shift, 0.0])
                grow = 0.05 * (box[1] - box[0])
                box = (box[0] - grow, box[1] + grow)
            second = _Action(clk.glyph_strokes(drawn, center, h, distort=distort, box=box),
                             "digit", n, immediate=immediate)
            digit_actions.append(first)
            if immediate:
                digit_actions.append(second)
            else:
                corrections.append([second])
            final[n] = [second]
            events.append(("immediate_overwrite" if immediate else "delayed_overwrite",
                           n, [first], [second], m))
        elif kind == "chain":
            first = _Action(clk.glyph_strokes(n, center, h), "overwritten", n)
            box = _bbox(first.strokes)
            m2 = cfg.chain_over.get(n) or int(rng.choice([k for k in NUMERALS if k not in (1, n)]))
            over = _Action(clk.glyph_strokes(m2, center, h, box=box), "overwritten", m2)
            scr = _Action(clk.scratch(_bbox(first.strokes + over.strokes)), "noise")
            rew = _Action(clk.beside(clk.glyph_strokes(drawn, center, h, distort=distort),
                                     scr.strokes, center, h), "digit", n)
            digit_actions.append(first)
            corrections.append([over])
            corrections.append([scr, rew])
            final[n] = [rew]
            events.append(("chain", n, [first, over], [scr], n))
        elif kind == "crossout":
            m = int(rng.choice([k for k in NUMERALS if k not in (1,)]))
            first = _Action(clk.glyph_strokes(m, center, h), "overwritten", m)
            scr = _Action(clk.scratch(_bbox(first.strokes)), "noise")
            rew = _Action(clk.beside(clk.glyph_strokes(drawn, center, h, distort=distort),
                                     scr.strokes, center, h), "digit", n)
            digit_actions.append(first)
            corrections.append([scr, rew])
            final[n] = [rew]
            events.append(("crossout", n, [first], [scr], m))
        elif kind == "augment":
            one = _Action(clk.glyph_strokes(drawn, center, h, distort=distort), "digit", n)
            top = max(one.strokes, key=len)
            lo, hi = _bbox(one.strokes)
            extra = []
            which = rng.integers(0, 3)      # 0 hat, 1 foot, 2 both
            if which in (0, 2):
                tip = top[np.argmin(top[:, 1])]
                extra.append(_densify(np.array([tip, tip + [-0.28 * h, 0.28 * h]]), 1.0))
            if which in (1, 2):
                base = top[np.argmax(top[:, 1])]
                extra.append(_densify(np.array([base - [0.25 * h, 0], base + [0.25 * h, 0]]), 1.0))
            aug = _Action(extra, "augment", n)
            digit_actions.append(one)
            corrections.append([aug])
            final[n] = [one, aug]
            events.append(("augment", n, [], [aug], n))
        elif kind == "split":
            strokes = clk.glyph_strokes(drawn, center, h, distort=distort)
            parts = TEMPLATES[drawn].parts
            last = max(parts)
            spread = rng.uniform(*cfg.split_deg) / 2.0
            strokes = [clk.rotate_about_center(p, spread if parts[i] == last else -spread)
                       for i, p in enumerate(strokes)]
            act = _Action(strokes, "digit", n)
            pause = rng.uniform(*cfg.split_pause_ms)
            if pause > 0 and parts.index(last) > 0:
                act.pauses = {parts.index(last): pause}
            digit_actions.append(act)
            final[n] = [act]
            events.append(("split", n, [act], [], drawn))
        else:
            act = _Action(clk.glyph_strokes(drawn, center, h, distort=distort), "digit", n)
            digit_actions.append(act)
            final[n] = [act]

    rng.shuffle(corrections)
    circle = [_Action([s], "circle") for s in clk.circle()] if cfg.draw_circle else []
    hands = [_Action([s], "hand") for s in clk.hands()] if cfg.draw_hands else []

    phases = {"circle": [circle], "digits": [digit_actions] + corrections, "hands": [hands]}
    rendered = []          # (points, action)
    t = 0.0
    started = False
    for phase in cfg.order:
        for gi, group in enumerate(phases[phase]):
            if not group:
                continue
            if not started:
                gap = None
            elif phase == "digits" and gi > 0:
                gap = rng.uniform(*cfg.correction_pause_ms)
            else:
                gap = rng.uniform(*cfg.pause_ms)
            pts, t = _render(group, cfg, rng, t, first_gap=gap, radius=clk.R)
            rendered.extend((p, group[ai]) for p, ai in pts)
            started = True

    strokes = [Stroke(i, p) for i, (p, _) in enumerate(rendered)]
    ids_of: dict = {}
    for sid, (_, act) in enumerate(rendered):
        ids_of.setdefault(id(act), []).append(sid)

    def ids(acts):
        return frozenset(i for a in acts for i in ids_of.get(id(a), []))

    roles = {}
    for sid, (_, act) in enumerate(rendered):
        roles[sid] = {"augment": "digit"}.get(act.kind, act.kind)
    slices = tuple(GTSlice(n, ids(final[n])) for n in sorted(final))
    layer_acts = [a for a in digit_actions + [a for g in corrections for a in g]]
    layer_acts.sort(key=lambda a: min(ids_of[id(a)]))
    layers = tuple(GTLayer(ids([a]), a.kind, a.label)
                   for a in layer_acts)
    gt_events = tuple(GTEvent(k, n, ids(rem), ids(by), lab) for k, n, rem, by, lab in events)
    meta = {"cohort": cfg.cohort, "seed": int(seed)}
    return Drawing(tuple(strokes), meta), GroundTruth(slices, roles, layers, gt_events)


def _bbox(strokes: list):
    allp = np.concatenate(strokes)
    return allp.min(axis=0), allp.max(axis=0)


def numeral_samples(cfg: SynthConfig, per_class: int, seed: int = 0) -> list:
    """Isolated, properly segmented numerals: ``[(strokes, label), ...]``."""
    rng = np.random.default_rng(seed)
    clk = _Clock(cfg, rng)
    out = []
    for n in NUMERALS:
        for _ in range(per_class):
            center = clk.numeral_center(n)
            act = _Action(clk.glyph_strokes(n, center, clk.digit_height()), "digit", n)
            pts, _ = _render([act], cfg, rng, 0.0, radius=clk.R)
            out.append((tuple(Stroke(i, p) for i, (p, _) in enumerate(pts)), n))
    return out


# -- corpora -------------------------------------------------------------------

def _drawing_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def corpus_configs(preset, n: int, seed: int) -> list:
    """Per-drawing ``SynthConfig`` list for a preset name, preset doc or config."""
    if isinstance(preset, SynthConfig):
        return [dataclasses.replace(preset, seed=_drawing_seed(seed, i)) for i in range(n)]
    doc = load_preset(preset) if isinstance(preset, str) else dict(preset)
    if "mixture" not in doc:
        base = SynthConfig.from_dict({k: v for k, v in doc.items() if k != "seed"})
        return [dataclasses.replace(base, seed=_drawing_seed(seed, i)) for i in range(n)]
    names = sorted(doc["mixture"])
    weights = np.array([doc["mixture"][k] for k in names], dtype=float)
    weights /= weights.sum()
    bases = {k: SynthConfig.from_dict(load_preset(k)) for k in names}
    out = []
    for i in range(n):
        s = _drawing_seed(seed, i)
        pick = names[int(np.random.default_rng(s).choice(len(names), p=weights))]
        out.append(dataclasses.replace(bases[pick], seed=s))
    return out


def generate_corpus(preset, n: int, out_dir, seed: int = 0) -> list:
    """Write ``n`` drawings, their ``.gt.json`` sidecars and ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, cfg in enumerate(corpus_configs(preset, n, seed)):
        d, gt = generate_clock(cfg)
        name = f"clock_{i:04d}"
        (out / f"{name}.json").write_text(dump_drawing(d), encoding="utf-8")
        (out / f"{name}.gt.json").write_text(dump_ground_truth(gt), encoding="utf-8")
        files.append(name)
    manifest = {"format": 1, "preset": preset if isinstance(preset, str) else "custom",
                "seed": seed, "n": n, "files": files}
    if isinstance(preset, SynthConfig):
        manifest["config"] = preset.to_dict()
    elif isinstance(preset, dict):
        manifest["config"] = preset
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return [out / f"{f}.json" for f in files]


def generate_drawings(preset, n: int, seed: int = 0) -> list:
    """In-memory variant of :func:`generate_corpus`: ``[(name, Drawing, GroundTruth)]``."""
    return [(f"clock_{i:04d}", *generate_clock(cfg))
            for i, cfg in enumerate(corpus_configs(preset, n, seed))]
