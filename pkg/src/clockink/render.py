"""Static SVG views of a drawing, its interpreted slices and overwrite layers."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

import numpy as np

GREEN = "#1a9641"
RED = "#d7191c"
BLUE = "#2b83ba"
GHOST = "#c8c8c8"
INK = "#000000"
MARGIN = 10.0
PANEL = 160.0


def _f(v: float) -> str:
    return f"{v:.2f}"


def _as_report(result) -> dict | None:
    if result is None:
        return None
    return result.to_dict() if hasattr(result, "to_dict") else dict(result)


def _polyline(xy: np.ndarray, color: str, width: float = 1.2, opacity: float = 1.0) -> str:
    pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in xy)
    op = f' stroke-opacity="{opacity:g}"' if opacity < 1 else ""
    return (f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width:g}"'
            f' stroke-linecap="round" stroke-linejoin="round"{op}/>')


def _text(x: float, y: float, s: str, color: str = INK, size: float = 9.0) -> str:
    return (f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" font-size="{size:g}"'
            f' fill="{color}">{escape(s)}</text>')


def _svg(width: float, height: float, body: list, title: str = "") -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}"'
            f' viewBox="0 0 {_f(width)} {_f(height)}">')
    parts = ['<?xml version="1.0" encoding="UTF-8"?>', head]
    if title:
        parts.append(f"<title>{escape(title)}</title>")
    parts.append(f'<rect x="0" y="0" width="{_f(width)}" height="{_f(height)}" fill="#ffffff"/>')
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write(svg: str, out) -> str:
    if out is not None:
        Path(out).write_text(svg, encoding="utf-8")
    return svg


def _bbox(xys) -> tuple:
    allp = np.concatenate([np.asarray(p, dtype=float) for p in xys])
    return allp.min(axis=0), allp.max(axis=0)


def render_drawing(d, result=None, gt=None, out=None) -> str:
    """Whole drawing as SVG, with slice boxes when a result is given.

    Slice boxes are green when the slice's stroke set and label match a
    ground-truth slice and red otherwise; without ground truth they are
    drawn in a neutral colour.  Returns the SVG text and writes it to
    ``out`` when given.
    """
    rep = _as_report(result)
    xy = {s.id: s.xy for s in d.strokes}
    if not xy:
        return _write(_svg(2 * MARGIN, 2 * MARGIN, []), out)
    lo, hi = _bbox(xy.values())
    off = MARGIN - lo
    body = [_polyline(p + off, INK) for _, p in sorted(xy.items())]
    truth = {s.strokes: s.label for s in gt.slices} if gt is not None else None
    if rep is not None:
        for s in rep["slices"]:
            ids = frozenset(s["strokes"])
            pts = [xy[i] for i in s["strokes"] if i in xy]
            if not pts:
                continue
            a, b = _bbox(pts)
            a, b = a + off - 2.0, b + off + 2.0
            if truth is None:
                color = BLUE
            else:
                color = GREEN if truth.get(ids) == s["label"] else RED
            body.append(f'<rect x="{_f(a[0])}" y="{_f(a[1])}" width="{_f(b[0] - a[0])}"'
                        f' height="{_f(b[1] - a[1])}" fill="none" stroke="{color}"'
                        f' stroke-width="1" class={quoteattr("slice")}/>')
            body.append(_text(a[0], a[1] - 1.5, str(s["label"]), color))
    size = hi - lo + 2 * MARGIN
    return _write(_svg(size[0], size[1], body, title=rep["name"] if rep else ""), out)


def overwrite_sites(rep: dict) -> list:
    """Groups of chronologically ordered stroke-id sets linked by overwrites."""
    events = [(frozenset(e["removed"]), frozenset(e["by"]), e.get("label")) for e in rep["overwrites"]]
    parent = {}

    def find(k):
        while parent.setdefault(k, k) != k:
            k = parent[k]
        return k

    for removed, by, _ in events:
        parent[find(removed)] = find(by)
    groups = {}
    for removed, by, _ in events:
        for k in (removed, by):
            groups.setdefault(find(k), set()).add(k)
    return [sorted(g, key=lambda ids: (min(ids), sorted(ids))) for g in groups.values()]


def render_layers(d, result, out=None) -> str:
    """Chronological panels unpeeling each overwrite site.

    Every panel shows one ink layer in black with the site's earlier
    layers ghosted, annotated with its label: the recognizer's label for
    removed ink and the final label for kept slices.  A drawing without
    overwrites yields a single panel with all kept slices.
    """
    rep = _as_report(result)
    xy = {s.id: s.xy for s in d.strokes}
    removed_label = {frozenset(e["removed"]): e.get("label") for e in rep["overwrites"]}
    kept_label = {frozenset(s["strokes"]): s["label"] for s in rep["slices"]}
    sites = overwrite_sites(rep)
    sites.sort(key=lambda g: min(min(ids) for ids in g))
    panels = []          # (ink layers of the site, index of the current layer)
    for g in sites:
        for k in range(len(g)):
            panels.append((g, k))
    if not panels:
        layer = sorted(kept_label, key=lambda ids: min(ids))
        panels = [([frozenset().union(*layer)] if layer else [frozenset()], 0)]
    body = []
    for pi, (layers, k) in enumerate(panels):
        x0 = pi * (PANEL + MARGIN) + MARGIN
        pts = [xy[i] for ids in layers for i in ids if i in xy]
        body.append(f'<rect x="{_f(x0)}" y="{_f(MARGIN)}" width="{_f(PANEL)}" height="{_f(PANEL)}"'
                    f' fill="none" stroke="#888888" stroke-width="0.5"/>')
        if pts:
            lo, hi = _bbox(pts)
            span = max(float((hi - lo).max()), 1e-6)
            scale = (PANEL - 2 * MARGIN) / span
            off = np.array([x0 + MARGIN, 2 * MARGIN]) - lo * scale
            for j, ids in enumerate(layers[:k + 1]):
                color, width = (INK, 1.5) if j == k else (GHOST, 1.2)
                body.extend(_polyline(xy[i] * scale + off, color, width) for i in sorted(ids) if i in xy)
        cur = layers[k]
        lab = removed_label.get(cur, kept_label.get(cur))
        tag = "removed" if cur in removed_label else "kept"
        if len(panels) == 1 and not sites:
            caption = "no overwrites"
        else:
            caption = f"{pi + 1}: {tag}, label {lab if lab is not None else '?'}"
        body.append(_text(x0 + 3, MARGIN + PANEL - 4, caption))
    width = len(panels) * (PANEL + MARGIN) + MARGIN
    return _write(_svg(width, PANEL + 2 * MARGIN, body, title=rep["name"]), out)
