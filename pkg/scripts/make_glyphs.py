"""Regenerate src/clockink/data/glyphs.json (hand-authored digit polylines).

Unit box, x rightward, y downward, glyph height 1.  Arcs use visual
(y-up) angles in degrees: 90 is the top of the arc.
"""

import json
import math
from pathlib import Path


def arc(cx, cy, rx, ry, a0, a1, n=12):
    out = []
    for k in range(n + 1):
        a = math.radians(a0 + (a1 - a0) * k / n)
        out.append((cx + rx * math.cos(a), cy - ry * math.sin(a)))
    return out


def r(pts):
    return [[round(x, 3), round(y, 3)] for x, y in pts]


def figure_eight(n=32):
    out = []
    for k in range(n + 1):
        s = 0.12 + 2 * math.pi * k / n
        out.append((0.3 + 0.27 * math.sin(2 * s) * 0.9, (1 - math.cos(s)) / 2))
    return out


GLYPHS = {
    "0": [arc(0.3, 0.5, 0.28, 0.5, 100, 460, 24)],
    "1": [[(0.3, 0.0), (0.3, 0.5), (0.3, 1.0)]],
    "2": [arc(0.3, 0.27, 0.26, 0.25, 160, -40, 10) + [(0.02, 1.0), (0.62, 1.0)]],
    "3": [arc(0.3, 0.25, 0.25, 0.24, 150, -90, 10) + arc(0.3, 0.74, 0.28, 0.26, 90, -200, 12)[1:]],
    "4": [[(0.46, 0.0), (0.0, 0.66), (0.64, 0.66)], [(0.46, 0.05), (0.46, 0.5), (0.46, 1.0)]],
    "5": [[(0.12, 0.0), (0.12, 0.44)] + arc(0.32, 0.69, 0.28, 0.3, 130, -200, 14),
          [(0.12, 0.0), (0.62, 0.0)]],
    "6": [[(0.56, 0.03), (0.4, 0.07), (0.24, 0.18), (0.11, 0.38), (0.05, 0.62)]
          + arc(0.31, 0.74, 0.26, 0.25, 180, 540, 20)[1:]],
    "7": [[(0.0, 0.0), (0.62, 0.0), (0.2, 1.0)]],
    "8": [figure_eight()],
    "9": [arc(0.3, 0.28, 0.27, 0.27, 10, 360, 18) + [(0.56, 0.65), (0.52, 1.0)]],
}

if __name__ == "__main__":
    out = {k: [r(s) for s in v] for k, v in GLYPHS.items()}
    path = Path(__file__).resolve().parents[1] / "src" / "clockink" / "data" / "glyphs.json"
    path.write_text(json.dumps({"format": 1, "glyphs": out}, indent=1) + "\n")
    print(path)
