"""Ellipse fitting, convex hulls and convex-polygon overlap."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError

CONTAINMENT_TOL = 1e-9


@dataclass(frozen=True)
class Ellipse:
    center: tuple
    a: float
    b: float
    phi: float

    def __post_init__(self):
        if not (self.a >= self.b > 0):
            raise ValueError(f"need a >= b > 0, got a={self.a}, b={self.b}")

    def sample(self, n: int, t0: float = 0.0, t1: float = 2 * math.pi) -> np.ndarray:
        t = np.linspace(t0, t1, n, endpoint=False)
        c, s = math.cos(self.phi), math.sin(self.phi)
        u, v = self.a * np.cos(t), self.b * np.sin(t)
        return np.column_stack([self.center[0] + u * c - v * s, self.center[1] + u * s + v * c])

    def normalized_radius(self, xy: np.ndarray) -> np.ndarray:
        """``sqrt((u/a)^2 + (v/b)^2)`` in the ellipse frame; 1 on the curve."""
        d = np.asarray(xy, dtype=float).reshape(-1, 2) - np.asarray(self.center)
        c, s = math.cos(self.phi), math.sin(self.phi)
        u = d[:, 0] * c + d[:, 1] * s
        v = -d[:, 0] * s + d[:, 1] * c
        return np.hypot(u / self.a, v / self.b)


def fit_ellipse(points) -> Ellipse:
    """Direct least-squares ellipse fit.

    Minimises the algebraic distance of a conic subject to the ellipse
    constraint ``4AC - B^2 = 1``, using the numerically stable block
    decomposition (scatter matrix split into quadratic and linear parts).
    Coordinates are centred and scaled before fitting.

    Raises
    ------
    FitError
        Fewer than 6 points, collinear points, or no elliptical solution.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 6:
        raise FitError(f"need at least 6 points, got {len(pts)}")
    mean = pts.mean(axis=0)
    scale = math.sqrt(((pts - mean) ** 2).sum(axis=1).mean())
    if not scale > 0:
        raise FitError("all points coincide")
    x, y = ((pts - mean) / scale).T

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    if np.linalg.cond(s3) > 1e12:
        raise FitError("degenerate configuration (collinear points)")
    t = -np.linalg.solve(s3, s2.T)
    m = s1 + s2 @ t
    m = np.vstack([m[2] / 2.0, -m[1], m[0] / 2.0])
    w, v = np.linalg.eig(m)
    w, v = np.real(w), np.real(v)
    cond = 4 * v[0] * v[2] - v[1] ** 2
    ok = np.flatnonzero(cond > 0)
    if len(ok) == 0:
        raise FitError("no elliptical solution")
    k = ok[np.argmin(np.abs(w[ok]))]
    a1 = v[:, k]
    A, B, C = a1
    D, E, F = t @ a1

    M = np.array([[2 * A, B], [B, 2 * C]])
    try:
        x0, y0 = np.linalg.solve(M, [-D, -E])
    except np.linalg.LinAlgError as exc:
        raise FitError("singular conic") from exc
    f0 = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 + D * x0 + E * y0 + F
    lam, vec = np.linalg.eigh(np.array([[A, B / 2], [B / 2, C]]))
    with np.errstate(divide="ignore", invalid="ignore"):
        axes = -f0 / lam
    if not np.all(np.isfinite(axes)) or np.any(axes <= 0):
        raise FitError("fitted conic is not a real ellipse")
    axes = np.sqrt(axes) * scale
    major = int(np.argmax(axes))
    a, b = float(axes[major]), float(axes[1 - major])
    phi = math.atan2(vec[1, major], vec[0, major]) % math.pi
    cx, cy = x0 * scale + mean[0], y0 * scale + mean[1]
    return Ellipse((float(cx), float(cy)), a, b, float(phi))


# -- convex polygons -------------------------------------------------------

def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Convex polygon with vertices in positive (shoelace) orientation."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise ValueError("a polygon needs at least 3 vertices")
        if _signed_area(v) < 0:
            v = v[::-1].copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def bounds(self) -> tuple:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean membership mask for an ``(n, 2)`` array (boundary counts)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        rel = pts[:, None, :] - v[None, :, :]
        cross = e[None, :, 0] * rel[:, :, 1] - e[None, :, 1] * rel[:, :, 0]
        return np.all(cross >= -1e-12, axis=1)


def _monotone_chain(pts: np.ndarray) -> np.ndarray:
    pts = np.unique(pts, axis=0)
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def convex_hull(points, eps_buf: float = 0.0) -> ConvexPolygon:
    """Convex hull of a point set, inflated when it is (nearly) degenerate.

    A hull whose area is below ``eps_buf * max(diameter, 2 * eps_buf)``
    (i.e. thinner than the buffer on average) is rebuilt from squares of
    side ``2 * eps_buf`` centred on every input point, so single dots and
    straight "1" strokes still get a usable area.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("convex hull of an empty point set")
    hull = _monotone_chain(pts)
    area = _signed_area(hull) if len(hull) >= 3 else 0.0
    if eps_buf > 0:
        span = hull.max(axis=0) - hull.min(axis=0)
        diam = float(np.hypot(*span))
        if area < eps_buf * max(diam, 2 * eps_buf):
            offs = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float) * eps_buf
            hull = _monotone_chain((hull[:, None, :] + offs[None]).reshape(-1, 2))
            area = _signed_area(hull)
    if len(hull) < 3 or area <= 0:
        raise ValueError("degenerate hull; pass eps_buf > 0 to inflate it")
    return ConvexPolygon(hull)


def _clip(subject: list, a, b) -> list:
    # keep the part of ``subject`` left of the directed edge a->b
    out = []
    ex, ey = b[0] - a[0], b[1] - a[1]

    def side(p):
        return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

    n = len(subject)
    for i in range(n):
        cur, nxt = subject[i], subject[(i + 1) % n]
        sc, sn = side(cur), side(nxt)
        if sc >= 0:
            out.append(cur)
        if (sc >= 0) != (sn >= 0):
            t = sc / (sc - sn)
            out.append((cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])))
    return out


def intersection_polygon(p1: ConvexPolygon, p2: ConvexPolygon) -> list:
    ax0, ay0, ax1, ay1 = p1.bounds
    bx0, by0, bx1, by1 = p2.bounds
    if ax0 > bx1 or bx0 > ax1 or ay0 > by1 or by0 > ay1:
        return []
    poly = [tuple(v) for v in p1.vertices.tolist()]
    clip = p2.vertices.tolist()
    for i in range(len(clip)):
        poly = _clip(poly, clip[i], clip[(i + 1) % len(clip)])
        if not poly:
            break
    return poly


def intersection_area(p1: ConvexPolygon, p2: ConvexPolygon) -> float:
    """Area of the intersection of two convex polygons (0 when disjoint)."""
    poly = intersection_polygon(p1, p2)
    if len(poly) < 3:
        return 0.0
    return max(0.0, _signed_area(np.array(poly)))


def hull_overlap(h1: ConvexPolygon, h2: ConvexPolygon) -> float:
    """Mutual overlap fraction of two hulls.

    When one hull contains the other the result is the smaller area as a
    fraction of the larger; otherwise the intersection as a fraction of
    either hull, whichever is larger.
    """
    A, B = h1.area, h2.area
    I = intersection_area(h1, h2)
    if I <= 0:
        return 0.0
    lo, hi = min(A, B), max(A, B)
    if I >= lo - CONTAINMENT_TOL * hi:
        return lo / hi
    return min(1.0, max(I / A, I / B))


def overlap(a, b, eps_buf: float) -> float:
    """:func:`hull_overlap` of two slices (anything exposing ``.xy``) or hulls."""
    ha = a if isinstance(a, ConvexPolygon) else convex_hull(a.xy, eps_buf)
    hb = b if isinstance(b, ConvexPolygon) else convex_hull(b.xy, eps_buf)
    return hull_overlap(ha, hb)


def path_length(xy: np.ndarray) -> float:
    d = np.diff(np.asarray(xy, dtype=float).reshape(-1, 2), axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def circularity(stroke) -> float:
    """Closure times ellipse-fit quality, in [0, 1].

    closure = 1 - endpoint gap / path length; fit = 1 - RMS of the
    normalised radial residual about the best-fit ellipse.  Strokes with
    fewer than 6 points, or whose points admit no ellipse, score 0.
    """
    xy = stroke.xy if hasattr(stroke, "xy") else np.asarray(stroke, dtype=float)
    if len(xy) < 6:
        return 0.0
    length = path_length(xy)
    if length <= 0:
        return 0.0
    gap = float(np.hypot(*(xy[-1] - xy[0])))
    closure = min(1.0, max(0.0, 1.0 - gap / length))
    try:
        e = fit_ellipse(xy)
    except FitError:
        return 0.0
    resid = math.sqrt(float(np.mean((e.normalized_radius(xy) - 1.0) ** 2)))
    fit = min(1.0, max(0.0, 1.0 - resid))
    return closure * fit
