"""Independent reference computations used by the tests."""

import itertools

import numpy as np
from scipy.special import logsumexp

from clockink.geometry import convex_hull


def random_convex(rng, center=None, radius=1.0, n=8):
    c = rng.uniform(-1, 1, 2) if center is None else np.asarray(center, dtype=float)
    pts = c + rng.normal(0.0, radius, (n, 2))
    return convex_hull(pts)


def inside(poly, pts):
    """Half-plane membership computed directly from the vertex list."""
    v = poly.vertices
    ok = np.ones(len(pts), dtype=bool)
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        ok &= (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0]) >= 0
    return ok


def mc_intersection(p1, p2, n, rng):
    """Monte-Carlo area of p1 & p2, sampling the overlap of their bounding boxes."""
    lo = np.maximum(p1.vertices.min(0), p2.vertices.min(0))
    hi = np.minimum(p1.vertices.max(0), p2.vertices.max(0))
    if np.any(hi <= lo):
        return 0.0
    pts = rng.uniform(lo, hi, (n, 2))
    frac = np.mean(inside(p1, pts) & inside(p2, pts))
    return float(frac * np.prod(hi - lo))


def brute_force_chain(W, T, X):
    """Marginals, log-partition and best sequence by enumerating every labelling."""
    L, n = W.shape[0], len(X)
    psi = X @ W.T
    seqs = list(itertools.product(range(L), repeat=n))
    scores = np.array([psi[np.arange(n), s].sum() + sum(T[a, b] for a, b in zip(s, s[1:]))
                       for s in seqs])
    logZ = logsumexp(scores)
    p = np.exp(scores - logZ)
    marg = np.zeros((n, L))
    for s, w in zip(seqs, p):
        marg[np.arange(n), s] += w
    best = max(range(len(seqs)), key=lambda k: (scores[k], [-v for v in seqs[k]]))
    return marg, float(logZ), np.array(seqs[best])


def central_difference(f, theta, h=1e-5):
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g
