"""Linear-chain CRF over angularly ordered slices."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ModelMismatchError, TrainingError
from .model import bearing_diff
from .recognizer import GRID, N_CHANNELS, extract_features

log = logging.getLogger(__name__)

MODEL_FORMAT = 1
N_LABELS = 12


@dataclass(frozen=True)
class CrfConfig:
    concat: bool = True          # append circular neighbours' features
    ctx: bool = True             # angular position and stroke count
    wrap_features: bool = True   # neighbours wrap across the chain break
    downsample: bool = False     # 2x2 average-pool the feature images
    image_norm: float = 0.0      # rescale the image block to this L2 norm; 0 keeps it raw
    lam: float = 0.01
    lr: float = 0.5
    epochs: int = 300
    tol: float = 1e-7            # stop when the loss improves by less than this
    seed: int = 0

    def base_dim(self) -> int:
        g = GRID // 2 if self.downsample else GRID
        return N_CHANNELS * g * g + (2 if self.ctx else 0) + 1

    def node_dim(self) -> int:
        return self.base_dim() * (3 if self.concat else 1)

    def feature_dict(self) -> dict:
        return {"concat": self.concat, "ctx": self.ctx, "wrap_features": self.wrap_features,
                "downsample": self.downsample, "image_norm": self.image_norm}


@dataclass
class CrfModel:
    W: np.ndarray                 # (L, D) node weights
    T: np.ndarray                 # (L, L) transition weights, T[prev, next]
    lam: float = 0.01
    features: dict = field(default_factory=dict)
    loss_curve: list = field(default_factory=list)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.T = np.asarray(self.T, dtype=float)
        L = self.W.shape[0]
        if self.W.ndim != 2 or self.T.shape != (L, L):
            raise ModelMismatchError(f"inconsistent shapes W{self.W.shape} T{self.T.shape}")

    @property
    def n_labels(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    @classmethod
    def zeros(cls, L: int, D: int, lam: float = 0.01, features=None) -> "CrfModel":
        return cls(np.zeros((L, D)), np.zeros((L, L)), lam, dict(features or {}))

    def params(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.T.ravel()])

    def with_params(self, theta: np.ndarray) -> "CrfModel":
        L, D = self.W.shape
        return CrfModel(theta[:L * D].reshape(L, D).copy(), theta[L * D:].reshape(L, L).copy(),
                        self.lam, dict(self.features))

    def config(self) -> CrfConfig:
        return CrfConfig(lam=self.lam, **self.features)

    def to_dict(self) -> dict:
        return {"format": MODEL_FORMAT, "kind": "crf", "L": self.n_labels, "D": self.dim,
                "lam": self.lam, "features": self.features,
                "W": self.W.tolist(), "T": self.T.tolist(), "loss_curve": self.loss_curve}

    @classmethod
    def from_dict(cls, d: dict) -> "CrfModel":
        if d.get("format") != MODEL_FORMAT or d.get("kind") != "crf":
            raise ModelMismatchError("not a version-1 CRF model")
        m = cls(np.array(d["W"], dtype=float).reshape(d["L"], d["D"]),
                np.array(d["T"], dtype=float), float(d["lam"]), dict(d.get("features", {})),
                list(d.get("loss_curve", [])))
        return m

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "CrfModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ChainInstance:
    """Node features in chain order; ``order[k]`` is the slice index of node k."""

    X: np.ndarray
    order: np.ndarray
    labels: np.ndarray | None = None     # label indices 0..L-1, chain order

    def __len__(self):
        return len(self.X)


# -- features and chain construction ------------------------------------------

def _pool(img: np.ndarray) -> np.ndarray:
    c, h, w = img.shape
    return img.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))


def slice_base_features(slices, cfg: CrfConfig) -> np.ndarray:
    """Per-slice base vectors: image block, optional context, bias."""
    rows = []
    for s in slices:
        img = extract_features(s.strokes)
        if cfg.downsample:
            img = _pool(img)
        v = img.ravel()
        if cfg.image_norm > 0:
            nrm = np.linalg.norm(v)
            v = v * (cfg.image_norm / nrm) if nrm > 0 else v
        parts = [v]
        if cfg.ctx:
            parts.append([s.angular_mid / 360.0, len(s.strokes) / 10.0])
        parts.append([1.0])
        rows.append(np.concatenate(parts))
    return np.array(rows).reshape(len(rows), cfg.base_dim())


def chain_order(slices) -> np.ndarray:
    """Clockwise slice order starting at the north slice.

    The north slice has the smallest bearing difference to 12 o'clock;
    ties (to 1e-9 degrees) go to the earlier layer.
    """
    if not slices:
        return np.zeros(0, dtype=int)
    north = min(range(len(slices)),
                key=lambda i: (round(bearing_diff(slices[i].angular_mid, 0.0), 9), slices[i].layer, i))
    ref = slices[north].angular_mid
    key = [((s.angular_mid - ref) % 360.0, s.layer, i) for i, s in enumerate(slices)]
    # the north slice itself must lead even if a tie put another at offset 0
    return np.array(sorted(range(len(slices)), key=lambda i: (i != north, key[i])), dtype=int)


def concat_neighbours(B: np.ndarray, wrap: bool = True) -> np.ndarray:
    """``[x_{k-1}; x_k; x_{k+1}]`` rows, circular when ``wrap``, zero-padded otherwise."""
    n = len(B)
    if wrap:
        prev, nxt = np.roll(B, 1, axis=0), np.roll(B, -1, axis=0)
    else:
        z = np.zeros((1, B.shape[1]))
        prev = np.vstack([z, B[:-1]]) if n else B
        nxt = np.vstack([B[1:], z]) if n else B
    return np.hstack([prev, B, nxt])


def build_chain(slices, g=None, cfg: CrfConfig = CrfConfig(), labels=None,
                base: np.ndarray | None = None) -> ChainInstance:
    """Chain instance for a drawing's slices.

    ``labels`` are numerals 1..12 per slice (slice order); ``base`` may
    carry precomputed base features in slice order.
    """
    slices = list(slices)
    if not slices:
        raise ValueError("cannot build a chain from zero slices")
    order = chain_order(slices)
    B = slice_base_features(slices, cfg) if base is None else np.asarray(base, dtype=float)
    B = B[order]
    X = concat_neighbours(B, cfg.wrap_features) if cfg.concat else B
    y = None
    if labels is not None:
        y = np.asarray(labels, dtype=int)[order] - 1
    return ChainInstance(X, order, y)


# -- inference -------------------------------------------------------------------

def _check(m: CrfModel, c: ChainInstance):
    if c.X.ndim != 2 or c.X.shape[1] != m.dim:
        raise ModelMismatchError(f"chain features have dim {c.X.shape[-1]}, model expects {m.dim}")


def _forward_backward_batch(psi: np.ndarray, T: np.ndarray):
    """Log-space alpha/beta for a batch of equal-length chains ``psi (B, n, L)``."""
    Bn, n, L = psi.shape
    alpha = np.empty_like(psi)
    beta = np.zeros_like(psi)
    alpha[:, 0] = psi[:, 0]
    for t in range(1, n):
        alpha[:, t] = psi[:, t] + logsumexp(alpha[:, t - 1, :, None] + T[None], axis=1)
    for t in range(n - 2, -1, -1):
        beta[:, t] = logsumexp(T[None] + (psi[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
    logZ = logsumexp(alpha[:, -1], axis=1)
    return alpha, beta, logZ


def forward_backward(m: CrfModel, c: ChainInstance):
    """Exact node marginals ``(n, L)`` (chain order) and the log-partition."""
    _check(m, c)
    psi = (c.X @ m.W.T)[None]
    alpha, beta, logZ = _forward_backward_batch(psi, m.T)
    marg = np.exp(alpha[0] + beta[0] - logZ[0])
    marg /= marg.sum(axis=1, keepdims=True)
    return marg, float(logZ[0])


def map_decode(m: CrfModel, c: ChainInstance) -> np.ndarray:
    """Viterbi labels (indices, chain order); ties go to the smaller index."""
    _check(m, c)
    psi = c.X @ m.W.T
    n, L = psi.shape
    delta = psi[0].copy()
    back = np.zeros((n, L), dtype=int)
    for t in range(1, n):
        cand = delta[:, None] + m.T          # [prev, next]
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(L)] + psi[t]
    out = np.empty(n, dtype=int)
    out[-1] = int(np.argmax(delta))
    for t in range(n - 1, 0, -1):
        out[t - 1] = back[t, out[t]]
    return out


def sequence_score(m: CrfModel, c: ChainInstance, y) -> float:
    psi = c.X @ m.W.T
    y = np.asarray(y, dtype=int)
    return float(psi[np.arange(len(y)), y].sum() + m.T[y[:-1], y[1:]].sum())


# -- training --------------------------------------------------------------------

class _Batch:
    """Chains stacked by length so inference runs once per distinct length."""

    def __init__(self, chains):
        chains = list(chains)
        for c in chains:
            if c.labels is None:
                raise ValueError("training chains need gold labels")
        self.X = np.vstack([c.X for c in chains])
        self.y = np.concatenate([c.labels for c in chains]).astype(int)
        self.n_nodes = len(self.y)
        offs = np.cumsum([0] + [len(c) for c in chains])
        groups: dict = {}
        for k, c in enumerate(chains):
            groups.setdefault(len(c), []).append(offs[k])
        self.groups = {n: np.add.outer(np.array(starts), np.arange(n)) for n, starts in groups.items()}
        # empirical transition counts
        self.trans = [(idx[:, :-1].ravel(), idx[:, 1:].ravel()) for idx in self.groups.values()]


def nll_and_gradient(m: CrfModel, chains, lam: float | None = None):
    """Mean per-node negative log-likelihood plus ``lam/2 * ||theta||^2``.

    Returns ``(loss, (dW, dT))``.
    """
    batch = chains if isinstance(chains, _Batch) else _Batch(chains)
    lam = m.lam if lam is None else lam
    L = m.n_labels
    if batch.X.shape[1] != m.dim:
        raise ModelMismatchError(f"chain features have dim {batch.X.shape[1]}, model expects {m.dim}")
    if batch.y.min(initial=0) < 0 or batch.y.max(initial=0) >= L:
        raise ValueError(f"gold labels must be in 0..{L - 1}")
    psi = batch.X @ m.W.T
    marg = np.empty_like(psi)
    pair = np.zeros((L, L))
    gold = psi[np.arange(batch.n_nodes), batch.y].sum()
    logZ_total = 0.0
    for idx in batch.groups.values():
        P = psi[idx]
        alpha, beta, logZ = _forward_backward_batch(P, m.T)
        logZ_total += logZ.sum()
        marg[idx] = np.exp(alpha + beta - logZ[:, None, None])
        if idx.shape[1] > 1:
            xi = (alpha[:, :-1, :, None] + m.T[None, None]
                  + (P[:, 1:] + beta[:, 1:])[:, :, None, :] - logZ[:, None, None, None])
            pair += np.exp(xi).sum(axis=(0, 1))
    emp_pair = np.zeros((L, L))
    for a, b in batch.trans:
        np.add.at(emp_pair, (batch.y[a], batch.y[b]), 1.0)
        gold += m.T[batch.y[a], batch.y[b]].sum()
    N = batch.n_nodes
    onehot = np.zeros_like(marg)
    onehot[np.arange(N), batch.y] = 1.0
    dW = (marg - onehot).T @ batch.X / N + lam * m.W
    dT = (pair - emp_pair) / N + lam * m.T
    loss = (logZ_total - gold) / N + 0.5 * lam * (np.sum(m.W ** 2) + np.sum(m.T ** 2))
    return float(loss), (dW, dT)


def train_crf(chains, cfg: CrfConfig = CrfConfig(), n_labels: int = N_LABELS,
              dim: int | None = None) -> CrfModel:
    """Full-batch gradient descent from zero, halving the step on a loss increase."""
    chains = list(chains)
    if not chains:
        raise TrainingError("no training chains")
    D = chains[0].X.shape[1] if dim is None else dim
    m = CrfModel.zeros(n_labels, D, cfg.lam, cfg.feature_dict())
    if cfg.epochs <= 0:
        return m
    batch = _Batch(chains)
    loss, (gW, gT) = nll_and_gradient(m, batch)
    curve = [loss]
    lr = cfg.lr
    for epoch in range(cfg.epochs):
        cand = CrfModel(m.W - lr * gW, m.T - lr * gT, m.lam, m.features)
        new, grads = nll_and_gradient(cand, batch)
        if not np.isfinite(new):
            raise TrainingError(f"CRF training diverged at epoch {epoch}")
        if new > loss:
            lr *= 0.5
            if lr < 1e-8:
                break
            continue
        improved = loss - new
        m, loss, (gW, gT) = cand, new, grads
        curve.append(loss)
        if improved < cfg.tol:
            break
    m.loss_curve = curve
    log.debug("CRF trained: %d steps, final loss %.6f, lr %.4g", len(curve) - 1, loss, lr)
    return m


def predict(m: CrfModel, slices, base: np.ndarray | None = None):
    """MAP numerals and marginals for ``slices`` (both in slice order)."""
    cfg = m.config()
    c = build_chain(slices, cfg=cfg, base=base)
    marg, _ = forward_backward(m, c)
    lab = map_decode(m, c)
    post = np.empty_like(marg)
    post[c.order] = marg
    labels = np.empty(len(lab), dtype=int)
    labels[c.order] = lab + 1
    return labels, post


def config_from_dict(d: dict) -> CrfConfig:
    known = set(asdict(CrfConfig()))
    return CrfConfig(**{k: v for k, v in d.items() if k in known})
