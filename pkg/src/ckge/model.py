"""TransE embedding tables, margin loss, negative sampling and Adam.

Everything is float64. Gradients are hand-derived and returned row-sparse
as ``(rows, values)`` pairs so that a training step only touches the
embeddings that occur in its batch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch

NORMS = ("L1", "L2")


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_table(rows, dim, seed, role="entity"):
    """Uniform(-6/sqrt(dim), 6/sqrt(dim)) init; entity rows are then L2-normalized."""
    if rows < 0 or dim < 1:
        raise ValueError(f"need rows >= 0 and dim >= 1, got rows={rows} dim={dim}")
    bound = 6.0 / np.sqrt(dim)
    values = as_rng(seed).uniform(-bound, bound, size=(rows, dim))
    if role == "entity":
        normalize_entities(values)
    return values


def normalize_entities(table, rows=None):
    """Scale entity rows to unit L2 norm in place. Zero rows are left alone."""
    view = table if rows is None else table[rows]
    norms = np.linalg.norm(view, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    if rows is None:
        table /= safe
    else:
        table[rows] = view / safe
    return table


def score(h, r, t, norm="L2"):
    """TransE plausibility ``-||h + r - t||``; higher is more plausible."""
    h, r, t = (np.asarray(x, dtype=np.float64) for x in (h, r, t))
    if not (h.shape == r.shape == t.shape):
        raise DimensionMismatch(f"shapes {h.shape}, {r.shape}, {t.shape}")
    return -_norm(h + r - t, norm)


def score_grad(h, r, t, norm="L2"):
    """Gradients of :func:`score` with respect to ``h``, ``r`` and ``t``."""
    h, r, t = (np.asarray(x, dtype=np.float64) for x in (h, r, t))
    v = h + r - t
    g = -_norm_grad(v, _norm(v, norm), norm)
    return g, g, -g


def _norm(v, norm):
    if norm == "L2":
        return np.sqrt(np.sum(v * v, axis=-1))
    if norm == "L1":
        return np.sum(np.abs(v), axis=-1)
    raise ValueError(f"unknown norm {norm!r}")


def _norm_grad(v, dist, norm):
    """d||v||/dv, using 0 where the L2 norm vanishes."""
    if norm == "L2":
        safe = np.where(dist > 0, dist, 1.0)[..., None]
        return np.where(dist[..., None] > 0, v / safe, 0.0)
    return np.sign(v)


def margin_loss(pos, neg, gamma):
    """Hinge ``max(0, gamma - pos + neg)`` on scores (negated distances)."""
    return np.maximum(0.0, gamma - np.asarray(pos) + np.asarray(neg))


def sample_negatives(triples, n_entities, n, rng, known=None, max_tries=10):
    """Corrupt the head or tail (fair coin) of every triple ``n`` times.

    The replacement is uniform over all entities except the original one.
    Output row ``i * n + j`` is the ``j``-th negative of ``triples[i]``.
    If ``known`` (a set of id tuples) is given, corruptions that hit a
    known triple are redrawn up to ``max_tries`` times.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if n == 0 or len(triples) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    if n_entities < 2:
        raise ValueError("negative sampling needs at least 2 entities")
    rng = as_rng(rng)
    neg = np.repeat(triples, n, axis=0)
    _corrupt(neg, n_entities, rng, np.arange(len(neg)))
    if known:
        for _ in range(max_tries):
            hit = np.array([tuple(row) in known for row in neg.tolist()], dtype=bool)
            if not hit.any():
                break
            idx = np.flatnonzero(hit)
            neg[idx] = np.repeat(triples, n, axis=0)[idx]
            _corrupt(neg, n_entities, rng, idx)
    return neg


def _corrupt(neg, n_entities, rng, idx):
    side = np.where(rng.random(len(idx)) < 0.5, 0, 2)
    orig = neg[idx, side]
    repl = rng.integers(0, n_entities - 1, size=len(idx))
    repl = repl + (repl >= orig)
    neg[idx, side] = repl


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, param, **kw):
        return cls(np.zeros_like(param), np.zeros_like(param), **kw)

    def grow(self, rows, dim):
        """Pad moments to ``(rows, dim)``; new entries start at zero."""
        self.m = _pad(self.m, rows, dim)
        self.v = _pad(self.v, rows, dim)


def _pad(arr, rows, dim):
    out = np.zeros((rows, dim), dtype=arr.dtype)
    out[: arr.shape[0], : arr.shape[1]] = arr
    return out


def adam_step(param, grad, state, lr, rows=None):
    """One bias-corrected Adam update, in place.

    With ``rows`` given, ``grad`` holds gradients for those rows only and
    only those rows (and their moments) change.
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    if state.m.shape != param.shape:
        raise ShapeMismatch(f"moments {state.m.shape} vs param {param.shape}")
    expected = param.shape if rows is None else (len(rows),) + param.shape[1:]
    if grad.shape != expected:
        raise ShapeMismatch(f"grad {grad.shape} vs expected {expected}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    if rows is None:
        state.m *= b1
        state.m += (1 - b1) * grad
        state.v *= b2
        state.v += (1 - b2) * grad * grad
        m_hat = state.m / (1 - b1 ** state.t)
        v_hat = state.v / (1 - b2 ** state.t)
        param -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
        return param
    m = b1 * state.m[rows] + (1 - b1) * grad
    v = b2 * state.v[rows] + (1 - b2) * grad * grad
    state.m[rows] = m
    state.v[rows] = v
    m_hat = m / (1 - b1 ** state.t)
    v_hat = v / (1 - b2 ** state.t)
    param[rows] -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return param


def accumulate_rows(idx, values):
    """Sum per-occurrence gradient rows into one row per unique index."""
    rows, inv = np.unique(idx, return_inverse=True)
    out = np.zeros((len(rows), values.shape[1]), dtype=values.dtype)
    np.add.at(out, inv, values)
    return rows, out


class TransE:
    """Entity and relation tables plus their optimizer moments.

    Tables can grow in both rows (new elements) and columns (dimension
    expansion); moments are padded with zeros to follow.
    """

    def __init__(self, ent, rel, norm="L2"):
        if norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")
        ent = np.ascontiguousarray(ent, dtype=np.float64)
        rel = np.ascontiguousarray(rel, dtype=np.float64)
        if ent.ndim != 2 or rel.ndim != 2 or ent.shape[1] != rel.shape[1]:
            raise DimensionMismatch(f"entity {ent.shape} vs relation {rel.shape}")
        self.ent = ent
        self.rel = rel
        self.norm = norm
        self.ent_opt = AdamState.like(ent)
        self.rel_opt = AdamState.like(rel)

    @classmethod
    def random(cls, n_entities, n_relations, dim, seed, norm="L2"):
        rng = as_rng(seed)
        ent = init_table(n_entities, dim, rng, role="entity")
        rel = init_table(n_relations, dim, rng, role="relation")
        return cls(ent, rel, norm=norm)

    @property
    def dim(self):
        return self.ent.shape[1]

    @property
    def n_entities(self):
        return self.ent.shape[0]

    @property
    def n_relations(self):
        return self.rel.shape[0]

    def copy(self):
        other = TransE(self.ent.copy(), self.rel.copy(), norm=self.norm)
        other.ent_opt = AdamState(self.ent_opt.m.copy(), self.ent_opt.v.copy(), self.ent_opt.t)
        other.rel_opt = AdamState(self.rel_opt.m.copy(), self.rel_opt.v.copy(), self.rel_opt.t)
        return other

    def reset_optimizer(self):
        """Zero both tables' moments and step counters."""
        self.ent_opt = AdamState.like(self.ent)
        self.rel_opt = AdamState.like(self.rel)

    def set_tables(self, ent, rel):
        """Replace the tables (possibly larger), padding optimizer moments."""
        self.ent = np.ascontiguousarray(ent, dtype=np.float64)
        self.rel = np.ascontiguousarray(rel, dtype=np.float64)
        self.ent_opt.grow(*self.ent.shape)
        self.rel_opt.grow(*self.rel.shape)

    def distance(self, triples):
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        v = self.ent[triples[:, 0]] + self.rel[triples[:, 1]] - self.ent[triples[:, 2]]
        return _norm(v, self.norm)

    def score_triples(self, triples):
        return -self.distance(triples)


def margin_loss_and_grads(ent, rel, pos, neg, gamma, norm="L2"):
    """Summed hinge loss between each positive and its negatives.

    ``neg`` holds ``n`` consecutive negatives per positive. Returns
    ``(loss, (ent_rows, ent_grad), (rel_rows, rel_grad))``.
    """
    pos = np.asarray(pos, dtype=np.int64).reshape(-1, 3)
    neg = np.asarray(neg, dtype=np.int64).reshape(-1, 3)
    dim = ent.shape[1]
    if len(pos) == 0 or len(neg) == 0:
        return 0.0, _empty_grad(dim), _empty_grad(dim)
    n = len(neg) // len(pos)
    pos_rep = np.repeat(pos, n, axis=0)
    vp = ent[pos_rep[:, 0]] + rel[pos_rep[:, 1]] - ent[pos_rep[:, 2]]
    vn = ent[neg[:, 0]] + rel[neg[:, 1]] - ent[neg[:, 2]]
    dp = _norm(vp, norm)
    dn = _norm(vn, norm)
    hinge = gamma + dp - dn
    active = hinge > 0
    loss = float(np.sum(hinge[active]))
    if not active.any():
        return loss, _empty_grad(dim), _empty_grad(dim)
    gp = _norm_grad(vp[active], dp[active], norm)
    gn = _norm_grad(vn[active], dn[active], norm)
    P, N = pos_rep[active], neg[active]
    ent_idx = np.concatenate([P[:, 0], P[:, 2], N[:, 0], N[:, 2]])
    ent_val = np.concatenate([gp, -gp, -gn, gn])
    rel_idx = np.concatenate([P[:, 1], N[:, 1]])
    rel_val = np.concatenate([gp, -gn])
    return loss, accumulate_rows(ent_idx, ent_val), accumulate_rows(rel_idx, rel_val)


def _empty_grad(dim):
    return np.zeros(0, dtype=np.int64), np.zeros((0, dim))


def query_distances(queries, candidates, norm="L2", squared=False, chunk=64):
    """Distances ``||q - e||`` between each query vector and each candidate row.

    Tail prediction for ``(h, r, ?)`` uses ``q = h + r``; head prediction for
    ``(?, r, t)`` uses ``q = t - r``. For L2 with ``squared=True`` the
    squared distance is returned, which ranks identically and skips a sqrt.
    """
    queries = np.atleast_2d(queries)
    if queries.shape[1] != candidates.shape[1]:
        raise DimensionMismatch(f"queries dim {queries.shape[1]} vs candidates {candidates.shape[1]}")
    if norm == "L2":
        sq = (np.sum(queries * queries, axis=1)[:, None]
              - 2.0 * (queries @ candidates.T)
              + np.sum(candidates * candidates, axis=1)[None, :])
        np.maximum(sq, 0.0, out=sq)
        return sq if squared else np.sqrt(sq)
    out = np.empty((len(queries), len(candidates)))
    for s in range(0, len(queries), chunk):
        q = queries[s:s + chunk]
        out[s:s + chunk] = np.abs(q[:, None, :] - candidates[None, :, :]).sum(axis=2)
    return out
