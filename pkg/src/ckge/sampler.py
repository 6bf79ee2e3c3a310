"""Entropy-based difficulty sampling of replay triples."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput
from .model import as_rng, query_distances


@dataclass
class ReplaySet:
    triples: np.ndarray
    entropies: np.ndarray

    def __len__(self):
        return len(self.triples)


def _softmax_entropy(scores):
    """Row-wise entropy (nats) of softmax(scores)."""
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e.sum(axis=1, keepdims=True)
    logp = z - np.log(s)
    p = e / s
    return -np.sum(p * logp, axis=1)


def triple_entropies(model, triples, candidates=None, batch_size=256):
    """Mean of head-side and tail-side predictive entropies for each triple.

    The predictive distribution of a side is the softmax of the TransE
    scores obtained by substituting every candidate entity on that side.
    ``candidates`` defaults to all entities.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    cand = model.ent if candidates is None else model.ent[np.asarray(candidates)]
    if len(cand) < 2:
        raise ValueError("need at least 2 candidate entities")
    out = np.empty(len(triples))
    for s in range(0, len(triples), batch_size):
        b = triples[s:s + batch_size]
        tail_q = model.ent[b[:, 0]] + model.rel[b[:, 1]]
        head_q = model.ent[b[:, 2]] - model.rel[b[:, 1]]
        h_tail = _softmax_entropy(-query_distances(tail_q, cand, model.norm))
        h_head = _softmax_entropy(-query_distances(head_q, cand, model.norm))
        out[s:s + batch_size] = 0.5 * (h_tail + h_head)
    return np.clip(out, 0.0, np.log(len(cand)))


def triple_entropy(model, triple, candidates=None):
    triple = np.asarray(triple, dtype=np.int64).reshape(1, 3)
    if model.ent.shape[1] != model.rel.shape[1]:
        raise DimensionMismatch("entity and relation tables disagree on dimension")
    return float(triple_entropies(model, triple, candidates)[0])


def replay_distribution(entropies):
    """Softmax over entropies, so harder triples are drawn more often."""
    h = np.asarray(entropies, dtype=np.float64)
    if h.size == 0:
        raise EmptyInput("no entropies")
    e = np.exp(h - h.max())
    return e / e.sum()


def sample_replay(dist, triples, k, rng, entropies=None):
    """Draw ``min(k, len(triples))`` distinct triples, sequentially weighted by ``dist``."""
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    k = min(int(k), len(triples))
    if k <= 0:
        return ReplaySet(np.zeros((0, 3), dtype=np.int64), np.zeros(0))
    rng = as_rng(rng)
    idx = rng.choice(len(triples), size=k, replace=False, p=np.asarray(dist, dtype=np.float64))
    ent = np.zeros(k) if entropies is None else np.asarray(entropies)[idx]
    return ReplaySet(triples[idx], ent)


def difficulty_replay(model, triples, k, rng, candidates=None, n_candidates=None):
    """Score every triple's entropy and sample a replay set from it.

    ``candidates`` restricts the substituted entities (default: all rows);
    ``n_candidates`` caps them with a uniform subsample.
    """
    rng = as_rng(rng)
    pool = np.arange(model.n_entities) if candidates is None else np.asarray(candidates)
    if n_candidates is not None and n_candidates < len(pool):
        pool = np.sort(rng.choice(pool, size=n_candidates, replace=False))
    h = triple_entropies(model, triples, pool)
    return sample_replay(replay_distribution(h), triples, k, rng, entropies=h)


def uniform_replay(triples, k, rng):
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if len(triples) == 0:
        return sample_replay(np.zeros(0), triples, k, rng)
    dist = np.full(len(triples), 1.0 / len(triples))
    return sample_replay(dist, triples, k, rng)
