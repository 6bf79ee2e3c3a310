"""Synthetic evolving knowledge graphs with a planted translational structure.

Entities and relations get hidden vectors; a triple ``(h, r, t)`` is
generated by picking ``t`` among the few entities closest to ``h + r``.
Entities arrive over time, and each snapshot's triples favour the
entities introduced in it, so later snapshots both extend and revisit
earlier parts of the graph.
"""
from __future__ import annotations

import numpy as np

from .kg import Snapshot, Vocabulary

# Cumulative entity fraction and per-step triple share of the GraphLower /
# GraphHigher / GraphEqual benchmarks (five snapshots).
GROWTH = {
    "lower": ([0.52, 0.77, 0.90, 0.97, 1.0], [16, 8, 4, 2, 1]),
    "higher": ([0.06, 0.13, 0.26, 0.51, 1.0], [1, 2, 4, 8, 16]),
    "equal": ([0.2, 0.4, 0.6, 0.8, 1.0], [1, 1, 1, 1, 1]),
}


def _growth(name, n_snapshots):
    if name in GROWTH and n_snapshots == len(GROWTH[name][0]):
        return GROWTH[name]
    fracs = np.linspace(1.0 / n_snapshots, 1.0, n_snapshots)
    return list(fracs), [1] * n_snapshots


def make_sequence(n_entities=500, n_relations=10, n_triples=10000, n_snapshots=5,
                  growth="equal", latent_dim=12, fanout=3, new_bias=0.7, seed=0):
    """Generate ``(vocab, snapshots)`` for a synthetic evolving KG.

    Parameters
    ----------
    n_triples : int
        Approximate total triple count over all snapshots and splits.
    growth : {"lower", "higher", "equal"}
        Schedule of entity arrival and per-snapshot triple volume.
    fanout : int
        The tail is drawn uniformly from the ``fanout`` entities closest to
        ``h + r``; larger values make the graph noisier.
    new_bias : float
        Probability that a triple's anchor entity is one introduced in the
        current snapshot.
    """
    rng = np.random.default_rng(seed)
    ent_vec = rng.normal(size=(n_entities, latent_dim))
    ent_vec /= np.linalg.norm(ent_vec, axis=1, keepdims=True)
    rel_vec = rng.normal(scale=0.6, size=(n_relations, latent_dim))
    fracs, weights = _growth(growth, n_snapshots)
    weights = np.asarray(weights, dtype=np.float64)
    per_step = np.maximum(20, np.round(n_triples * weights / weights.sum())).astype(int)
    bounds = [max(fanout + 1, int(round(f * n_entities))) for f in fracs]

    vocab = Vocabulary()
    seen_triples = set()
    seen_train_ents = set()
    snapshots = []
    prev = 0
    for i in range(n_snapshots):
        hi = bounds[i]
        pool = np.arange(hi)
        fresh = np.arange(prev, hi) if hi > prev else pool
        rows = []
        tries = 0
        while len(rows) < per_step[i] and tries < 50 * per_step[i]:
            tries += 1
            anchor = rng.choice(fresh) if rng.random() < new_bias else rng.choice(pool)
            r = rng.integers(n_relations)
            if rng.random() < 0.5:
                target = ent_vec[anchor] + rel_vec[r]
                d = np.linalg.norm(ent_vec[pool] - target, axis=1)
                d[anchor] = np.inf
                t = pool[rng.choice(np.argsort(d)[:fanout])]
                tri = (int(anchor), int(r), int(t))
            else:
                target = ent_vec[anchor] - rel_vec[r]
                d = np.linalg.norm(ent_vec[pool] - target, axis=1)
                d[anchor] = np.inf
                h = pool[rng.choice(np.argsort(d)[:fanout])]
                tri = (int(h), int(r), int(anchor))
            if tri in seen_triples:
                continue
            seen_triples.add(tri)
            rows.append(tri)
        rows = np.array(rows, dtype=np.int64).reshape(-1, 3)
        rows = rows[rng.permutation(len(rows))]
        n_tr = int(round(0.6 * len(rows)))
        n_va = int(round(0.2 * len(rows)))
        train, valid, test = rows[:n_tr], rows[n_tr:n_tr + n_va], rows[n_tr + n_va:]
        seen_train_ents.update(train[:, 0].tolist())
        seen_train_ents.update(train[:, 2].tolist())
        ok = lambda tri: tri[0] in seen_train_ents and tri[2] in seen_train_ents
        valid = np.array([t for t in valid.tolist() if ok(t)], dtype=np.int64).reshape(-1, 3)
        test = np.array([t for t in test.tolist() if ok(t)], dtype=np.int64).reshape(-1, 3)
        snapshots.append(_encode(vocab, i, train, valid, test))
        prev = hi
    return vocab, snapshots


def _encode(vocab, index, *splits):
    out = []
    for tri in splits:
        enc = [vocab.encode(f"e{h}", f"r{r}", f"e{t}") for h, r, t in tri.tolist()]
        out.append(np.array(enc, dtype=np.int64).reshape(-1, 3))
    return Snapshot(index, *out)


# Training settings for desk-scale synthetic runs (1,000 entities, dims
# 16-64). Learning rate, batch size and the scale curve are resized to the
# small graph; alpha=1 was picked on generator seed 0 from {0.01, 0.1, 1, 10}.
DESK_CONFIG = {
    "train.lr": 0.01,
    "train.batch_size": 256,
    "train.alpha": 1.0,
    "scale.a": 3000.0,
    "dim.fixed": 32,
    "dim.initial_min": 16,
    "dim.initial_max": 32,
    "policy.step": 4,
}

DESK_SEQUENCE = dict(n_entities=1000, n_relations=10, n_triples=25000, growth="lower", seed=1)
