"""Knowledge-guided dimension expansion.

Old embeddings keep their first ``d_i`` coordinates verbatim; the extra
``d_{i+1} - d_i`` coordinates are produced by a small network applied to
the old embedding. The network is trained on replay triples with a margin
loss computed in the expanded space while the old tables stay frozen.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyReplaySet
from .model import (AdamState, adam_step, as_rng, init_table, margin_loss_and_grads,
                    sample_negatives)


class ExpansionNet:
    """Affine map ``R^d_in -> R^d_out``, optionally with one tanh hidden layer."""

    def __init__(self, in_dim, out_dim, seed=0, hidden=None):
        if in_dim < 1 or out_dim < 1:
            raise ValueError(f"need in_dim >= 1 and out_dim >= 1, got {in_dim}, {out_dim}")
        rng = as_rng(seed)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.hidden = hidden
        if hidden:
            self.params = [
                _uniform(rng, (hidden, in_dim), in_dim), np.zeros(hidden),
                _uniform(rng, (out_dim, hidden), hidden), np.zeros(out_dim),
            ]
        else:
            self.params = [_uniform(rng, (out_dim, in_dim), in_dim), np.zeros(out_dim)]

    @property
    def n_params(self):
        return sum(p.size for p in self.params)

    def forward(self, x):
        if x.shape[-1] != self.in_dim:
            raise DimensionMismatch(f"net expects {self.in_dim} inputs, got {x.shape[-1]}")
        if self.hidden:
            w1, b1, w2, b2 = self.params
            a = np.tanh(x @ w1.T + b1)
            return a @ w2.T + b2, (x, a)
        w, b = self.params
        return x @ w.T + b, (x,)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        """Parameter gradients given dLoss/dOutput for the cached inputs."""
        if self.hidden:
            x, a = cache
            _, _, w2, _ = self.params
            da = (grad_out @ w2) * (1.0 - a * a)
            return [da.T @ x, da.sum(axis=0), grad_out.T @ a, grad_out.sum(axis=0)]
        (x,) = cache
        return [grad_out.T @ x, grad_out.sum(axis=0)]


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def build_net(d_old, delta_d, seed, hidden=None):
    if delta_d < 1:
        raise ValueError("expansion needs delta_d >= 1; skip expansion when the dimension is unchanged")
    return ExpansionNet(d_old, delta_d, seed=seed, hidden=hidden)


@dataclass
class ExpandedState:
    ent: np.ndarray
    rel: np.ndarray
    old_dim: int

    @property
    def dim(self):
        return self.ent.shape[1]


def _expand(table, net):
    out = np.empty((table.shape[0], table.shape[1] + net.out_dim))
    out[:, : table.shape[1]] = table
    if len(table):
        out[:, table.shape[1]:] = net(table)
    return out


def expand_all(ent, rel, net):
    """Concatenate every old row with the network's output for it."""
    if ent.shape[1] != net.in_dim or rel.shape[1] != net.in_dim:
        raise DimensionMismatch(f"tables have dim {ent.shape[1]}/{rel.shape[1]}, net expects {net.in_dim}")
    return ExpandedState(_expand(ent, net), _expand(rel, net), ent.shape[1])


def _replay_loss(net, ent, rel, pos, neg, gamma, norm):
    ent_x = expand_all(ent, rel, net)
    loss, (e_rows, e_grad), (r_rows, r_grad) = margin_loss_and_grads(
        ent_x.ent, ent_x.rel, pos, neg, gamma, norm)
    d = ent.shape[1]
    grads = [np.zeros_like(p) for p in net.params]
    for rows, g, table in ((e_rows, e_grad, ent), (r_rows, r_grad, rel)):
        if len(rows) == 0:
            continue
        _, cache = net.forward(table[rows])
        for acc, part in zip(grads, net.backward(cache, g[:, d:])):
            acc += part
    return loss, grads


def expansion_loss(net, ent, rel, pos, neg, gamma, norm="L2"):
    """Replay margin loss in the expanded space and its gradient w.r.t. the net parameters."""
    return _replay_loss(net, ent, rel, pos, neg, gamma, norm)


def train_expansion(net, replay, ent, rel, gamma, epochs, lr, rng, norm="L2", negatives=1):
    """Fit the expansion net on the replay triples; ``ent`` and ``rel`` are read-only.

    Negatives are redrawn each epoch; each epoch is one full-batch Adam
    step over the replay set. Returns the per-epoch losses.
    """
    triples = replay.triples if hasattr(replay, "triples") else np.asarray(replay)
    if len(triples) == 0:
        raise EmptyReplaySet("replay set is empty")
    if gamma <= 0:
        raise ValueError("margin must be positive")
    rng = as_rng(rng)
    states = [AdamState.like(p) for p in net.params]
    losses = []
    for _ in range(epochs):
        neg = sample_negatives(triples, ent.shape[0], negatives, rng)
        loss, grads = _replay_loss(net, ent, rel, triples, neg, gamma, norm)
        losses.append(loss)
        if not any(np.any(g) for g in grads):
            continue
        for p, g, s in zip(net.params, grads, states):
            adam_step(p, g, s, lr)
    return losses


def direct_suffix(ent, rel, new_dim, seed):
    """New coordinates for old rows drawn like fresh embeddings (no mapping from old ones).

    Each old row gets the trailing coordinates of a freshly initialized
    ``new_dim`` row.
    """
    rng = as_rng(seed)
    d = ent.shape[1]
    ent_x = np.empty((ent.shape[0], new_dim))
    rel_x = np.empty((rel.shape[0], new_dim))
    ent_x[:, :d] = ent
    rel_x[:, :d] = rel
    ent_x[:, d:] = init_table(ent.shape[0], new_dim, rng, role="entity")[:, d:]
    rel_x[:, d:] = init_table(rel.shape[0], new_dim, rng, role="relation")[:, d:]
    return ExpandedState(ent_x, rel_x, d)


def train_suffix(state, replay, gamma, epochs, lr, rng, norm="L2", negatives=1):
    """Train only the new coordinates of ``state`` on the replay triples, in place."""
    triples = replay.triples if hasattr(replay, "triples") else np.asarray(replay)
    if len(triples) == 0:
        raise EmptyReplaySet("replay set is empty")
    rng = as_rng(rng)
    d = state.old_dim
    e_suf, r_suf = state.ent[:, d:].copy(), state.rel[:, d:].copy()
    e_opt, r_opt = AdamState.like(e_suf), AdamState.like(r_suf)
    losses = []
    for _ in range(epochs):
        neg = sample_negatives(triples, state.ent.shape[0], negatives, rng)
        loss, (er, eg), (rr, rg) = margin_loss_and_grads(state.ent, state.rel, triples, neg, gamma, norm)
        losses.append(loss)
        if len(er):
            adam_step(e_suf, eg[:, d:], e_opt, lr, rows=er)
        if len(rr):
            adam_step(r_suf, rg[:, d:], r_opt, lr, rows=rr)
        state.ent[:, d:] = e_suf
        state.rel[:, d:] = r_suf
    return losses


def init_new_elements(ent, rel, new_entities, new_relations, n_entities, n_relations, seed):
    """Grow the tables to the vocabulary size and (re)initialize the new elements' rows.

    Rows past the old table size are initialized as well so every id has a
    finite embedding.
    """
    rng = as_rng(seed)
    dim = ent.shape[1]
    out = []
    for table, new_ids, total, role in ((ent, new_entities, n_entities, "entity"),
                                        (rel, new_relations, n_relations, "relation")):
        total = max(total, table.shape[0])
        fresh = np.zeros(total, dtype=bool)
        fresh[table.shape[0]:] = True
        fresh[np.asarray(new_ids, dtype=np.int64)] = True
        grown = np.empty((total, dim))
        grown[: table.shape[0]] = table
        idx = np.flatnonzero(fresh)
        grown[idx] = init_table(len(idx), dim, rng, role=role)
        out.append(grown)
    return out[0], out[1]
