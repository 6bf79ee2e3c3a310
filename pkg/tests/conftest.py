"""Shared fixtures and brute-force reference implementations.

The oracles here are written as plain Python loops on purpose: they share
no code with the package and are only used to cross-check it.
"""
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


def scalar_distance(h, r, t, norm="L2"):
    total = 0.0
    for a, b, c in zip(h, r, t):
        x = a + b - c
        total += x * x if norm == "L2" else abs(x)
    return math.sqrt(total) if norm == "L2" else total


def brute_rank(ent, rel, triple, side, known, alive=None, norm="L2"):
    """Sort-and-scan filtered rank, ties resolved in favour of the truth."""
    h, r, t = triple
    true = t if side == "tail" else h
    scored = []
    for e in range(len(ent)):
        if alive is not None and not alive[e]:
            continue
        cand = (h, r, e) if side == "tail" else (e, r, t)
        if e != true and cand in known:
            continue
        d = scalar_distance(ent[cand[0]], rel[r], ent[cand[2]], norm)
        scored.append((d, 0 if e == true else 1, e))
    scored.sort()
    for pos, (_, _, e) in enumerate(scored):
        if e == true:
            return pos + 1
    raise AssertionError("true entity missing")


def central_diff(f, x, eps=1e-6):
    """Central finite-difference gradient of scalar ``f`` at array ``x`` (modified in place, restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        up = f()
        x[i] = old - eps
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    denom = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Dimension-update oracle: the five reachable cases as an ordered table of
# (guard, result) pairs over (d, y_min, y, y_max, r, step).
DIM_RULE_TABLE = [
    (lambda d, lo, y, hi, r, s: r * d <= lo, lambda d, lo, y, hi, r, s: math.floor(r * d + 0.5)),
    (lambda d, lo, y, hi, r, s: d <= lo, lambda d, lo, y, hi, r, s: lo),
    (lambda d, lo, y, hi, r, s: d <= y, lambda d, lo, y, hi, r, s: y),
    (lambda d, lo, y, hi, r, s: d <= hi, lambda d, lo, y, hi, r, s: d + s),
    (lambda d, lo, y, hi, r, s: True, lambda d, lo, y, hi, r, s: d),
]


def dim_rule_oracle(d, lo, y, hi, r, step):
    for case, (guard, result) in enumerate(DIM_RULE_TABLE, start=1):
        if guard(d, lo, y, hi, r, step):
            return result(d, lo, y, hi, r, step), case
    raise AssertionError("unreachable")


def brute_counts(triples, n_ent, n_rel):
    ent = [0] * n_ent
    rel = [0] * n_rel
    for h, r, t in triples:
        ent[h] += 1
        ent[t] += 1
        rel[r] += 1
    return ent, rel


def brute_quality(query_triples, ranks, n_ent, n_rel):
    """Per-element mean reciprocal rank, None for elements in no query."""
    ent = {}
    rel = {}
    for (h, r, t), k in zip(query_triples, ranks):
        for e in {h, t}:
            ent.setdefault(e, []).append(1.0 / k)
        rel.setdefault(r, []).append(1.0 / k)
    mean = lambda xs: sum(xs) / len(xs)
    return ([mean(ent[e]) if e in ent else None for e in range(n_ent)],
            [mean(rel[r]) if r in rel else None for r in range(n_rel)])


def brute_entropy(ent, rel, triple, candidates, norm="L2"):
    """Mean of the head-side and tail-side softmax entropies, by direct summation."""
    h, r, t = triple
    out = 0.0
    for side in ("head", "tail"):
        scores = []
        for c in candidates:
            hh, tt = (c, t) if side == "head" else (h, c)
            scores.append(-scalar_distance(ent[hh], rel[r], ent[tt], norm))
        m = max(scores)
        z = sum(math.exp(s - m) for s in scores)
        ps = [math.exp(s - m) / z for s in scores]
        out += -sum(p * math.log(p) for p in ps if p > 0)
    return out / 2


def _smooth_batch(rng, n_e, n_r, dim, n_pos, n_neg, gamma, norm):
    """Random model, batch and negatives with every hinge and residual away from a kink."""
    from ckge.model import TransE
    while True:
        ent = rng.normal(size=(n_e, dim))
        rel = rng.normal(size=(n_r, dim))
        pos = np.stack([rng.integers(0, n_e, n_pos), rng.integers(0, n_r, n_pos),
                        rng.integers(0, n_e, n_pos)], 1)
        neg = np.repeat(pos, n_neg, axis=0)
        side = rng.integers(0, 2, len(neg)) * 2
        neg[np.arange(len(neg)), side] = rng.integers(0, n_e, len(neg))
        m = TransE(ent, rel, norm=norm)
        dp = np.repeat(m.distance(pos), n_neg)
        dn = m.distance(neg)
        v = np.concatenate([ent[pos[:, 0]] + rel[pos[:, 1]] - ent[pos[:, 2]],
                            ent[neg[:, 0]] + rel[neg[:, 1]] - ent[neg[:, 2]]])
        if np.min(np.abs(gamma + dp - dn)) > 1e-3 and np.min(np.abs(v) if norm == "L1" else
                                                             np.linalg.norm(v, axis=1)) > 1e-3:
            return m, pos, neg


def _dense(shape, sparse):
    rows, vals = sparse
    out = np.zeros(shape)
    out[rows] += vals
    return out


def gradient_errors(rng, norm="L2"):
    """Relative errors of analytic vs central-difference gradients for one random state.

    Returns a dict keyed by loss name: score, L_theta, L_itg, L_dwt, L.
    """
    from ckge.expander import build_net, expansion_loss
    from ckge.model import score, score_grad
    from ckge.trainer import DistillAnchors, combined_loss, dwt_loss, integration_loss

    errs = {}
    h, r, t = rng.normal(size=(3, 6))
    grads = score_grad(h, r, t, norm)
    errs["score"] = max(rel_err(g, central_diff(lambda: score(h, r, t, norm), x))
                        for g, x in zip(grads, (h, r, t)))

    gamma = 1.0
    m, pos, neg = _smooth_batch(rng, 8, 3, 4, 10, 2, gamma, norm)
    loss_fn = lambda: integration_loss(m, pos, neg, gamma)[0]
    _, ge, gr = integration_loss(m, pos, neg, gamma)
    errs["L_itg"] = max(rel_err(_dense(m.ent.shape, ge), central_diff(loss_fn, m.ent)),
                        rel_err(_dense(m.rel.shape, gr), central_diff(loss_fn, m.rel)))

    anchors = DistillAnchors(m.ent + rng.normal(scale=0.3, size=m.ent.shape),
                             m.rel + rng.normal(scale=0.3, size=m.rel.shape),
                             rng.uniform(0, 3, m.n_entities), rng.uniform(0, 3, m.n_relations))
    er, rr = np.arange(0, 8, 2), np.array([0, 2])
    dwt_fn = lambda: dwt_loss(m, anchors, er, rr)[0]
    _, ge, gr = dwt_loss(m, anchors, er, rr)
    errs["L_dwt"] = max(rel_err(_dense(m.ent.shape, ge), central_diff(dwt_fn, m.ent)),
                        rel_err(_dense(m.rel.shape, gr), central_diff(dwt_fn, m.rel)))

    alpha = float(rng.uniform(0.01, 2.0))
    tot_fn = lambda: combined_loss(m, pos, neg, gamma, anchors, alpha)[0]
    _, _, _, ge, gr = combined_loss(m, pos, neg, gamma, anchors, alpha)
    errs["L"] = max(rel_err(_dense(m.ent.shape, ge), central_diff(tot_fn, m.ent)),
                    rel_err(_dense(m.rel.shape, gr), central_diff(tot_fn, m.rel)))

    from ckge.expander import expand_all
    from ckge.model import TransE
    while True:
        net = build_net(4, 3, rng, hidden=int(rng.integers(0, 2)) * 5 or None)
        for p in net.params:
            p += rng.normal(scale=0.2, size=p.shape)
        x = expand_all(m.ent, m.rel, net)
        mx = TransE(x.ent, x.rel, norm=norm)
        hinge = gamma + np.repeat(mx.distance(pos), len(neg) // len(pos)) - mx.distance(neg)
        if np.min(np.abs(hinge)) > 1e-3:
            break
    th_fn = lambda: expansion_loss(net, m.ent, m.rel, pos, neg, gamma, norm)[0]
    _, grads = expansion_loss(net, m.ent, m.rel, pos, neg, gamma, norm)
    errs["L_theta"] = max(rel_err(g, central_diff(th_fn, p)) for g, p in zip(grads, net.params))
    return errs


def brute_rtf(h):
    n = len(h)
    terms = [h[n - 1][i] / (h[i][i] + h[n - 1][i]) for i in range(n - 1) if h[i][i] + h[n - 1][i] != 0]
    return sum(terms) / len(terms)


def random_ranking_case(rng, n_ent=20, n_rel=3, dim=3, n_known=60, n_test=25):
    """Integer embeddings (exact distances, frequent ties), a known-triple filter and a test set."""
    from ckge.model import TransE
    ent = rng.integers(-2, 3, size=(n_ent, dim)).astype(float)
    rel = rng.integers(-1, 2, size=(n_rel, dim)).astype(float)
    known = {tuple(int(x) for x in row) for row in np.stack(
        [rng.integers(0, n_ent, n_known), rng.integers(0, n_rel, n_known), rng.integers(0, n_ent, n_known)], 1)}
    test = np.array(sorted(known))[rng.permutation(len(known))[:n_test]]
    return TransE(ent, rel), known, test
