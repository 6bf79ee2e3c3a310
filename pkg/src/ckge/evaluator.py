"""Filtered link-prediction metrics and Resistance to Forgetting.

Each test triple yields a head query ``(?, r, t)`` and a tail query
``(h, r, ?)``. The true entity is ranked against every embedded entity,
skipping entities that form some other known-true triple. Ties are
resolved in favour of the true entity.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateDiagonal, EmptyTestSet, UnknownEntity
from .model import query_distances

log = logging.getLogger(__name__)

HEAD, TAIL = "head", "tail"


class TripleFilter:
    """Known-true answers of every ``(h, r, ?)`` and ``(?, r, t)`` query."""

    def __init__(self, triples=()):
        self.tails = defaultdict(set)
        self.heads = defaultdict(set)
        self.add(triples)

    def add(self, triples):
        for h, r, t in np.asarray(triples, dtype=np.int64).reshape(-1, 3).tolist():
            self.tails[(h, r)].add(t)
            self.heads[(r, t)].add(h)
        return self

    def answers(self, triple, side):
        h, r, t = (int(x) for x in triple)
        if side == TAIL:
            return self.tails.get((h, r), ())
        return self.heads.get((r, t), ())


@dataclass
class LinkMetrics:
    mrr: float
    h1: float
    h10: float
    n_queries: int = 0
    skipped: int = 0


def _query_vectors(model, triples, side):
    if side == TAIL:
        return model.ent[triples[:, 0]] + model.rel[triples[:, 1]]
    return model.ent[triples[:, 2]] - model.rel[triples[:, 1]]


def _known_mask(model, triples, entity_mask):
    ok = (triples[:, 0] < model.n_entities) & (triples[:, 2] < model.n_entities)
    ok &= triples[:, 1] < model.n_relations
    if entity_mask is not None:
        idx = np.flatnonzero(ok)
        ok[idx] &= entity_mask[triples[idx, 0]] & entity_mask[triples[idx, 2]]
    return ok


def rank_query(model, triple, side, filt, entity_mask=None):
    """Filtered rank of the true entity for one query."""
    triple = np.asarray(triple, dtype=np.int64).reshape(1, 3)
    if not _known_mask(model, triple, entity_mask)[0]:
        raise UnknownEntity(f"triple {triple[0].tolist()} references an element without an embedding")
    return int(_rank_block(model, triple, side, filt, entity_mask)[0])


def _rank_block(model, triples, side, filt, entity_mask):
    q = _query_vectors(model, triples, side)
    sq = model.norm == "L2"
    dist = query_distances(q, model.ent, model.norm, squared=sq)
    if entity_mask is not None:
        dist[:, ~entity_mask[: model.n_entities]] = np.inf
    col = 2 if side == TAIL else 0
    true_ids = triples[:, col]
    true_d = dist[np.arange(len(triples)), true_ids]
    for i, triple in enumerate(triples):
        others = [e for e in filt.answers(triple, side) if e != true_ids[i] and e < model.n_entities]
        if others:
            dist[i, others] = np.inf
    return 1 + np.sum(dist < true_d[:, None], axis=1)


def rank_queries(model, triples, side, filt, entity_mask=None, batch_size=256, workers=1):
    """Filtered ranks for a block of triples on one side.

    Returns ``(ranks, keep)`` where ``keep`` marks the triples whose
    elements all have embeddings; the others are skipped.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    keep = _known_mask(model, triples, entity_mask)
    kept = triples[keep]
    chunks = [kept[s:s + batch_size] for s in range(0, len(kept), batch_size)]
    if not chunks:
        return np.zeros(0, dtype=np.int64), keep
    fn = lambda c: _rank_block(model, c, side, filt, entity_mask)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return np.concatenate(parts).astype(np.int64), keep


def metrics_from_ranks(ranks):
    ranks = np.asarray(ranks, dtype=np.float64)
    if len(ranks) == 0:
        return LinkMetrics(0.0, 0.0, 0.0, 0, 0)
    return LinkMetrics(float(np.mean(1.0 / ranks)), float(np.mean(ranks <= 1)),
                       float(np.mean(ranks <= 10)), len(ranks), 0)


def evaluate_triples(model, test_set, filt, entity_mask=None, batch_size=256, workers=1):
    """Ranks of both query sides for every evaluable test triple.

    Returns ``(query_triples, ranks, skipped)``; head queries come first.
    """
    test_set = np.asarray(test_set, dtype=np.int64).reshape(-1, 3)
    if len(test_set) == 0:
        raise EmptyTestSet("test set is empty")
    qs, rs = [], []
    skipped = 0
    for side in (HEAD, TAIL):
        ranks, keep = rank_queries(model, test_set, side, filt, entity_mask, batch_size, workers)
        qs.append(test_set[keep])
        rs.append(ranks)
        skipped += int(np.sum(~keep))
    if skipped:
        log.info("skipped %d queries whose elements have no embedding", skipped)
    return np.concatenate(qs), np.concatenate(rs), skipped


def link_prediction_metrics(model, test_set, filt, entity_mask=None, batch_size=256, workers=1):
    """MRR, Hits@1 and Hits@10 averaged over head and tail queries."""
    _, ranks, skipped = evaluate_triples(model, test_set, filt, entity_mask, batch_size, workers)
    m = metrics_from_ranks(ranks)
    m.skipped = skipped
    return m


def cumulative_metrics(per_set):
    """Unweighted mean of per-test-set metrics."""
    per_set = list(per_set)
    if not per_set:
        raise EmptyTestSet("no per-test-set metrics to average")
    return LinkMetrics(
        float(np.mean([m.mrr for m in per_set])),
        float(np.mean([m.h1 for m in per_set])),
        float(np.mean([m.h10 for m in per_set])),
        sum(m.n_queries for m in per_set),
        sum(m.skipped for m in per_set),
    )


def rtf(h):
    """Resistance to Forgetting from the MRR matrix ``h[i][j]``.

    ``h[i][j]`` is the MRR on test set ``j`` after training snapshot ``i``.
    Averages ``h[n-1][i] / (h[i][i] + h[n-1][i])`` over ``i < n-1``; this is
    0.5 when nothing is forgotten and 0 when everything is.
    """
    h = np.asarray(h, dtype=np.float64)
    n = h.shape[0]
    if n < 2 or h.shape[1] < n:
        raise ValueError("need an n x n matrix with n >= 2")
    terms = []
    for i in range(n - 1):
        denom = h[i, i] + h[n - 1, i]
        if denom == 0:
            log.warning("RtF term %d skipped: h[%d,%d] + h[%d,%d] == 0", i, i, i, n - 1, i)
            continue
        terms.append(h[n - 1, i] / denom)
    if not terms:
        raise DegenerateDiagonal("every RtF term has a zero denominator")
    return float(np.mean(terms))


@dataclass
class MetricsRecord:
    snapshot: int
    mrr: float
    h1: float
    h10: float
    cum_mrr: float
    cum_h1: float
    cum_h10: float
    dim: int
    per_set: list
    skipped: int = 0

    def to_json(self):
        d = asdict(self)
        d["per_set"] = [asdict(m) if isinstance(m, LinkMetrics) else m for m in self.per_set]
        return d
