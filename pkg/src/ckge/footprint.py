"""Novelty and reliance footprints and the distillation weights built from them.

Entities and relations live in separate id spaces, so every per-element
quantity here is a pair of arrays indexed by entity id and relation id.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _entity_counts(triples, n_entities):
    # head and tail counted separately: a self-loop contributes 2
    both = np.concatenate([triples[:, 0], triples[:, 2]])
    return np.bincount(both, minlength=n_entities)[:n_entities]


def _relation_counts(triples, n_relations):
    return np.bincount(triples[:, 1], minlength=n_relations)[:n_relations]


def occurrence_counts(triples, n_entities, n_relations):
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    return _entity_counts(triples, n_entities), _relation_counts(triples, n_relations)


def novelty_footprint(new_triples, n_entities, n_relations):
    """How often each element occurs in the upcoming new triples."""
    return occurrence_counts(new_triples, n_entities, n_relations)


@dataclass
class QualityScores:
    """Per-element representation quality in [0, 1]; NaN means "no queries"."""

    ent: np.ndarray
    rel: np.ndarray
    fallback: float = 1.0

    def filled(self, n_entities=None, n_relations=None):
        """Scores with the fallback substituted, padded to the requested sizes."""
        ent = _pad_nan(self.ent, n_entities)
        rel = _pad_nan(self.rel, n_relations)
        ent = np.where(np.isnan(ent), self.fallback, ent)
        rel = np.where(np.isnan(rel), self.fallback, rel)
        return ent, rel

    @classmethod
    def uniform(cls, n_entities, n_relations, value=1.0):
        return cls(np.full(n_entities, np.nan), np.full(n_relations, np.nan), value)


def _pad_nan(arr, n):
    if n is None or len(arr) >= n:
        return arr if n is None else arr[:n]
    return np.concatenate([arr, np.full(n - len(arr), np.nan)])


def element_quality(query_triples, ranks, n_entities, n_relations):
    """Mean reciprocal rank over the queries whose triple contains each element.

    Parameters
    ----------
    query_triples : (q, 3) int array
        The triple behind each query (one row per head or tail query).
    ranks : (q,) int array
        Filtered rank of each query.

    Elements with no query get NaN and fall back to the overall MRR.
    """
    q = np.asarray(query_triples, dtype=np.int64).reshape(-1, 3)
    ranks = np.asarray(ranks, dtype=np.float64)
    if len(q) == 0:
        return QualityScores.uniform(n_entities, n_relations)
    rr = 1.0 / ranks
    h, r, t = q[:, 0], q[:, 1], q[:, 2]
    loop = h == t
    ent_sum = (np.bincount(h, rr, minlength=n_entities)
               + np.bincount(t[~loop], rr[~loop], minlength=n_entities))[:n_entities]
    ent_cnt = (np.bincount(h, minlength=n_entities)
               + np.bincount(t[~loop], minlength=n_entities))[:n_entities]
    rel_sum = np.bincount(r, rr, minlength=n_relations)[:n_relations]
    rel_cnt = np.bincount(r, minlength=n_relations)[:n_relations]
    with np.errstate(invalid="ignore", divide="ignore"):
        ent = np.where(ent_cnt > 0, ent_sum / np.maximum(ent_cnt, 1), np.nan)
        rel = np.where(rel_cnt > 0, rel_sum / np.maximum(rel_cnt, 1), np.nan)
    return QualityScores(ent, rel, float(rr.mean()))


def reliance_footprint(triples, quality, n_entities, n_relations):
    """Historical occurrence count damped by ``exp(-(1 - R))``."""
    ent_cnt, rel_cnt = occurrence_counts(triples, n_entities, n_relations)
    ent_q, rel_q = quality.filled(n_entities, n_relations)
    return ent_cnt * np.exp(-(1.0 - ent_q)), rel_cnt * np.exp(-(1.0 - rel_q))


def dwt_weight(f_r, f_n):
    """Distillation weight ``f_r / (f_n + 1)``; finite even when ``f_n == 0``."""
    return np.asarray(f_r, dtype=np.float64) / (np.asarray(f_n, dtype=np.float64) + 1.0)


@dataclass
class Footprints:
    novelty_ent: np.ndarray
    novelty_rel: np.ndarray
    reliance_ent: np.ndarray
    reliance_rel: np.ndarray
    quality: QualityScores | None = None

    @classmethod
    def compute(cls, new_triples, old_triples, quality, n_entities, n_relations):
        n_e, n_r = novelty_footprint(new_triples, n_entities, n_relations)
        r_e, r_r = reliance_footprint(old_triples, quality, n_entities, n_relations)
        return cls(n_e, n_r, r_e, r_r, quality)

    def weights(self):
        return (dwt_weight(self.reliance_ent, self.novelty_ent),
                dwt_weight(self.reliance_rel, self.novelty_rel))

    def rows(self, vocab):
        """``(kind, name, f_n, f_r, R)`` for every element."""
        n_e, n_r = len(self.novelty_ent), len(self.novelty_rel)
        if self.quality is not None:
            ent_q, rel_q = self.quality.filled(n_e, n_r)
        else:
            ent_q, rel_q = np.ones(n_e), np.ones(n_r)
        for i in range(n_e):
            yield "entity", vocab.entities[i], int(self.novelty_ent[i]), float(self.reliance_ent[i]), float(ent_q[i])
        for i in range(n_r):
            yield "relation", vocab.relations[i], int(self.novelty_rel[i]), float(self.reliance_rel[i]), float(rel_q[i])

    def write_tsv(self, fh, vocab, snapshot=None):
        """Append TSV rows (``snapshot`` first when given) to an open text file."""
        for kind, name, f_n, f_r, q in self.rows(vocab):
            prefix = "" if snapshot is None else f"{snapshot}\t"
            fh.write(f"{prefix}{kind}\t{name}\t{f_n}\t{f_r:.6g}\t{q:.6g}\n")
