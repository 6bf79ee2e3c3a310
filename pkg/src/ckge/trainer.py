"""Per-snapshot training and the three-stage continual pipeline.

For every snapshot after the first the pipeline

1. measures the grown graph, picks the next dimension, computes
   footprints and draws a replay set;
2. expands the old embeddings (frozen prefix plus learned suffix) and
   initializes the new elements;
3. trains on the new triples only, with a footprint-weighted penalty
   pulling old elements toward their expanded representations.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import expander, sampler
from .config import RunConfig, TrainConfig
from .errors import CKGEError, SnapshotError
from .evaluator import (MetricsRecord, TripleFilter, cumulative_metrics, evaluate_triples,
                        link_prediction_metrics, metrics_from_ranks, rtf)
from .footprint import Footprints, QualityScores, element_quality
from .kg import SPLITS, EvolvingKG
from .model import TransE, adam_step, as_rng, margin_loss_and_grads, normalize_entities, sample_negatives
from .scale import predict_bounds, update_dimension

log = logging.getLogger(__name__)


@dataclass
class DistillAnchors:
    """Frozen expanded representations and per-element weights.

    Weights are zero for elements that did not exist before this snapshot.
    """

    ent: np.ndarray
    rel: np.ndarray
    w_ent: np.ndarray
    w_rel: np.ndarray

    @classmethod
    def from_model(cls, model, w_ent, w_rel):
        return cls(model.ent.copy(), model.rel.copy(),
                   np.asarray(w_ent, dtype=np.float64), np.asarray(w_rel, dtype=np.float64))


def integration_loss(model, pos, neg, gamma):
    """Summed margin loss over a batch of new triples; gradients reach every row touched."""
    return margin_loss_and_grads(model.ent, model.rel, pos, neg, gamma, model.norm)


def _dwt_rows(table, anchor, weights, rows):
    diff = table[rows] - anchor[rows]
    w = weights[rows]
    loss = float(np.sum(w * np.sum(diff * diff, axis=1)))
    return loss, 2.0 * w[:, None] * diff


def dwt_loss(model, anchors, ent_rows, rel_rows):
    """``sum_j w_j ||h_j - h'_j||^2`` over the given rows; gradients go to the live tables only."""
    ent_rows = np.asarray(ent_rows, dtype=np.int64)
    rel_rows = np.asarray(rel_rows, dtype=np.int64)
    le, ge = _dwt_rows(model.ent, anchors.ent, anchors.w_ent, ent_rows)
    lr_, gr = _dwt_rows(model.rel, anchors.rel, anchors.w_rel, rel_rows)
    return le + lr_, (ent_rows, ge), (rel_rows, gr)


def total_loss(l_itg, l_dwt, alpha):
    return l_itg + alpha * l_dwt


def _merge(a, b, scale):
    rows = np.union1d(a[0], b[0])
    out = np.zeros((len(rows), a[1].shape[1] if len(a[1]) else b[1].shape[1]))
    if len(a[0]):
        out[np.searchsorted(rows, a[0])] += a[1]
    if len(b[0]):
        out[np.searchsorted(rows, b[0])] += scale * b[1]
    return rows, out


def combined_loss(model, pos, neg, gamma, anchors=None, alpha=0.0):
    """Integration loss plus ``alpha`` times the distillation loss on the rows the batch touches.

    Returns ``(loss, l_itg, l_dwt, ent_grad, rel_grad)`` with row-sparse gradients.
    """
    l_itg, g_ent, g_rel = integration_loss(model, pos, neg, gamma)
    if anchors is None or alpha == 0:
        return l_itg, l_itg, 0.0, g_ent, g_rel
    ent_rows = np.unique(np.concatenate([pos[:, 0], pos[:, 2], neg[:, 0], neg[:, 2]]))
    rel_rows = np.unique(np.concatenate([pos[:, 1], neg[:, 1]]))
    ent_rows = ent_rows[anchors.w_ent[ent_rows] > 0]
    rel_rows = rel_rows[anchors.w_rel[rel_rows] > 0]
    l_dwt, d_ent, d_rel = dwt_loss(model, anchors, ent_rows, rel_rows)
    return (total_loss(l_itg, l_dwt, alpha), l_itg, l_dwt,
            _merge(g_ent, d_ent, alpha), _merge(g_rel, d_rel, alpha))


def _apply(model, lr, g_ent, g_rel):
    if len(g_ent[0]):
        adam_step(model.ent, g_ent[1], model.ent_opt, lr, rows=g_ent[0])
        normalize_entities(model.ent, g_ent[0])
    if len(g_rel[0]):
        adam_step(model.rel, g_rel[1], model.rel_opt, lr, rows=g_rel[0])


@dataclass
class TrainResult:
    epochs: int = 0
    best_mrr: float = float("nan")
    best_epoch: int = 0
    losses: list = field(default_factory=list)
    valid_mrr: list = field(default_factory=list)


def train_snapshot(model, triples, config, anchors=None, valid=None, filt=None,
                   entity_mask=None, rng=None):
    """Mini-batch training on ``triples`` with early stopping on validation MRR.

    ``model`` is updated in place and ends at the best-validation state.
    Without a validation set every epoch runs and the final state is kept.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    result = TrainResult()
    if len(triples) == 0:
        return result
    rng = as_rng(config.seed if rng is None else rng)
    known = None
    if config.filter_negatives and filt is not None:
        known = {(h, r, t) for (h, r), ts in filt.tails.items() for t in ts}
    alpha = config.alpha if anchors is not None else 0.0
    has_valid = valid is not None and len(valid) > 0
    best = None
    bad = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(triples))
        epoch_loss = 0.0
        for s in range(0, len(order), config.batch_size):
            pos = triples[order[s:s + config.batch_size]]
            neg = sample_negatives(pos, model.n_entities, config.negatives, rng, known=known)
            loss, _, _, g_ent, g_rel = combined_loss(
                model, pos, neg, config.margin,
                anchors if config.dwt_scope == "batch" else None, alpha)
            epoch_loss += loss
            _apply(model, config.lr, g_ent, g_rel)
        if config.dwt_scope == "full" and alpha > 0:
            ent_rows = np.flatnonzero(anchors.w_ent > 0)
            rel_rows = np.flatnonzero(anchors.w_rel > 0)
            l_dwt, d_ent, d_rel = dwt_loss(model, anchors, ent_rows, rel_rows)
            epoch_loss += alpha * l_dwt
            _apply(model, config.lr, (d_ent[0], alpha * d_ent[1]), (d_rel[0], alpha * d_rel[1]))
        result.losses.append(epoch_loss)
        result.epochs = epoch
        if not has_valid:
            continue
        if epoch % config.eval_interval == 0 or epoch == config.max_epochs:
            mrr = link_prediction_metrics(model, valid, filt, entity_mask,
                                          config.eval_batch_size, config.workers).mrr
            result.valid_mrr.append((epoch, mrr))
            if config.verbose:
                print(f"epoch {epoch:4d}  loss {epoch_loss:.4f}  valid_mrr {mrr:.4f}", flush=True)
            if best is None or mrr > result.best_mrr:
                result.best_mrr, result.best_epoch = mrr, epoch
                best = model.copy()
                bad = 0
            else:
                bad += 1
                if bad >= config.patience:
                    break
        elif config.verbose:
            print(f"epoch {epoch:4d}  loss {epoch_loss:.4f}", flush=True)
    if best is not None:
        model.ent, model.rel = best.ent, best.rel
        model.ent_opt, model.rel_opt = best.ent_opt, best.rel_opt
    return result


@dataclass
class SnapshotReport:
    """What happened at one step of the pipeline (beyond the metrics)."""

    index: int
    dim: int
    bounds: tuple | None = None
    replay: np.ndarray | None = None
    expansion_losses: list = field(default_factory=list)
    train: TrainResult | None = None
    footprints: Footprints | None = None


@dataclass
class PipelineResult:
    records: list
    h: np.ndarray
    dims: list
    model: TransE
    reports: list
    rtf: float | None = None


def _table_sizes(snapshots):
    n_e = n_r = 0
    for s in snapshots:
        for name in SPLITS:
            tri = s.split(name)
            if len(tri):
                n_e = max(n_e, int(tri[:, [0, 2]].max()) + 1)
                n_r = max(n_r, int(tri[:, 1].max()) + 1)
    return n_e, n_r


def _mask(ids, n):
    m = np.zeros(n, dtype=bool)
    if ids:
        m[np.fromiter(ids, dtype=np.int64)] = True
    return m


def initial_dimension(cfg, kg):
    mode, abl = cfg["mode"], cfg.ablations
    if mode != "sage" or "SE" in abl:
        return cfg["dim.fixed"]
    if cfg["dim.initial"] not in ("", "auto"):
        return int(cfg["dim.initial"])
    n_e, n_r, n_t = kg.element_counts()
    y = predict_bounds(cfg.scale_fit(), max(n_t, 2), max(n_e + n_r, 1)).y
    return int(min(max(y, cfg["dim.initial_min"]), cfg["dim.initial_max"]))


def next_dimension(cfg, kg, d):
    """Dimension for the snapshot just ingested into ``kg``; returns ``(d_next, bounds)``."""
    if cfg["mode"] != "sage":
        return d, None
    if "SE" in cfg.ablations:
        return d + cfg["policy.step"], None
    n_e, n_r, n_t = kg.element_counts()
    bounds = predict_bounds(cfg.scale_fit(), max(n_t, 2), max(n_e + n_r, 1))
    return update_dimension(d, bounds, cfg.policy()), bounds


def run_pipeline(snapshots, cfg=None, vocab=None, on_snapshot=None):
    """Train over a snapshot sequence and evaluate after every step.

    Parameters
    ----------
    snapshots : list of Snapshot
    cfg : RunConfig
        Mode ``sage`` runs all three stages (minus ablated ones);
        ``finetune`` and ``fixed-dim`` keep ``dim.fixed`` and train plainly.
    on_snapshot : callable, optional
        Called as ``on_snapshot(index, model, record, report)`` after each step.
    """
    cfg = RunConfig() if cfg is None else cfg
    if not snapshots:
        raise ValueError("need at least one snapshot")
    tcfg = cfg.train_config()
    sage = cfg["mode"] == "sage"
    abl = cfg.ablations
    use_di = sage and "DI" not in abl and tcfg.alpha > 0
    seed = cfg["seed"]
    kg = EvolvingKG(vocab)
    filt = TripleFilter()
    n = len(snapshots)
    h = np.zeros((n, n))
    records, dims, reports = [], [], []
    model = None
    quality = None
    d = None
    for i, snap in enumerate(snapshots):
        try:
            rng = np.random.default_rng([seed, i])
            old_train = kg.cumulative_train()
            old_ents, old_rels = set(kg.seen_entities), set(kg.seen_relations)
            delta = kg.ingest(snap)
            for name in SPLITS:
                filt.add(snap.split(name))
            n_ent, n_rel = _table_sizes(snapshots[: i + 1])
            n_ent = max(n_ent, 2)
            report = SnapshotReport(index=i, dim=0)
            anchors = None
            if model is None:
                d = initial_dimension(cfg, kg)
                model = TransE.random(n_ent, max(n_rel, 1), d, rng, norm=tcfg.norm)
            else:
                d_next, bounds = next_dimension(cfg, kg, d)
                report.bounds = None if bounds is None else (bounds.y_min, bounds.y, bounds.y_max)
                fp = None
                if use_di:
                    q = quality or QualityScores.uniform(model.n_entities, model.n_relations)
                    fp = Footprints.compute(delta.triples, old_train, q, n_ent, n_rel)
                    report.footprints = fp
                ent, rel = stage_two(cfg, model, old_train, old_ents, delta, d_next,
                                     n_ent, n_rel, rng, report)
                model.set_tables(ent, rel)
                d = d_next
                if use_di:
                    w_ent, w_rel = fp.weights()
                    w_ent = np.where(_mask(old_ents, n_ent), w_ent, 0.0)
                    w_rel = np.where(_mask(old_rels, n_rel), w_rel, 0.0)
                    anchors = DistillAnchors.from_model(model, w_ent, w_rel)
            report.dim = d
            if cfg["train.reset_optimizer"]:
                model.reset_optimizer()
            mask = _mask(kg.seen_entities, model.n_entities)
            report.train = train_snapshot(model, snap.train, tcfg, anchors=anchors, valid=snap.valid,
                                          filt=filt, entity_mask=mask, rng=rng)
            per_set = []
            for j in range(i + 1):
                m = link_prediction_metrics(model, snapshots[j].test, filt, mask,
                                            tcfg.eval_batch_size, tcfg.workers) \
                    if len(snapshots[j].test) else metrics_from_ranks([])
                per_set.append(m)
                h[i, j] = m.mrr
            cum = cumulative_metrics(per_set)
            rec = MetricsRecord(i, per_set[-1].mrr, per_set[-1].h1, per_set[-1].h10,
                                cum.mrr, cum.h1, cum.h10, d, per_set, cum.skipped)
            if use_di and len(snap.valid):
                qt, ranks, _ = evaluate_triples(model, snap.valid, filt, mask,
                                                tcfg.eval_batch_size, tcfg.workers)
                quality = element_quality(qt, ranks, model.n_entities, model.n_relations)
            records.append(rec)
            dims.append(d)
            reports.append(report)
            log.info("snapshot %d: dim=%d mrr=%.4f cum_mrr=%.4f", i, d, rec.mrr, rec.cum_mrr)
            if on_snapshot is not None:
                on_snapshot(i, model, rec, report)
        except CKGEError as exc:
            raise SnapshotError(i, exc) from exc
    score = rtf(h) if n >= 2 and np.any(np.diag(h)[:-1] + h[-1, :-1] > 0) else None
    return PipelineResult(records, h, dims, model, reports, score)


def stage_two(cfg, model, old_train, old_ents, delta, d_next, n_ent, n_rel, rng, report=None):
    """Expanded and grown tables for the next snapshot; ``model`` is not modified.

    With ``d_next`` equal to the current dimension and no new elements the
    returned tables are byte-identical copies of the current ones.
    """
    report = SnapshotReport(index=-1, dim=d_next) if report is None else report
    ent, rel = model.ent.copy(), model.rel.copy()
    if d_next > model.dim:
        ent, rel = _expand_stage(cfg, cfg.train_config(), model, old_train, old_ents, d_next, rng, report)
        if cfg["expand.renormalize"]:
            normalize_entities(ent)
    return expander.init_new_elements(ent, rel, delta.entities, delta.relations, n_ent, n_rel, rng)


def _expand_stage(cfg, tcfg, model, old_train, old_ents, d_next, rng, report):
    """Replay selection plus expansion of every old row to ``d_next`` coordinates."""
    abl = cfg.ablations
    k = cfg["replay.k"]
    if "DS" in abl:
        replay = sampler.uniform_replay(old_train, k, rng)
    else:
        cands = np.array(sorted(old_ents), dtype=np.int64)
        replay = sampler.difficulty_replay(model, old_train, k, rng, candidates=cands,
                                           n_candidates=cfg.replay_candidates())
    report.replay = replay.triples
    epochs, lr = cfg["expand.epochs"], cfg.expand_lr()
    if "LE" in abl:
        state = expander.direct_suffix(model.ent, model.rel, d_next, rng)
        if len(replay):
            report.expansion_losses = expander.train_suffix(
                state, replay, tcfg.margin, epochs, lr, rng, tcfg.norm, tcfg.negatives)
        return state.ent, state.rel
    net = expander.build_net(model.dim, d_next - model.dim, rng, hidden=cfg.expand_hidden())
    if len(replay):
        report.expansion_losses = expander.train_expansion(
            net, replay, model.ent, model.rel, tcfg.margin, epochs, lr, rng, tcfg.norm, tcfg.negatives)
    state = expander.expand_all(model.ent, model.rel, net)
    return state.ent, state.rel
