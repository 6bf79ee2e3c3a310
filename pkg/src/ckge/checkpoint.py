"""Checkpoints as ``.npz`` archives.

An archive holds the entity and relation tables (``ent``, ``rel``; float64,
row-major), their Adam moments and step counters, the scoring norm, and
the vocabulary names in id order. Loading one restores an identical
:class:`~ckge.model.TransE` and :class:`~ckge.kg.Vocabulary`.
"""
import numpy as np

from .kg import Vocabulary
from .model import AdamState, TransE


def save_checkpoint(path, model, vocab, **extra):
    np.savez(
        path,
        ent=model.ent, rel=model.rel,
        ent_m=model.ent_opt.m, ent_v=model.ent_opt.v, ent_t=np.int64(model.ent_opt.t),
        rel_m=model.rel_opt.m, rel_v=model.rel_opt.v, rel_t=np.int64(model.rel_opt.t),
        norm=np.str_(model.norm),
        entities=np.array(vocab.entities, dtype=np.str_),
        relations=np.array(vocab.relations, dtype=np.str_),
        **{f"meta_{k}": np.asarray(v) for k, v in extra.items()},
    )


def load_checkpoint(path):
    """Return ``(model, vocab, meta)``."""
    with np.load(path, allow_pickle=False) as z:
        model = TransE(z["ent"], z["rel"], norm=str(z["norm"]))
        model.ent_opt = AdamState(z["ent_m"].copy(), z["ent_v"].copy(), int(z["ent_t"]))
        model.rel_opt = AdamState(z["rel_m"].copy(), z["rel_v"].copy(), int(z["rel_t"]))
        vocab = Vocabulary.from_names(z["entities"].tolist(), z["relations"].tolist())
        meta = {k[5:]: z[k] for k in z.files if k.startswith("meta_")}
    return model, vocab, meta
