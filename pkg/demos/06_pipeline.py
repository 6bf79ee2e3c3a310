"""The full continual pipeline against fine-tuning on a synthetic evolving graph.

Uses a smaller version of the desk preset so it finishes in well under a
minute. Results are for one seed; the acceptance suite reports medians.
"""
from ckge.config import RunConfig
from ckge.synthetic import DESK_CONFIG, make_sequence

from ckge import run_pipeline

vocab, snaps = make_sequence(n_entities=400, n_relations=6, n_triples=8000, growth="lower", seed=1)
for s in snaps:
    print(f"snapshot {s.index}: {len(s.train)} train / {len(s.valid)} valid / {len(s.test)} test")

for mode in ("sage", "finetune"):
    cfg = RunConfig({**DESK_CONFIG, "mode": mode, "train.max_epochs": 60})
    res = run_pipeline(snaps, cfg, vocab)
    last = res.records[-1]
    print(f"\n{mode}: dims={res.dims}")
    for rec in res.records:
        print(f"  after {rec.snapshot}: MRR={rec.mrr:.3f} cumulative MRR={rec.cum_mrr:.3f}")
    print(f"  final cumulative MRR={last.cum_mrr:.3f} H@10={last.cum_h10:.3f} RtF={res.rtf:.3f}")
