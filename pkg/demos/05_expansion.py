"""Grow an embedding from 8 to 12 dimensions without touching the old prefix.

A small network maps each old vector to the new suffix coordinates. Only
the network is trained (on a replay set); the original 8 columns are copied
through bit for bit.
"""
import numpy as np

from ckge.expander import build_net, expand_all, expansion_loss, train_expansion
from ckge.model import TransE, sample_negatives

rng = np.random.default_rng(0)
model = TransE.random(60, 4, 8, rng)
replay = np.stack([rng.integers(0, 60, 40), rng.integers(0, 4, 40), rng.integers(0, 60, 40)], 1)
fixed_neg = sample_negatives(replay, 60, 40, rng)

net = build_net(8, 4, rng)
print(f"expansion net: {net.n_params} parameters")
before = expansion_loss(net, model.ent, model.rel, replay, fixed_neg, 2.0)[0]
train_expansion(net, replay, model.ent, model.rel, gamma=2.0, epochs=20, lr=0.01, rng=rng)
after = expansion_loss(net, model.ent, model.rel, replay, fixed_neg, 2.0)[0]
print(f"replay loss on fixed negatives: {before:.3f} -> {after:.3f}")

grown = expand_all(model.ent, model.rel, net)
print("entity table:", model.ent.shape, "->", grown.ent.shape)
print("prefix identical:", grown.ent[:, :8].tobytes() == model.ent.tobytes()
      and grown.rel[:, :8].tobytes() == model.rel.tobytes())
