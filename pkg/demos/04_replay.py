"""Entropy-weighted replay: hard triples are replayed more often.

Each old triple gets the mean entropy of its head-side and tail-side
softmax over candidate entities. A softmax over those entropies is the
sampling distribution; the replay set is drawn without replacement.
"""
import numpy as np

from ckge.model import TransE
from ckge.sampler import difficulty_replay, replay_distribution, triple_entropies

rng = np.random.default_rng(0)
model = TransE.random(50, 3, 16, rng)
triples = np.stack([rng.integers(0, 50, 200), rng.integers(0, 3, 200), rng.integers(0, 50, 200)], 1)

# an untrained model is close to uniform everywhere, so the spread is small
h = triple_entropies(model, triples)
p = replay_distribution(h)
print(f"entropies: min={h.min():.4f} max={h.max():.4f} (ln 50 = {np.log(50):.4f})")
print(f"probabilities: min={p.min():.5f} max={p.max():.5f}, sum={p.sum():.12f}")

replay = difficulty_replay(model, triples, 30, rng)
print(f"\nreplayed {len(replay)} triples, mean entropy {replay.entropies.mean():.4f} "
      f"vs pool mean {h.mean():.4f}")
