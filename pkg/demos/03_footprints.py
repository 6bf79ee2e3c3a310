"""Novelty and reliance footprints on a hand-sized graph.

Novelty counts how often an element appears in the new triples. Reliance
counts its historical appearances, damped by how well the current model
ranks queries involving it. The distillation weight ``f_r / (f_n + 1)`` is
high for well-learned elements that the new data barely touches.
"""
import numpy as np

from ckge.footprint import Footprints, element_quality

# entities 0..4, relations 0..1
old = np.array([[0, 0, 1], [1, 0, 2], [0, 1, 2], [2, 1, 3], [0, 0, 3]])
new = np.array([[3, 0, 4], [4, 1, 4], [3, 1, 4]])   # (4, 1, 4) is a self-loop: counts twice
valid = np.array([[0, 0, 1], [2, 1, 3]])
ranks = np.array([1, 4])                              # filtered ranks from a validation pass

quality = element_quality(valid, ranks, 5, 2)
fp = Footprints.compute(new, old, quality, 5, 2)
w_ent, w_rel = fp.weights()

print("entity  f_n   f_r     weight")
for e in range(5):
    print(f"{e:>6} {fp.novelty_ent[e]:>4} {fp.reliance_ent[e]:>6.3f} {w_ent[e]:>8.3f}")
print("\nrelation f_n   f_r     weight")
for r in range(2):
    print(f"{r:>8} {fp.novelty_rel[r]:>4} {fp.reliance_rel[r]:>6.3f} {w_rel[r]:>8.3f}")
print(f"\nelements without validation queries use the overall MRR {quality.fallback:.3f}")
