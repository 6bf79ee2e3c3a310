"""Walk the dimension-update rule through its five cases.

Given bounds ``(y_min, y, y_max)`` and a policy ``(r, step)`` the rule grows
geometrically far below the band, snaps to ``y_min`` or ``y`` close to it,
creeps by ``step`` inside the upper half and stays put above ``y_max``.
"""
from ckge.scale import DimBounds, DimPolicy, update_dimension, which_case

bounds = DimBounds(100, 150, 200)
policy = DimPolicy(r=1.25, step=10)

for d in (40, 85, 100, 120, 150, 160, 200, 230):
    print(f"d={d:>3} -> {update_dimension(d, bounds, policy):>3} (case {which_case(d, bounds, policy)})")

# Iterating from a small start shows the trajectory a growing model follows
# when the bounds stay fixed: fast growth, then a plateau.
d, path = 8, [8]
for _ in range(15):
    d = update_dimension(d, bounds, policy)
    path.append(d)
print("\ntrajectory from 8:", path)
