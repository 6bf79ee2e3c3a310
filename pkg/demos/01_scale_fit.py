"""Fit the parameter-scale curve and turn it into per-snapshot dimension bands.

The curve ``P = a * ln(N)`` relates the total triple count ``N`` of a graph
to a parameter budget ``P``. Dividing by the number of embedded rows gives a
target dimension ``y`` with a band ``[y_min, y_max]`` around it.
"""
from ckge.scale import REFERENCE_STATS, fit_scale_curve, predict_bounds, reference_points

# (N, P) pairs from the benchmark statistics, priced at 200 dimensions
points = reference_points()
fit = fit_scale_curve(points)
print(f"fitted a = {fit.a:.2f} from {len(points)} points, residual RMS = {fit.rms:.3g}")

# The curve grows with ln N while the row count grows roughly linearly,
# so the implied dimension shrinks as a graph gets larger.
for name in ("ENTITY", "GraphLower"):
    total = 0
    print(f"\n{name}")
    for i, (n_ent, n_rel, n_tri) in enumerate(REFERENCE_STATS[name]):
        total += n_tri
        b = predict_bounds(fit, total, n_ent + n_rel)
        print(f"  snapshot {i}: N={total:>7} rows={n_ent + n_rel:>6} -> y_min={b.y_min} y={b.y} y_max={b.y_max}")
