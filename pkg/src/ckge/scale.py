"""Logarithmic parameter-scale fit and the adaptive dimension update rule.

The total parameter count ``P = d * (|E| + |R|)`` is modelled as
``P = a * log_b(N)`` with ``N`` the cumulative triple count. ``a`` and
``b`` are not separately identifiable, so ``b`` is fixed to ``e`` for the
fit and ``a`` absorbs the scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, InsufficientPoints

# Cumulative entities, cumulative relations, and per-step triple counts of the
# seven public continual-KGE benchmarks, five snapshots each.
REFERENCE_STATS = {
    "ENTITY": [(2909, 233, 46388), (5817, 236, 72111), (8275, 236, 73785),
               (11633, 237, 70506), (14541, 237, 47326)],
    "RELATION": [(11560, 48, 98819), (13343, 96, 93535), (13754, 143, 66136),
                 (14387, 190, 30032), (14541, 237, 21594)],
    "FACT": [(10513, 237, 62024), (12779, 237, 62023), (13586, 237, 62023),
             (13894, 237, 62023), (14541, 237, 62023)],
    "HYBRID": [(8628, 86, 57561), (10040, 102, 20873), (12779, 151, 88017),
               (14393, 209, 103339), (14541, 237, 40326)],
    "GraphEqual": [(2908, 226, 57636), (5816, 235, 62023), (8724, 237, 62023),
                   (11632, 237, 62023), (14541, 237, 66411)],
    "GraphHigher": [(900, 197, 10000), (1838, 221, 20000), (3714, 234, 40000),
                    (7467, 237, 80000), (14541, 237, 160116)],
    "GraphLower": [(7505, 237, 160000), (11258, 237, 80000), (13134, 237, 40000),
                   (14072, 237, 20000), (14541, 237, 10116)],
}

REFERENCE_DIM = 200


@dataclass(frozen=True)
class ScaleFit:
    a: float
    b: float = math.e
    band: float = 0.2
    rms: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 1 and 0 <= self.band < 1):
            raise ValueError(f"invalid scale fit a={self.a} b={self.b} band={self.band}")

    def params(self, n):
        """Predicted total parameter count at ``n`` triples."""
        return self.a * math.log(n) / math.log(self.b)

    def with_base(self, b):
        """The same curve expressed with log base ``b``."""
        return ScaleFit(self.a * math.log(b) / math.log(self.b), b, self.band, self.rms)


@dataclass(frozen=True)
class DimBounds:
    y_min: int
    y: int
    y_max: int

    def __post_init__(self):
        if not (1 <= self.y_min <= self.y <= self.y_max):
            raise ValueError(f"need 1 <= y_min <= y <= y_max, got {self}")


@dataclass(frozen=True)
class DimPolicy:
    r: float = 1.25
    step: int = 10

    def __post_init__(self):
        if not (self.r > 1 and self.step >= 1):
            raise ValueError(f"need r > 1 and step >= 1, got {self}")


def round_half_up(x):
    return int(math.floor(x + 0.5))


def fit_scale_curve(points, band=0.2):
    """Least-squares fit of ``P = a * ln(N)`` (no intercept).

    Parameters
    ----------
    points : sequence of (N, P)
        Triple counts ``N > 1`` with parameter counts ``P > 0``.
    band : float
        Fractional half-width of the dimension band around the prediction.

    Returns
    -------
    ScaleFit
        With ``b = e`` and the residual RMS of the fit.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        raise InsufficientPoints(f"need at least 2 points, got {len(pts)}")
    n, p = pts[:, 0], pts[:, 1]
    if np.all(n == n[0]):
        raise DegenerateInput("all triple counts are equal")
    if np.any(n <= 1) or np.any(p <= 0):
        raise DegenerateInput("need N > 1 and P > 0 for every point")
    x = np.log(n)
    a = float(x @ p / (x @ x))
    rms = float(np.sqrt(np.mean((a * x - p) ** 2)))
    return ScaleFit(a=a, b=math.e, band=band, rms=rms)


def reference_points(stats=None, dim=REFERENCE_DIM):
    """``(N, P)`` pairs from per-snapshot dataset counts at a fixed dimension.

    ``N`` accumulates the per-step triple counts; ``P = dim * (N_E + N_R)``.
    """
    stats = REFERENCE_STATS if stats is None else stats
    pts = []
    for rows in stats.values():
        total = 0
        for n_ent, n_rel, n_tri in rows:
            total += n_tri
            pts.append((total, dim * (n_ent + n_rel)))
    return pts


def predict_bounds(fit, n, rowcount):
    """Target dimension band for a graph with ``n`` triples and ``rowcount`` embedded elements."""
    if n <= 1 or rowcount < 1:
        raise ValueError(f"need N > 1 and rowcount >= 1, got N={n} rowcount={rowcount}")
    y = max(1, round_half_up(fit.params(n) / rowcount))
    y_min = max(1, round_half_up(y * (1 - fit.band)))
    y_max = max(y, round_half_up(y * (1 + fit.band)))
    return DimBounds(y_min, y, y_max)


def update_dimension(d, bounds, policy):
    """Next embedding dimension from the current one.

    Cases are checked in order: grow geometrically while ``r * d`` stays
    under ``y_min``; jump to ``y_min`` or ``y`` when below them; creep by
    ``step`` inside ``(y, y_max]``; otherwise keep ``d``. The five cases
    cover every ``d >= 1``, so a trailing "else y_max" branch is never
    reached and is not implemented.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    scaled = policy.r * d
    if scaled <= bounds.y_min:
        return max(d, round_half_up(scaled))
    if d <= bounds.y_min:
        return bounds.y_min
    if d <= bounds.y:
        return bounds.y
    if d <= bounds.y_max:
        return d + policy.step
    return d


def which_case(d, bounds, policy):
    """Index (1-5) of the update case that applies to ``d``."""
    if policy.r * d <= bounds.y_min:
        return 1
    if d <= bounds.y_min:
        return 2
    if d <= bounds.y:
        return 3
    if d <= bounds.y_max:
        return 4
    return 5
