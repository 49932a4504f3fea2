"""Node cost assignment along graph columns.

Costs are "unlikeliness" values in [0, 1]: low cost marks nodes where the
image evidence puts the surface.  Raw derivative scores are clipped at zero
and min-max normalized over the whole surface so that the interactive
rewrite values {0, 1} are the global extremes.

Sign conventions are per-surface configuration: a bone edge is a dark-to-
bright transition walking outward (positive first derivative scores), a
cartilage outer edge is bright-to-dark (negative first derivative scores,
positive second derivative just outside the band).
"""

from __future__ import annotations

import numpy as np

from .geometry import ColumnSet
from .volume import Volume, deriv1, deriv2


class CostError(ValueError):
    """Raised for invalid cost computations."""


def _scores_to_costs(raw: np.ndarray) -> np.ndarray:
    """Map signed scores to [0, 1] unlikeliness: clip negatives, invert, normalize."""
    clipped = np.maximum(raw, 0.0)
    lo = clipped.min()
    hi = clipped.max()
    rng = hi - lo
    if rng <= 0.0:
        return np.ones_like(clipped)
    return 1.0 - (clipped - lo) / rng


def _column_scores(v: Volume, cols: ColumnSet, want_second: bool):
    dirs = cols.node_directions()  # raises on degenerate columns
    n, k = cols.n_cols, cols.k
    pts = cols.positions.reshape(n * k, 3)
    dvec = dirs.reshape(n * k, 3)
    d1, _ = deriv1(v, pts, dvec)
    d2 = None
    if want_second:
        d2, _ = deriv2(v, pts, dvec)
        d2 = d2.reshape(n, k)
    return d1.reshape(n, k), d2


def bone_scores(v: Volume, cols: ColumnSet, sign: float = 1.0) -> np.ndarray:
    """Raw (pre-normalization) bone scores: signed first derivative."""
    d1, _ = _column_scores(v, cols, want_second=False)
    return sign * d1


def bone_costs(v: Volume, cols: ColumnSet, sign: float = 1.0) -> np.ndarray:
    """Bone surface costs, [n_cols, K] in [0, 1]."""
    return _scores_to_costs(bone_scores(v, cols, sign))


def cartilage_scores(
    v: Volume,
    cols: ColumnSet,
    w: float,
    sign1: float = -1.0,
    sign2: float = 1.0,
) -> np.ndarray:
    """Raw cartilage scores: w * deriv1 term + (1 - w) * deriv2 term."""
    if not (0.0 <= w <= 1.0):
        raise CostError(f"w must be in [0, 1], got {w}")
    d1, d2 = _column_scores(v, cols, want_second=True)
    return w * (sign1 * d1) + (1.0 - w) * (sign2 * d2)


def cartilage_costs(
    v: Volume,
    cols: ColumnSet,
    w: float = 0.5,
    sign1: float = -1.0,
    sign2: float = 1.0,
) -> np.ndarray:
    """Cartilage surface costs, [n_cols, K] in [0, 1]."""
    return _scores_to_costs(cartilage_scores(v, cols, w, sign1, sign2))
