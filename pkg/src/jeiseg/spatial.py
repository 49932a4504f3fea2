"""Spatial index over column node positions for nearest-node queries.

Backed by scipy's kd-tree; ties in distance are broken lexicographically on
(timepoint, surface, column, node) so that replayed edit scripts resolve to
identical node sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import ColumnSet


@dataclass(frozen=True)
class NodeRef:
    surface: int
    tp: int
    column: int
    node: int


class SpatialIndex:
    """Nearest-node lookup over one or more tagged column sets."""

    def __init__(self):
        self._pos: list[np.ndarray] = []
        self._tags: list[np.ndarray] = []
        self._tree: cKDTree | None = None
        self._points: np.ndarray | None = None
        self._info: np.ndarray | None = None

    def add(self, cols: ColumnSet, surface: int = 0, tp: int = 0) -> None:
        n, k = cols.n_cols, cols.k
        pts = cols.positions.reshape(n * k, 3)
        grid_c, grid_j = np.meshgrid(np.arange(n), np.arange(k), indexing="ij")
        info = np.empty((n * k, 4), dtype=np.int32)
        info[:, 0] = tp
        info[:, 1] = surface
        info[:, 2] = grid_c.ravel()
        info[:, 3] = grid_j.ravel()
        self._pos.append(pts)
        self._tags.append(info)
        self._tree = None

    def _build(self):
        if self._tree is None:
            if not self._pos:
                raise ValueError("spatial index is empty")
            self._points = np.concatenate(self._pos)
            self._info = np.concatenate(self._tags)
            self._tree = cKDTree(self._points)

    @property
    def size(self) -> int:
        self._build()
        return len(self._points)

    def nearest(self, p, n: int) -> list[tuple[NodeRef, float]]:
        """The true n nearest stored nodes, ascending distance.

        Ties at equal distance resolve by (tp, surface, column, node); if n
        exceeds the node count, all nodes are returned.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        self._build()
        total = len(self._points)
        n = min(n, total)
        k = min(total, n + 16)
        p = np.asarray(p, dtype=np.float64)
        while True:
            d, idx = self._tree.query(p, k=k)
            d = np.atleast_1d(d)
            idx = np.atleast_1d(idx)
            # widen the window until the cut is strictly below the next distance
            if k >= total or d[n - 1] < d[-1]:
                break
            k = min(total, k * 2)
        # keep every candidate not farther than the n-th, then sort with tags
        keep = d <= d[n - 1]
        cand_idx = idx[keep]
        cand_d = d[keep]
        info = self._info[cand_idx]
        order = np.lexsort((info[:, 3], info[:, 2], info[:, 1], info[:, 0], cand_d))
        out = []
        for o in order[:n]:
            t, s, c, j = (int(x) for x in info[o])
            out.append((NodeRef(surface=s, tp=t, column=c, node=j), float(cand_d[o])))
        return out

    def position_of(self, ref: NodeRef) -> np.ndarray:
        self._build()
        mask = (
            (self._info[:, 0] == ref.tp)
            & (self._info[:, 1] == ref.surface)
            & (self._info[:, 2] == ref.column)
            & (self._info[:, 3] == ref.node)
        )
        hit = np.flatnonzero(mask)
        if not len(hit):
            raise KeyError(ref)
        return self._points[hit[0]]
