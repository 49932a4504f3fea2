"""Translate columns, costs and constraints into an s-t min-cut network.

Encoding: one graph node per (surface, time-point, column, level).  A cut
selects a prefix {0..j} of every column (monotone by construction); the
surface passes through the highest selected level.  Node weights are the
usual level-difference transform of the costs, with a large forcing bias on
level 0 so every column selects at least one node.  Every hard constraint
(smoothness, inter-surface, inter-object, inter-time) is a bound on a
difference of selected levels and is realized by infinite-capacity
implication arcs.

Objects in contact face each other, so their column indices run in opposite
physical directions; such objects are encoded with reversed level order,
which turns the gap bound "min <= G - (j_a + j_b) <= max" into a plain
difference bound.  The contact graph must therefore be 2-colorable.

All capacities are fixed-point integers (1e-6 cost resolution) so flow
arithmetic, warm-start equivalence and enumeration comparisons are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import ColumnSet

Q = 1_000_000  # fixed-point quantization of costs
INF_CAP = 1 << 60  # uncuttable arc sentinel; checked against cap sums at build


class GraphBuildError(ValueError):
    """Raised for inconsistent constraint bounds or malformed inputs."""


class InternalSolverError(RuntimeError):
    """Raised when a cut violates structural guarantees (solver/build bug)."""


def quantize_costs(costs: np.ndarray) -> np.ndarray:
    c = np.asarray(costs, dtype=np.float64)
    if not np.all(np.isfinite(c)) or c.min() < 0.0 or c.max() > 1.0:
        raise GraphBuildError("costs must be finite and in [0, 1]")
    return np.rint(c * Q).astype(np.int64)


@dataclass(frozen=True)
class GraphSpec:
    """Constraint bounds in node units (defaults per the standard knee setup)."""

    smoothness: int = 2
    inter_surface: tuple[int, int] = (0, 20)
    inter_object: tuple[int, int] = (0, 60)
    inter_time: int = 5

    def __post_init__(self):
        if self.smoothness < 0 or self.inter_time < 0:
            raise GraphBuildError("bounds must be >= 0")
        for lo, hi in (self.inter_surface, self.inter_object):
            if lo < 0 or hi < lo:
                raise GraphBuildError("separation bounds need 0 <= min <= max")


@dataclass
class SurfaceBlock:
    """One (surface, time-point) slab of graph nodes."""

    surface: int
    obj: int
    tp: int
    n_cols: int
    k: int
    cost_q: np.ndarray  # int64 [n_cols, K], raw (unreversed) level order
    reversed: bool
    offset: int

    def node_ids(self, cols, j_enc) -> np.ndarray:
        return self.offset + np.asarray(cols, dtype=np.int64) * self.k + np.asarray(
            j_enc, dtype=np.int64
        )

    def encode_cost_rows(self, cols, raw_rows: np.ndarray) -> np.ndarray:
        rows = quantize_costs(raw_rows)
        return rows[:, ::-1] if self.reversed else rows


@dataclass(frozen=True)
class ObjectCorrespondence:
    """Facing-column pairs between two objects.

    gap_nodes is the node-unit distance between the two column bases plus
    both base indices: the physical separation of surface picks (j_a, j_b)
    along the facing axis is gap_nodes - j_a - j_b.
    """

    cols_a: np.ndarray  # int32 [P]
    cols_b: np.ndarray  # int32 [P]
    gap_nodes: np.ndarray  # int64 [P]

    def __len__(self) -> int:
        return len(self.cols_a)


def pair_objects(
    cols_a: ColumnSet,
    cols_b: ColumnSet,
    contact_mm: float,
    max_angle_deg: float = 60.0,
) -> ObjectCorrespondence:
    """Mutual-nearest, opposed-direction column pairing between two objects."""
    if abs(cols_a.node_spacing - cols_b.node_spacing) > 1e-12:
        raise GraphBuildError("objects in contact must share node spacing")
    ba, bb = cols_a.base_points(), cols_b.base_points()
    da, db = cols_a.outward_directions(), cols_b.outward_directions()
    ta, tb = cKDTree(ba), cKDTree(bb)
    d_ab, nn_ab = tb.query(ba)  # nearest b for each a
    _, nn_ba = ta.query(bb)  # nearest a for each b
    cos_min = np.cos(np.deg2rad(max_angle_deg))
    pairs_a, pairs_b, gaps = [], [], []
    spacing = cols_a.node_spacing
    for a in range(len(ba)):
        b = int(nn_ab[a])
        if int(nn_ba[b]) != a:
            continue
        if d_ab[a] > contact_mm:
            continue
        if float(np.dot(da[a], -db[b])) < cos_min:
            continue
        g = int(round(d_ab[a] / spacing)) + cols_a.base_index + cols_b.base_index
        pairs_a.append(a)
        pairs_b.append(b)
        gaps.append(g)
    return ObjectCorrespondence(
        cols_a=np.asarray(pairs_a, dtype=np.int32),
        cols_b=np.asarray(pairs_b, dtype=np.int32),
        gap_nodes=np.asarray(gaps, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# Constraint records (raw semantics, used by validate_solution and oracles)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothRec:
    surface: int
    tp: int
    pairs: np.ndarray  # [E, 2] column ids
    delta: int


@dataclass(frozen=True)
class InterSurfaceRec:
    lower: int
    upper: int
    tp: int
    lo: int
    hi: int
    n_cols: int


@dataclass(frozen=True)
class InterObjectRec:
    surf_a: int
    surf_b: int
    tp: int
    cols_a: np.ndarray
    cols_b: np.ndarray
    gap_nodes: np.ndarray
    lo: int
    hi: int


@dataclass(frozen=True)
class InterTimeRec:
    surface: int
    tp_a: int
    tp_b: int
    max_change: int
    n_cols: int


@dataclass
class ConstraintSet:
    smooth: list = field(default_factory=list)
    inter_surface: list = field(default_factory=list)
    inter_object: list = field(default_factory=list)
    inter_time: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Flow network
# ---------------------------------------------------------------------------

ARC_INTRA, ARC_SMOOTH, ARC_INTER_SURFACE, ARC_INTER_OBJECT, ARC_INTER_TIME = range(1, 6)


@dataclass
class FlowNetwork:
    node_count: int
    cap_s: np.ndarray  # int64 [n] current true source capacities
    cap_t: np.ndarray  # int64 [n]
    ban_sink: np.ndarray  # bool [n]: structurally unselectable nodes
    csr_first: np.ndarray  # int64 [n+1]
    arc_head: np.ndarray  # int32 [2m]
    arc_rev: np.ndarray  # int32 [2m]
    arc_fwd: np.ndarray  # uint8 [2m]: 1 on constraint arcs (capacity INF_CAP)
    force: int
    blocks: list
    constraints: ConstraintSet
    spec: GraphSpec

    _by_key: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_key = {(b.surface, b.tp): b for b in self.blocks}

    def block(self, surface: int, tp: int = 0) -> SurfaceBlock:
        return self._by_key[(surface, tp)]

    @property
    def surfaces(self) -> list[int]:
        return sorted({b.surface for b in self.blocks})

    @property
    def n_timepoints(self) -> int:
        return 1 + max(b.tp for b in self.blocks)

    def initial_residuals(self) -> np.ndarray:
        return np.where(self.arc_fwd.astype(bool), np.int64(INF_CAP), np.int64(0))

    def terminal_caps(self, block: SurfaceBlock, cols, cost_rows_enc: np.ndarray):
        """(node ids, cap_s, cap_t) for whole columns with encoded quantized costs."""
        cols = np.asarray(cols, dtype=np.int64)
        p = np.empty_like(cost_rows_enc)
        p[:, 0] = cost_rows_enc[:, 0] - self.force
        p[:, 1:] = np.diff(cost_rows_enc, axis=1)
        cs = np.where(p < 0, -p, 0).astype(np.int64)
        ct = np.where(p >= 0, p, 0).astype(np.int64)
        k = block.k
        ids = (block.offset + cols[:, None] * k + np.arange(k)[None, :]).ravel()
        cs = cs.ravel()
        ct = ct.ravel().copy()
        banned = self.ban_sink[ids]
        ct[banned] = INF_CAP
        return ids, cs, ct


class NetworkBuilder:
    """Assemble a FlowNetwork from surfaces, costs and constraint links."""

    def __init__(self, spec: GraphSpec, n_timepoints: int = 1):
        if n_timepoints < 1:
            raise GraphBuildError("need at least one time-point")
        self.spec = spec
        self.n_tp = n_timepoints
        self._surfaces: list[dict] = []
        self._surface_links: list[tuple[int, int, int, int]] = []
        self._object_links: list[tuple[int, int, ObjectCorrespondence, int, int]] = []

    def add_surface(self, surface_id: int, object_id: int, cols: ColumnSet, costs) -> None:
        """costs: [n_cols, K] for a single time-point or a list of T such arrays."""
        if any(s["surface"] == surface_id for s in self._surfaces):
            raise GraphBuildError(f"duplicate surface id {surface_id}")
        arr = costs if isinstance(costs, (list, tuple)) else [costs]
        if len(arr) != self.n_tp:
            raise GraphBuildError(
                f"surface {surface_id}: expected costs for {self.n_tp} time-points, got {len(arr)}"
            )
        qs = []
        for t, c in enumerate(arr):
            c = np.asarray(c, dtype=np.float64)
            if c.shape != (cols.n_cols, cols.k):
                raise GraphBuildError(
                    f"surface {surface_id} tp {t}: cost shape {c.shape} != "
                    f"({cols.n_cols}, {cols.k})"
                )
            qs.append(quantize_costs(c))
        self._surfaces.append(
            {"surface": surface_id, "obj": object_id, "cols": cols, "cost_q": qs}
        )

    def link_surfaces(self, lower_id: int, upper_id: int, bounds: tuple[int, int] | None = None):
        lo, hi = bounds if bounds is not None else self.spec.inter_surface
        if lo < 0 or hi < lo:
            raise GraphBuildError("inter-surface bounds need 0 <= min <= max")
        slow = self._get(lower_id)
        sup = self._get(upper_id)
        if slow["obj"] != sup["obj"]:
            raise GraphBuildError("inter-surface links couple surfaces of one object")
        if slow["cols"] is not sup["cols"]:
            raise GraphBuildError("linked surfaces must share their column set")
        self._surface_links.append((lower_id, upper_id, lo, hi))

    def link_objects(
        self,
        surf_a: int,
        surf_b: int,
        corr: ObjectCorrespondence,
        bounds: tuple[int, int] | None = None,
    ):
        lo, hi = bounds if bounds is not None else self.spec.inter_object
        if lo < 0 or hi < lo:
            raise GraphBuildError("inter-object bounds need 0 <= min <= max")
        sa, sb = self._get(surf_a), self._get(surf_b)
        if sa["obj"] == sb["obj"]:
            raise GraphBuildError("inter-object links couple distinct objects")
        if len(corr) == 0:
            return
        self._object_links.append((surf_a, surf_b, corr, lo, hi))

    def _get(self, surface_id: int) -> dict:
        for s in self._surfaces:
            if s["surface"] == surface_id:
                return s
        raise GraphBuildError(f"unknown surface id {surface_id}")

    # -- orientation assignment ------------------------------------------

    def _orientations(self) -> dict[int, bool]:
        objs = sorted({s["obj"] for s in self._surfaces})
        contact: dict[int, set[int]] = {o: set() for o in objs}
        for surf_a, surf_b, _corr, _lo, _hi in self._object_links:
            oa, ob = self._get(surf_a)["obj"], self._get(surf_b)["obj"]
            contact[oa].add(ob)
            contact[ob].add(oa)
        color: dict[int, bool] = {}
        for root in objs:
            if root in color:
                continue
            color[root] = False
            queue = [root]
            while queue:
                o = queue.pop(0)
                for nb in sorted(contact[o]):
                    if nb not in color:
                        color[nb] = not color[o]
                        queue.append(nb)
                    elif color[nb] == color[o]:
                        raise GraphBuildError(
                            "inter-object contact graph is not 2-colorable; "
                            "facing-column encoding needs alternating orientations"
                        )
        return color

    # -- arc emission ------------------------------------------------------

    def build(self) -> FlowNetwork:
        if not self._surfaces:
            raise GraphBuildError("no surfaces added")
        color = self._orientations()

        blocks: list[SurfaceBlock] = []
        offset = 0
        for s in self._surfaces:
            for t in range(self.n_tp):
                blocks.append(
                    SurfaceBlock(
                        surface=s["surface"],
                        obj=s["obj"],
                        tp=t,
                        n_cols=s["cols"].n_cols,
                        k=s["cols"].k,
                        cost_q=s["cost_q"][t],
                        reversed=color[s["obj"]],
                        offset=offset,
                    )
                )
                offset += s["cols"].n_cols * s["cols"].k
        n = offset
        by_key = {(b.surface, b.tp): b for b in blocks}

        u_parts: list[np.ndarray] = []
        v_parts: list[np.ndarray] = []
        ban = np.zeros(n, dtype=bool)

        def emit_diff(bx: SurfaceBlock, by: SurfaceBlock, cx, cy, lo, hi, what: str):
            """Arcs enforcing lo <= j_enc(bx, cx) - j_enc(by, cy) <= hi per pair."""
            if bx.k != by.k:
                raise GraphBuildError(f"{what}: linked blocks must share K")
            k = bx.k
            cx = np.asarray(cx, dtype=np.int64)
            cy = np.asarray(cy, dtype=np.int64)
            lo = np.broadcast_to(np.asarray(lo, dtype=np.int64), cx.shape)
            hi = np.broadcast_to(np.asarray(hi, dtype=np.int64), cx.shape)
            if np.any(lo > hi) or np.any(lo > k - 1) or np.any(hi < -(k - 1)):
                raise GraphBuildError(
                    f"{what}: bounds admit no feasible pair for K={k} "
                    f"(lo {int(lo.max())}, hi {int(hi.min())})"
                )
            jj = np.arange(k, dtype=np.int64)[None, :]
            # x(j) selected implies y(j - hi) selected
            t1 = jj - hi[:, None]
            sel = (t1 >= 1) & (t1 <= k - 1)
            u_parts.append((bx.offset + cx[:, None] * k + jj)[sel])
            v_parts.append((by.offset + cy[:, None] * k + t1)[sel])
            over = t1 > k - 1
            if np.any(over):
                ban[(bx.offset + cx[:, None] * k + jj)[over]] = True
            # y(j) selected implies x(j + lo) selected
            t2 = jj + lo[:, None]
            sel = (t2 >= 1) & (t2 <= k - 1)
            u_parts.append((by.offset + cy[:, None] * k + jj)[sel])
            v_parts.append((bx.offset + cx[:, None] * k + t2)[sel])
            over = t2 > k - 1
            if np.any(over):
                ban[(by.offset + cy[:, None] * k + jj)[over]] = True

        cons = ConstraintSet()
        delta = self.spec.smoothness

        for s in self._surfaces:
            cols: ColumnSet = s["cols"]
            k = cols.k
            for t in range(self.n_tp):
                b = by_key[(s["surface"], t)]
                # intra-column ordering arcs: (c, j) -> (c, j-1)
                cgrid = np.arange(cols.n_cols, dtype=np.int64)[:, None]
                jgrid = np.arange(1, k, dtype=np.int64)[None, :]
                u_parts.append((b.offset + cgrid * k + jgrid).ravel())
                v_parts.append((b.offset + cgrid * k + jgrid - 1).ravel())
                # smoothness on mesh adjacency
                if len(cols.adjacency):
                    emit_diff(
                        b, b, cols.adjacency[:, 0], cols.adjacency[:, 1],
                        -delta, delta, "smoothness",
                    )
                    cons.smooth.append(
                        SmoothRec(surface=s["surface"], tp=t, pairs=cols.adjacency, delta=delta)
                    )

        for lower_id, upper_id, lo, hi in self._surface_links:
            slow, sup = self._get(lower_id), self._get(upper_id)
            ncols = slow["cols"].n_cols
            cols_all = np.arange(ncols, dtype=np.int64)
            rev = color[slow["obj"]]
            for t in range(self.n_tp):
                bl, bu = by_key[(lower_id, t)], by_key[(upper_id, t)]
                if rev:
                    # reversed levels: j_up - j_lo in [lo, hi] <=> enc_lo - enc_up in [lo, hi]
                    emit_diff(bl, bu, cols_all, cols_all, lo, hi, "inter-surface")
                else:
                    emit_diff(bu, bl, cols_all, cols_all, lo, hi, "inter-surface")
                cons.inter_surface.append(
                    InterSurfaceRec(lower=lower_id, upper=upper_id, tp=t, lo=lo, hi=hi, n_cols=ncols)
                )

        for surf_a, surf_b, corr, lo, hi in self._object_links:
            sa, sb = self._get(surf_a), self._get(surf_b)
            k = sa["cols"].k
            rev_a, rev_b = color[sa["obj"]], color[sb["obj"]]
            # exactly one side is reversed (2-coloring)
            for t in range(self.n_tp):
                ba, bb = by_key[(surf_a, t)], by_key[(surf_b, t)]
                # gap g - j_a - j_b in [lo, hi]  <=>  g - hi <= j_a + j_b <= g - lo
                if rev_b and not rev_a:
                    # j_a - enc_b in [g - hi - (K-1), g - lo - (K-1)]
                    emit_diff(
                        ba, bb, corr.cols_a, corr.cols_b,
                        corr.gap_nodes - hi - (k - 1),
                        corr.gap_nodes - lo - (k - 1),
                        "inter-object",
                    )
                elif rev_a and not rev_b:
                    emit_diff(
                        bb, ba, corr.cols_b, corr.cols_a,
                        corr.gap_nodes - hi - (k - 1),
                        corr.gap_nodes - lo - (k - 1),
                        "inter-object",
                    )
                else:  # unreachable given 2-coloring
                    raise GraphBuildError("inter-object link without opposed orientations")
                cons.inter_object.append(
                    InterObjectRec(
                        surf_a=surf_a, surf_b=surf_b, tp=t,
                        cols_a=corr.cols_a, cols_b=corr.cols_b,
                        gap_nodes=corr.gap_nodes, lo=lo, hi=hi,
                    )
                )

        if self.n_tp > 1:
            m = self.spec.inter_time
            for s in self._surfaces:
                ncols = s["cols"].n_cols
                cols_all = np.arange(ncols, dtype=np.int64)
                for t in range(self.n_tp - 1):
                    b0, b1 = by_key[(s["surface"], t)], by_key[(s["surface"], t + 1)]
                    emit_diff(b0, b1, cols_all, cols_all, -m, m, "inter-time")
                    cons.inter_time.append(
                        InterTimeRec(
                            surface=s["surface"], tp_a=t, tp_b=t + 1,
                            max_change=m, n_cols=ncols,
                        )
                    )

        u = np.concatenate(u_parts) if u_parts else np.zeros(0, dtype=np.int64)
        v = np.concatenate(v_parts) if v_parts else np.zeros(0, dtype=np.int64)
        m_arcs = len(u)
        tails = np.concatenate([u, v])
        heads = np.concatenate([v, u])
        fwd = np.zeros(2 * m_arcs, dtype=np.uint8)
        fwd[:m_arcs] = 1
        perm = np.argsort(tails, kind="stable")
        inv = np.empty_like(perm)
        inv[perm] = np.arange(2 * m_arcs)
        pair = np.concatenate(
            [np.arange(m_arcs) + m_arcs, np.arange(m_arcs)]
        )
        arc_head = heads[perm].astype(np.int32)
        arc_fwd = fwd[perm]
        arc_rev = inv[pair][perm].astype(np.int32)
        csr_first = np.zeros(n + 1, dtype=np.int64)
        np.add.at(csr_first, tails + 1, 1)
        csr_first = np.cumsum(csr_first)

        force = n * Q + 1
        net = FlowNetwork(
            node_count=n,
            cap_s=np.zeros(n, dtype=np.int64),
            cap_t=np.zeros(n, dtype=np.int64),
            ban_sink=ban,
            csr_first=csr_first,
            arc_head=arc_head,
            arc_rev=arc_rev,
            arc_fwd=arc_fwd,
            force=force,
            blocks=blocks,
            constraints=cons,
            spec=self.spec,
        )
        for b in blocks:
            enc = b.cost_q[:, ::-1] if b.reversed else b.cost_q
            ids, cs, ct = net.terminal_caps(b, np.arange(b.n_cols), enc)
            net.cap_s[ids] = cs
            net.cap_t[ids] = ct
        total = int(net.cap_s.sum() + net.cap_t[~ban].sum())
        # headroom for reparameterization growth over long edit sessions
        if total >= INF_CAP // 8:
            raise GraphBuildError("network too large for fixed-point capacity budget")
        return net


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------

@dataclass
class SurfaceSolution:
    """Selected level per (surface, tp, column) plus quantized totals."""

    levels: dict  # (surface, tp) -> int32 [n_cols]
    cost_q: dict  # (surface, tp) -> int

    def total_cost(self, surface: int, tp: int = 0) -> float:
        return self.cost_q[(surface, tp)] / Q

    def copy(self) -> "SurfaceSolution":
        return SurfaceSolution(
            levels={k: v.copy() for k, v in self.levels.items()},
            cost_q=dict(self.cost_q),
        )

    def equals(self, other: "SurfaceSolution") -> bool:
        if set(self.levels) != set(other.levels):
            return False
        return all(np.array_equal(self.levels[k], other.levels[k]) for k in self.levels)

    def changed_keys(self, other: "SurfaceSolution") -> list:
        return sorted(
            k for k in self.levels if not np.array_equal(self.levels[k], other.levels[k])
        )


def extract_surfaces(net: FlowNetwork, source_mask: np.ndarray) -> SurfaceSolution:
    """Read the selected surface out of a minimum-cut source side."""
    levels = {}
    totals = {}
    for b in net.blocks:
        slab = source_mask[b.offset : b.offset + b.n_cols * b.k].reshape(b.n_cols, b.k)
        counts = slab.sum(axis=1)
        if np.any(counts == 0):
            raise InternalSolverError("column with empty selection (base not source-side)")
        expect = np.arange(b.k)[None, :] < counts[:, None]
        if not np.array_equal(slab, expect):
            raise InternalSolverError("non-monotone cut inside a column")
        j_enc = (counts - 1).astype(np.int32)
        j = (b.k - 1 - j_enc).astype(np.int32) if b.reversed else j_enc
        levels[(b.surface, b.tp)] = j
        totals[(b.surface, b.tp)] = int(b.cost_q[np.arange(b.n_cols), j].sum())
    return SurfaceSolution(levels=levels, cost_q=totals)


def cut_crosses_infinite(net: FlowNetwork, source_mask: np.ndarray) -> bool:
    """True if any infinite (constraint) arc leaves the source side."""
    n = net.node_count
    tails = np.repeat(np.arange(n), np.diff(net.csr_first))
    fwd = net.arc_fwd.astype(bool)
    return bool(
        np.any(source_mask[tails[fwd]] & ~source_mask[net.arc_head[fwd]])
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    family: str
    detail: tuple
    gap: int
    bound: tuple


def validate_solution(sol: SurfaceSolution, net: FlowNetwork, limit: int = 1000) -> list[Violation]:
    """Exhaustive check of all four constraint families; empty iff feasible."""
    out: list[Violation] = []
    cons = net.constraints

    for r in cons.smooth:
        j = sol.levels[(r.surface, r.tp)].astype(np.int64)
        d = np.abs(j[r.pairs[:, 0]] - j[r.pairs[:, 1]])
        for e in np.flatnonzero(d > r.delta)[:limit]:
            out.append(
                Violation(
                    "smoothness",
                    (r.surface, r.tp, int(r.pairs[e, 0]), int(r.pairs[e, 1])),
                    int(d[e]),
                    (0, r.delta),
                )
            )

    for r in cons.inter_surface:
        jl = sol.levels[(r.lower, r.tp)].astype(np.int64)
        ju = sol.levels[(r.upper, r.tp)].astype(np.int64)
        d = ju - jl
        bad = (d < r.lo) | (d > r.hi)
        for e in np.flatnonzero(bad)[:limit]:
            out.append(
                Violation(
                    "inter-surface", (r.lower, r.upper, r.tp, int(e)), int(d[e]), (r.lo, r.hi)
                )
            )

    for r in cons.inter_object:
        ja = sol.levels[(r.surf_a, r.tp)].astype(np.int64)[r.cols_a]
        jb = sol.levels[(r.surf_b, r.tp)].astype(np.int64)[r.cols_b]
        gap = r.gap_nodes - ja - jb
        bad = (gap < r.lo) | (gap > r.hi)
        for e in np.flatnonzero(bad)[:limit]:
            out.append(
                Violation(
                    "inter-object",
                    (r.surf_a, r.surf_b, r.tp, int(r.cols_a[e]), int(r.cols_b[e])),
                    int(gap[e]),
                    (r.lo, r.hi),
                )
            )

    for r in cons.inter_time:
        j0 = sol.levels[(r.surface, r.tp_a)].astype(np.int64)
        j1 = sol.levels[(r.surface, r.tp_b)].astype(np.int64)
        d = np.abs(j1 - j0)
        for e in np.flatnonzero(d > r.max_change)[:limit]:
            out.append(
                Violation(
                    "inter-time", (r.surface, r.tp_a, r.tp_b, int(e)), int(d[e]),
                    (0, r.max_change),
                )
            )
    return out
