"""Independent oracles used across the test suite.

Everything here deliberately avoids the production solver/transform code
paths: the reference max-flow is a plain BFS augmenting-path implementation
over adjacency lists, the configuration oracle enumerates every surface
assignment and re-checks constraints with straight loops, and raw networks
are assembled locally.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from jeiseg.geometry import ColumnSet
from jeiseg.graphnet import (
    INF_CAP,
    GraphSpec,
    NetworkBuilder,
    ObjectCorrespondence,
)


# ---------------------------------------------------------------------------
# Reference max-flow (Edmonds-Karp) over the solver's network interface
# ---------------------------------------------------------------------------

def reference_max_flow(net, cap_s=None, cap_t=None):
    """(flow value, source-reachable mask) via BFS augmenting paths.

    Works on any object exposing node_count, csr_first, arc_head and
    initial_residuals(); terminal capacities may be overridden.
    """
    n = net.node_count
    cs = (net.cap_s if cap_s is None else cap_s).astype(object)
    ct = (net.cap_t if cap_t is None else cap_t).astype(object)
    res0 = net.initial_residuals()
    S, T = n, n + 1

    to: list[int] = []
    cap: list[int] = []
    adj: list[list[int]] = [[] for _ in range(n + 2)]

    def add_edge(u, v, c):
        adj[u].append(len(to))
        to.append(v)
        cap.append(int(c))
        adj[v].append(len(to))
        to.append(u)
        cap.append(0)

    first = net.csr_first
    head = net.arc_head
    rev = net.arc_rev
    for u in range(n):
        for a in range(int(first[u]), int(first[u + 1])):
            if a < int(rev[a]):  # add each slot pair once, forward payload split
                add_edge(u, int(head[a]), int(res0[a]))
                # the paired slot may also carry capacity (generic residuals)
                if int(res0[int(rev[a])]) != 0:
                    add_edge(int(head[a]), u, int(res0[int(rev[a])]))
    for i in range(n):
        if cs[i]:
            add_edge(S, i, int(cs[i]))
        if ct[i]:
            add_edge(i, T, int(ct[i]))

    flow = 0
    while True:
        prev_edge = [-1] * (n + 2)
        prev_edge[S] = -2
        q = deque([S])
        while q and prev_edge[T] == -1:
            u = q.popleft()
            for e in adj[u]:
                v = to[e]
                if prev_edge[v] == -1 and cap[e] > 0:
                    prev_edge[v] = e
                    q.append(v)
        if prev_edge[T] == -1:
            break
        b = None
        v = T
        while v != S:
            e = prev_edge[v]
            b = cap[e] if b is None else min(b, cap[e])
            v = to[e ^ 1]
        v = T
        while v != S:
            e = prev_edge[v]
            cap[e] -= b
            cap[e ^ 1] += b
            v = to[e ^ 1]
        flow += b

    reach = np.zeros(n + 2, dtype=bool)
    reach[S] = True
    q = deque([S])
    while q:
        u = q.popleft()
        for e in adj[u]:
            v = to[e]
            if not reach[v] and cap[e] > 0:
                reach[v] = True
                q.append(v)
    return flow, reach[:n]


# ---------------------------------------------------------------------------
# Raw networks (arbitrary arc capacities) for solver-only tests
# ---------------------------------------------------------------------------

@dataclass
class RawNet:
    node_count: int
    cap_s: np.ndarray
    cap_t: np.ndarray
    csr_first: np.ndarray
    arc_head: np.ndarray
    arc_rev: np.ndarray
    arc_fwd: np.ndarray
    _res0: np.ndarray = field(repr=False, default=None)

    def initial_residuals(self):
        return self._res0.copy()


def make_raw_net(n, arcs, cap_s, cap_t) -> RawNet:
    """arcs: iterable of (u, v, capacity); reverse slots carry capacity 0."""
    arcs = list(arcs)
    m = len(arcs)
    u = np.array([a[0] for a in arcs], dtype=np.int64).reshape(m)
    v = np.array([a[1] for a in arcs], dtype=np.int64).reshape(m)
    c = np.array([a[2] for a in arcs], dtype=np.int64).reshape(m)
    tails = np.concatenate([u, v])
    heads = np.concatenate([v, u])
    caps = np.concatenate([c, np.zeros(m, dtype=np.int64)])
    fwd = np.concatenate([np.ones(m, np.uint8), np.zeros(m, np.uint8)])
    perm = np.argsort(tails, kind="stable")
    inv = np.empty_like(perm)
    inv[perm] = np.arange(2 * m)
    pair = np.concatenate([np.arange(m) + m, np.arange(m)])
    csr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(csr, tails + 1, 1)
    return RawNet(
        node_count=n,
        cap_s=np.asarray(cap_s, dtype=np.int64),
        cap_t=np.asarray(cap_t, dtype=np.int64),
        csr_first=np.cumsum(csr),
        arc_head=heads[perm].astype(np.int32),
        arc_rev=inv[pair][perm].astype(np.int32),
        arc_fwd=fwd[perm],
        _res0=caps[perm],
    )


# ---------------------------------------------------------------------------
# Exhaustive configuration enumeration
# ---------------------------------------------------------------------------

def straight_columns(n_cols: int, k: int, spacing: float = 1.0, x0: float = 0.0) -> ColumnSet:
    """Parallel vertical columns for synthetic instances."""
    pos = np.zeros((n_cols, k, 3))
    for c in range(n_cols):
        pos[c, :, 0] = x0 + 10.0 * c
        pos[c, :, 2] = np.arange(k) * spacing
    adj = np.array([[i, i + 1] for i in range(n_cols - 1)], dtype=np.int32).reshape(-1, 2)
    return ColumnSet(
        positions=pos, node_spacing=spacing, base_index=max(1, k // 2), adjacency=adj
    )


def enumerate_min(net, max_configs: int = 2_000_000):
    """(min quantized cost, one argmin config) over all feasible assignments.

    Constraints are re-checked with plain loops from the network's raw
    constraint records, independent of the arc encoding.
    """
    blocks = net.blocks
    var_of = {}
    sizes = []
    for bi, b in enumerate(blocks):
        for c in range(b.n_cols):
            var_of[(b.surface, b.tp, c)] = len(sizes)
            sizes.append(b.k)
    nvars = len(sizes)
    total = 1
    for s in sizes:
        total *= s
        if total > max_configs:
            raise ValueError(f"instance too large to enumerate ({total} configs)")

    grids = np.array(
        list(itertools.product(*[range(s) for s in sizes])), dtype=np.int64
    )  # [total, nvars]

    cost = np.zeros(len(grids), dtype=np.int64)
    for b in blocks:
        for c in range(b.n_cols):
            var = var_of[(b.surface, b.tp, c)]
            cost += b.cost_q[c, grids[:, var]]

    ok = np.ones(len(grids), dtype=bool)
    cons = net.constraints
    for r in cons.smooth:
        for a, bcol in r.pairs:
            va = var_of[(r.surface, r.tp, int(a))]
            vb = var_of[(r.surface, r.tp, int(bcol))]
            ok &= np.abs(grids[:, va] - grids[:, vb]) <= r.delta
    for r in cons.inter_surface:
        for c in range(r.n_cols):
            vl = var_of[(r.lower, r.tp, c)]
            vu = var_of[(r.upper, r.tp, c)]
            d = grids[:, vu] - grids[:, vl]
            ok &= (d >= r.lo) & (d <= r.hi)
    for r in cons.inter_object:
        for p in range(len(r.cols_a)):
            va = var_of[(r.surf_a, r.tp, int(r.cols_a[p]))]
            vb = var_of[(r.surf_b, r.tp, int(r.cols_b[p]))]
            gap = r.gap_nodes[p] - grids[:, va] - grids[:, vb]
            ok &= (gap >= r.lo) & (gap <= r.hi)
    for r in cons.inter_time:
        for c in range(r.n_cols):
            v0 = var_of[(r.surface, r.tp_a, c)]
            v1 = var_of[(r.surface, r.tp_b, c)]
            ok &= np.abs(grids[:, v0] - grids[:, v1]) <= r.max_change

    if not ok.any():
        return None, None
    feas_cost = np.where(ok, cost, np.int64(1) << 62)
    best = int(feas_cost.min())
    arg = int(np.argmin(feas_cost))  # first == lexicographically smallest config
    best_cfg = {}
    for b in blocks:
        arr = np.empty(b.n_cols, dtype=np.int32)
        for c in range(b.n_cols):
            arr[c] = grids[arg, var_of[(b.surface, b.tp, c)]]
        best_cfg[(b.surface, b.tp)] = arr
    return best, best_cfg


# ---------------------------------------------------------------------------
# Random constrained instances
# ---------------------------------------------------------------------------

def random_instance(rng: np.random.Generator, with_time: bool = False):
    """A small random multi-surface instance plus its built network.

    Returns (net, meta) with guaranteed per-pair-feasible bounds; caller
    should skip instances whose enumeration turns out globally infeasible.
    """
    while True:
        k = int(rng.integers(2, 7))
        n_cols = int(rng.integers(1, 5))
        mode = rng.choice(["single", "two_surfaces", "two_objects"])
        tps = int(rng.integers(2, 4)) if with_time else 1
        n_blocks = (1 if mode == "single" else 2) * tps
        if k ** (n_cols * n_blocks) <= 120_000:
            break

    smooth = int(rng.integers(0, 3))
    spec_kwargs = dict(smoothness=smooth, inter_time=int(rng.integers(0, k)))

    cols = straight_columns(n_cols, k)

    def rand_costs():
        if tps == 1:
            return rng.random((n_cols, k))
        return [rng.random((n_cols, k)) for _ in range(tps)]

    if mode == "single":
        spec = GraphSpec(**spec_kwargs)
        b = NetworkBuilder(spec, n_timepoints=tps)
        b.add_surface(0, 0, cols, rand_costs())
        return b.build()

    if mode == "two_surfaces":
        lo = int(rng.integers(0, k))
        hi = int(rng.integers(lo, k))
        spec = GraphSpec(inter_surface=(lo, hi), **spec_kwargs)
        b = NetworkBuilder(spec, n_timepoints=tps)
        b.add_surface(0, 0, cols, rand_costs())
        b.add_surface(1, 0, cols, rand_costs())
        b.link_surfaces(0, 1)
        return b.build()

    # two objects with facing-column correspondence
    cols_b = straight_columns(n_cols, k, x0=500.0)
    n_pairs = int(rng.integers(1, n_cols + 1))
    pa = rng.permutation(n_cols)[:n_pairs].astype(np.int32)
    pb = rng.permutation(n_cols)[:n_pairs].astype(np.int32)
    lo = int(rng.integers(0, k))
    hi = int(rng.integers(lo, 2 * k))
    # per-pair arithmetic feasibility: 0 <= gap - lo and gap - hi <= 2(k-1)
    gaps = np.array(
        [int(rng.integers(lo, hi + 2 * (k - 1) + 1)) for _ in range(n_pairs)],
        dtype=np.int64,
    )
    corr = ObjectCorrespondence(cols_a=pa, cols_b=pb, gap_nodes=gaps)
    spec = GraphSpec(inter_object=(lo, hi), **spec_kwargs)
    b = NetworkBuilder(spec, n_timepoints=tps)
    b.add_surface(0, 0, cols, rand_costs())
    b.add_surface(1, 1, cols_b, rand_costs())
    b.link_objects(0, 1, corr)
    return b.build()


def linear_scan_nearest(points: np.ndarray, info: np.ndarray, q, n: int):
    """Brute-force n-nearest with (tp, surface, column, node) tie order."""
    d = np.linalg.norm(points - np.asarray(q, dtype=np.float64), axis=1)
    order = np.lexsort((info[:, 3], info[:, 2], info[:, 1], info[:, 0], d))
    return [(tuple(int(x) for x in info[i]), float(d[i])) for i in order[:n]]
