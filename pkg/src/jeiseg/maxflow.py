"""s-t max-flow with persistent residual state and warm re-optimization.

The solver grows dual source/sink search trees over the residual graph
(augmenting-path family with tree reuse).  The full residual state - arc
residuals, terminal residuals, trees and parent pointers - survives between
solves, so a local terminal-capacity edit only re-does work near the edit.

Terminal capacity decreases below the committed flow are reparameterized by
adding an equal constant to both terminal arcs of the node; every s-t cut
contains exactly one terminal arc per node, so all cuts shift by the same
tracked offset and the argmin cut is untouched.

Determinism: arcs are scanned in CSR order, active nodes and orphans are
processed FIFO, and all capacities are integers, so identical inputs and
edit sequences produce identical cuts.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .graphnet import FlowNetwork

TREE_FREE, TREE_S, TREE_T = 0, 1, 2
P_NONE, P_TERMINAL, P_ORPHAN = -1, -2, -3
R_FLOW, R_TIME, R_AQH, R_AQT, R_OQH, R_OQT, R_OFFSET = range(7)
HUGE = np.int64(1) << np.int64(62)


@njit(cache=True, inline="always")
def _activate(u, aflag, aring, regs):
    if aflag[u] == 0:
        aflag[u] = 1
        aring[regs[R_AQT] % aring.shape[0]] = u
        regs[R_AQT] += 1


@njit(cache=True, inline="always")
def _orphan_add(u, parent, oring, regs):
    if parent[u] != P_ORPHAN:
        parent[u] = P_ORPHAN
        oring[regs[R_OQT] % oring.shape[0]] = u
        regs[R_OQT] += 1


@njit(cache=True)
def _augment(kind, s_end, t_end, carc, head, rev, res, rs, rt, parent, oring, regs):
    # kind 1: real arc s_end -> t_end; kind 2: S-node s_end with sink residual;
    # kind 3: T-node t_end with source residual.
    b = HUGE
    if kind == 1:
        b = res[carc]
    if kind == 1 or kind == 2:
        m = s_end
        while parent[m] != P_TERMINAL:
            pa = parent[m]
            c = res[rev[pa]]
            if c < b:
                b = c
            m = head[pa]
        if rs[m] < b:
            b = rs[m]
    if kind == 2:
        if rt[s_end] < b:
            b = rt[s_end]
    if kind == 1 or kind == 3:
        m = t_end
        while parent[m] != P_TERMINAL:
            pa = parent[m]
            if res[pa] < b:
                b = res[pa]
            m = head[pa]
        if rt[m] < b:
            b = rt[m]
    if kind == 3:
        if rs[t_end] < b:
            b = rs[t_end]

    if kind == 1:
        res[carc] -= b
        res[rev[carc]] += b
    if kind == 1 or kind == 2:
        m = s_end
        while parent[m] != P_TERMINAL:
            pa = parent[m]
            res[rev[pa]] -= b
            res[pa] += b
            nxt = head[pa]
            if res[rev[pa]] == 0:
                _orphan_add(m, parent, oring, regs)
            m = nxt
        rs[m] -= b
        if rs[m] == 0:
            _orphan_add(m, parent, oring, regs)
    if kind == 2:
        rt[s_end] -= b
    if kind == 1 or kind == 3:
        m = t_end
        while parent[m] != P_TERMINAL:
            pa = parent[m]
            res[pa] -= b
            res[rev[pa]] += b
            nxt = head[pa]
            if res[pa] == 0:
                _orphan_add(m, parent, oring, regs)
            m = nxt
        rt[m] -= b
        if rt[m] == 0:
            _orphan_add(m, parent, oring, regs)
    if kind == 3:
        rs[t_end] -= b
    regs[R_FLOW] += b


@njit(cache=True)
def _adopt_one(o, first, head, rev, res, rs, rt, tree, parent, ts, dist, aflag, aring, oring, regs):
    side = tree[o]
    time = regs[R_TIME]
    if side == TREE_S and rs[o] > 0:
        parent[o] = P_TERMINAL
        ts[o] = time
        dist[o] = 1
        return
    if side == TREE_T and rt[o] > 0:
        parent[o] = P_TERMINAL
        ts[o] = time
        dist[o] = 1
        return

    best_arc = np.int64(-1)
    best_d = HUGE
    for a in range(first[o], first[o + 1]):
        v = head[a]
        if tree[v] != side:
            continue
        if side == TREE_S:
            if res[rev[a]] <= 0:
                continue
        else:
            if res[a] <= 0:
                continue
        # origin check: walk v's parents to a terminal root
        d = np.int64(0)
        m = v
        ok = False
        while True:
            if ts[m] == time:
                d += dist[m]
                ok = True
                break
            pm = parent[m]
            if pm == P_TERMINAL:
                d += 1
                ok = True
                break
            if pm < 0:  # orphan or free
                ok = False
                break
            d += 1
            m = head[pm]
        if not ok:
            continue
        # cache distances along the verified path
        m = v
        dd = d
        while ts[m] != time:
            ts[m] = time
            dist[m] = dd
            dd -= 1
            pm = parent[m]
            if pm == P_TERMINAL:
                break
            m = head[pm]
        if d < best_d:
            best_d = d
            best_arc = a

    if best_arc >= 0:
        parent[o] = best_arc
        ts[o] = time
        dist[o] = best_d + 1
        return

    # no parent: o leaves the tree; children become orphans, potential
    # parents are reactivated
    for a in range(first[o], first[o + 1]):
        v = head[a]
        if tree[v] != side:
            continue
        if side == TREE_S:
            if res[rev[a]] > 0:
                _activate(v, aflag, aring, regs)
        else:
            if res[a] > 0:
                _activate(v, aflag, aring, regs)
        pv = parent[v]
        if pv >= 0 and head[pv] == o:
            _orphan_add(v, parent, oring, regs)
    # a node with terminal residual toward the opposite side re-roots there,
    # otherwise the residual would be unreachable for future growth
    if side == TREE_S and rt[o] > 0:
        tree[o] = TREE_T
        parent[o] = P_TERMINAL
        ts[o] = time
        dist[o] = 1
        _activate(o, aflag, aring, regs)
    elif side == TREE_T and rs[o] > 0:
        tree[o] = TREE_S
        parent[o] = P_TERMINAL
        ts[o] = time
        dist[o] = 1
        _activate(o, aflag, aring, regs)
    else:
        tree[o] = TREE_FREE
        parent[o] = P_NONE


@njit(cache=True)
def _process_orphans(first, head, rev, res, rs, rt, tree, parent, ts, dist, aflag, aring, oring, regs):
    while regs[R_OQH] < regs[R_OQT]:
        o = oring[regs[R_OQH] % oring.shape[0]]
        regs[R_OQH] += 1
        _adopt_one(o, first, head, rev, res, rs, rt, tree, parent, ts, dist, aflag, aring, oring, regs)


@njit(cache=True)
def _bk_main(first, head, rev, res, rs, rt, tree, parent, ts, dist, aflag, aring, oring, regs):
    ring = aring.shape[0]
    while regs[R_AQH] < regs[R_AQT]:
        u = aring[regs[R_AQH] % ring]
        regs[R_AQH] += 1
        aflag[u] = 0
        while True:
            side = tree[u]
            if side == TREE_FREE:
                break
            kind = 0
            carc = np.int64(-1)
            s_end = np.int64(-1)
            t_end = np.int64(-1)
            if side == TREE_S and rt[u] > 0:
                kind = 2
                s_end = u
            elif side == TREE_T and rs[u] > 0:
                kind = 3
                t_end = u
            else:
                for a in range(first[u], first[u + 1]):
                    v = head[a]
                    if side == TREE_S:
                        if res[a] <= 0:
                            continue
                        tv = tree[v]
                        if tv == TREE_FREE:
                            tree[v] = TREE_S
                            parent[v] = rev[a]
                            ts[v] = ts[u]
                            dist[v] = dist[u] + 1
                            _activate(v, aflag, aring, regs)
                        elif tv == TREE_T:
                            kind = 1
                            carc = a
                            s_end = u
                            t_end = v
                            break
                        elif ts[v] <= ts[u] and dist[v] > dist[u] + 1:
                            parent[v] = rev[a]
                            ts[v] = ts[u]
                            dist[v] = dist[u] + 1
                    else:
                        ra = rev[a]
                        if res[ra] <= 0:
                            continue
                        tv = tree[v]
                        if tv == TREE_FREE:
                            tree[v] = TREE_T
                            parent[v] = rev[a]
                            ts[v] = ts[u]
                            dist[v] = dist[u] + 1
                            _activate(v, aflag, aring, regs)
                        elif tv == TREE_S:
                            kind = 1
                            carc = ra
                            s_end = v
                            t_end = u
                            break
                        elif ts[v] <= ts[u] and dist[v] > dist[u] + 1:
                            parent[v] = rev[a]
                            ts[v] = ts[u]
                            dist[v] = dist[u] + 1
            if kind == 0:
                break
            regs[R_TIME] += 1
            _augment(kind, s_end, t_end, carc, head, rev, res, rs, rt, parent, oring, regs)
            _process_orphans(
                first, head, rev, res, rs, rt, tree, parent, ts, dist, aflag, aring, oring, regs
            )


@njit(cache=True)
def _cold_init(rs, rt, tree, parent, ts, dist, aflag, aring, regs):
    n = rs.shape[0]
    for i in range(n):
        m = rs[i] if rs[i] < rt[i] else rt[i]
        if m > 0:
            rs[i] -= m
            rt[i] -= m
            regs[R_FLOW] += m
        if rs[i] > 0:
            tree[i] = TREE_S
            parent[i] = P_TERMINAL
            ts[i] = 0
            dist[i] = 1
            _activate(i, aflag, aring, regs)
        elif rt[i] > 0:
            tree[i] = TREE_T
            parent[i] = P_TERMINAL
            ts[i] = 0
            dist[i] = 1
            _activate(i, aflag, aring, regs)
        else:
            tree[i] = TREE_FREE
            parent[i] = P_NONE


@njit(cache=True)
def _warm_prepare(dirty, rs, rt, tree, parent, ts, dist, aflag, aring, oring, regs):
    time = regs[R_TIME]
    for k in range(dirty.shape[0]):
        i = dirty[k]
        m = rs[i] if rs[i] < rt[i] else rt[i]
        if m > 0:
            rs[i] -= m
            rt[i] -= m
            regs[R_FLOW] += m
        if rs[i] > 0:
            if tree[i] == TREE_FREE:
                tree[i] = TREE_S
                parent[i] = P_TERMINAL
                ts[i] = time
                dist[i] = 1
            elif tree[i] == TREE_S and parent[i] != P_TERMINAL:
                parent[i] = P_TERMINAL
                ts[i] = time
                dist[i] = 1
        if rt[i] > 0:
            if tree[i] == TREE_FREE:
                tree[i] = TREE_T
                parent[i] = P_TERMINAL
                ts[i] = time
                dist[i] = 1
            elif tree[i] == TREE_T and parent[i] != P_TERMINAL:
                parent[i] = P_TERMINAL
                ts[i] = time
                dist[i] = 1
        if tree[i] == TREE_S and parent[i] == P_TERMINAL and rs[i] == 0:
            _orphan_add(i, parent, oring, regs)
        elif tree[i] == TREE_T and parent[i] == P_TERMINAL and rt[i] == 0:
            _orphan_add(i, parent, oring, regs)
        _activate(i, aflag, aring, regs)


@njit(cache=True)
def _apply_updates(nodes, new_cs, new_ct, cap_s, cap_t, rs, rt, rho, dirty_flag, dirty_out, regs):
    cnt = 0
    for k in range(nodes.shape[0]):
        i = nodes[k]
        ds = new_cs[k] - cap_s[i]
        dt = new_ct[k] - cap_t[i]
        if ds == 0 and dt == 0:
            continue
        cap_s[i] = new_cs[k]
        cap_t[i] = new_ct[k]
        rs[i] += ds
        rt[i] += dt
        if rs[i] < 0:
            add = -rs[i]
            rs[i] = 0
            rt[i] += add
            rho[i] += add
            regs[R_OFFSET] += add
        if rt[i] < 0:
            add = -rt[i]
            rt[i] = 0
            rs[i] += add
            rho[i] += add
            regs[R_OFFSET] += add
        if dirty_flag[i] == 0:
            dirty_flag[i] = 1
            dirty_out[cnt] = i
            cnt += 1
    return cnt


class ResidualState:
    """Persisted solver state: residuals, trees, and the edit bookkeeping."""

    def __init__(self, net: FlowNetwork):
        n = net.node_count
        self.net = net
        self.res = net.initial_residuals()
        self.rs = net.cap_s.copy()
        self.rt = net.cap_t.copy()
        self.cap_s = net.cap_s.copy()
        self.cap_t = net.cap_t.copy()
        self.rho = np.zeros(n, dtype=np.int64)
        self.tree = np.zeros(n, dtype=np.int8)
        self.parent = np.full(n, P_NONE, dtype=np.int64)
        self.ts = np.zeros(n, dtype=np.int64)
        self.dist = np.zeros(n, dtype=np.int64)
        self.aflag = np.zeros(n, dtype=np.uint8)
        self.aring = np.zeros(n + 2, dtype=np.int64)
        self.oring = np.zeros(n + 2, dtype=np.int64)
        self.regs = np.zeros(8, dtype=np.int64)
        self.dirty_flag = np.zeros(n, dtype=np.uint8)
        self._dirty: list[np.ndarray] = []
        self._dirty_buf = np.zeros(n, dtype=np.int64)
        self.generation = 0
        self.solved = False

    # -- dynamic edits ----------------------------------------------------

    def update_terminal(self, node: int, new_source_cap: int, new_sink_cap: int) -> None:
        self.update_terminals(
            np.asarray([node], dtype=np.int64),
            np.asarray([new_source_cap], dtype=np.int64),
            np.asarray([new_sink_cap], dtype=np.int64),
        )

    def update_terminals(self, nodes, new_cs, new_ct) -> None:
        nodes = np.ascontiguousarray(nodes, dtype=np.int64)
        new_cs = np.ascontiguousarray(new_cs, dtype=np.int64)
        new_ct = np.ascontiguousarray(new_ct, dtype=np.int64)
        if np.any(new_cs < 0) or np.any(new_ct < 0):
            raise ValueError("terminal capacities must be >= 0")
        cnt = _apply_updates(
            nodes, new_cs, new_ct, self.cap_s, self.cap_t, self.rs, self.rt,
            self.rho, self.dirty_flag, self._dirty_buf, self.regs,
        )
        if cnt:
            self._dirty.append(self._dirty_buf[:cnt].copy())
        self.generation += 1

    # -- solving ----------------------------------------------------------

    def _run_cold(self):
        self.regs[R_AQH] = self.regs[R_AQT] = 0
        self.regs[R_OQH] = self.regs[R_OQT] = 0
        _cold_init(
            self.rs, self.rt, self.tree, self.parent, self.ts, self.dist,
            self.aflag, self.aring, self.regs,
        )
        _bk_main(
            self.net.csr_first, self.net.arc_head, self.net.arc_rev, self.res,
            self.rs, self.rt, self.tree, self.parent, self.ts, self.dist,
            self.aflag, self.aring, self.oring, self.regs,
        )
        self.solved = True

    def re_solve(self) -> tuple[np.ndarray, int]:
        """Re-optimize after edits; cut equals a cold solve of current capacities."""
        if not self.solved:
            self._run_cold()
        elif self._dirty:
            dirty = np.unique(np.concatenate(self._dirty))
            self._dirty.clear()
            self.dirty_flag[dirty] = 0
            self.regs[R_TIME] += 1
            _warm_prepare(
                dirty, self.rs, self.rt, self.tree, self.parent, self.ts, self.dist,
                self.aflag, self.aring, self.oring, self.regs,
            )
            _process_orphans(
                self.net.csr_first, self.net.arc_head, self.net.arc_rev, self.res,
                self.rs, self.rt, self.tree, self.parent, self.ts, self.dist,
                self.aflag, self.aring, self.oring, self.regs,
            )
            _bk_main(
                self.net.csr_first, self.net.arc_head, self.net.arc_rev, self.res,
                self.rs, self.rt, self.tree, self.parent, self.ts, self.dist,
                self.aflag, self.aring, self.oring, self.regs,
            )
        self.generation += 1
        return self.source_mask(), self.min_cut_value()

    def source_mask(self) -> np.ndarray:
        return self.tree == TREE_S

    @property
    def flow(self) -> int:
        """Flow in the reparameterized network (includes the offset)."""
        return int(self.regs[R_FLOW])

    @property
    def offset(self) -> int:
        """Total reparameterization constant added to both terminals."""
        return int(self.regs[R_OFFSET])

    def min_cut_value(self) -> int:
        """Cut capacity under the true (unreparameterized) capacities."""
        return self.flow - self.offset

    def clone(self) -> "ResidualState":
        out = ResidualState.__new__(ResidualState)
        out.net = self.net
        for name in (
            "res", "rs", "rt", "cap_s", "cap_t", "rho", "tree", "parent",
            "ts", "dist", "aflag", "aring", "oring", "regs", "dirty_flag",
            "_dirty_buf",
        ):
            setattr(out, name, getattr(self, name).copy())
        out._dirty = [d.copy() for d in self._dirty]
        out.generation = self.generation
        out.solved = self.solved
        return out


def solve(net: FlowNetwork) -> tuple[ResidualState, np.ndarray, int]:
    """Cold solve: returns (state, min-cut source mask, min-cut value)."""
    state = ResidualState(net)
    mask, value = state.re_solve()
    return state, mask, value


def cold_cut(net: FlowNetwork, cap_s=None, cap_t=None) -> tuple[np.ndarray, int]:
    """From-scratch solve of the network with optionally overridden capacities."""
    state = ResidualState(net)
    if cap_s is not None:
        state.cap_s = np.ascontiguousarray(cap_s, dtype=np.int64).copy()
        state.rs = state.cap_s.copy()
    if cap_t is not None:
        state.cap_t = np.ascontiguousarray(cap_t, dtype=np.int64).copy()
        state.rt = state.cap_t.copy()
    return state.re_solve()


def check_flow_conservation(state: ResidualState) -> bool:
    """Net arc outflow equals terminal inflow minus outflow at every node."""
    net = state.net
    n = net.node_count
    fwd = net.arc_fwd.astype(bool)
    tails = np.repeat(np.arange(n), np.diff(net.csr_first))
    # flow on a forward arc equals the residual of its reverse slot
    f = state.res[net.arc_rev[fwd]]
    outflow = np.bincount(tails[fwd], weights=f, minlength=n)
    inflow = np.bincount(net.arc_head[fwd], weights=f, minlength=n)
    f_s = (state.cap_s + state.rho) - state.rs
    f_t = (state.cap_t + state.rho) - state.rt
    lhs = outflow - inflow
    return bool(np.all(np.abs(lhs - (f_s - f_t)) < 0.5))
