"""The interaction engine: nudge application, undo/redo, edit-stack replay.

A nudge stroke finds the nearest graph nodes of the target surface, rewrites
the costs of the touched columns to the {0, 1} extremes (0 within the
tolerance of the matched node, 1 elsewhere on those columns), pushes the
prior costs onto the edit stack, and warm re-solves the flow network.  Undo
restores the saved costs; redo re-applies the recorded rewrite.  Because
queries, tie-breaks and the solver are deterministic, replaying a saved
stroke sequence onto the same automated baseline reproduces the solution
bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import SegmentationConfig
from .geometry import ColumnSet, Mesh
from .graphnet import FlowNetwork, SurfaceSolution, extract_surfaces
from .maxflow import ResidualState
from .spatial import SpatialIndex
from .volume import Volume

STACK_FORMAT = "jei-stack-v1"


class NudgeError(ValueError):
    """Raised for invalid strokes or impossible undo/redo requests."""


class StackError(ValueError):
    """Raised for malformed or mismatched edit-stack files."""


def fnv1a64(data: bytes, h: int = 0xCBF29CE484222325) -> int:
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def fnv1a64_arrays(chunks) -> str:
    h = 0xCBF29CE484222325
    for c in chunks:
        h = fnv1a64(c if isinstance(c, bytes) else np.ascontiguousarray(c).tobytes(), h)
    return f"{h:016x}"


@dataclass(frozen=True)
class NudgeStroke:
    surface: int
    tp: int
    points: np.ndarray  # float64 [P, 3] mm
    delta_mm: float
    n_nearest: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 1:
            raise NudgeError("stroke needs at least one 3D point")
        if self.delta_mm <= 0:
            raise NudgeError("delta must be positive")
        if self.n_nearest < 1:
            raise NudgeError("n_nearest must be >= 1")
        object.__setattr__(self, "points", pts)


@dataclass
class EditRecord:
    stroke: NudgeStroke
    affected_cols: np.ndarray | None = None  # int64 [A]
    prior: np.ndarray | None = None  # float64 [A, K]
    new: np.ndarray | None = None  # float64 [A, K]
    generation_after: int | None = None

    @property
    def applied_once(self) -> bool:
        return self.new is not None


@dataclass
class ObjectGeometry:
    object_id: int
    mesh: Mesh  # fitted surface the columns were built on
    cols: ColumnSet


@dataclass(frozen=True)
class SurfaceInfo:
    surface: int
    object_id: int
    kind: str  # "bone" | "cartilage"


class Session:
    """One interactive segmentation: data, network, residual state, edits."""

    def __init__(
        self,
        session_id: str,
        config: SegmentationConfig,
        volumes: list[Volume],
        labels: list[float],
        objects: list[ObjectGeometry],
        surfaces: list[SurfaceInfo],
        costs: dict,
        net: FlowNetwork,
        state: ResidualState,
        solution: SurfaceSolution,
        truth=None,
    ):
        self.session_id = session_id
        self.config = config
        self.volumes = volumes
        self.labels = labels
        self.objects = {o.object_id: o for o in objects}
        self.surfaces = {s.surface: s for s in surfaces}
        self.costs = costs  # (surface, tp) -> float64 [n_cols, K], current
        self.baseline_costs = {k: v.copy() for k, v in costs.items()}
        self.net = net
        self.state = state
        self.solution = solution
        self.truth = truth
        self.records: list[EditRecord] = []
        self.cursor = 0
        self.generation = 0
        self._indexes: dict = {}
        self.baseline_digest = self._compute_digest()

    # -- plumbing ----------------------------------------------------------

    @property
    def n_timepoints(self) -> int:
        return len(self.volumes)

    def object_of_surface(self, surface: int) -> ObjectGeometry:
        return self.objects[self.surfaces[surface].object_id]

    def index(self, surface: int, tp: int) -> SpatialIndex:
        key = (surface, tp)
        if key not in self._indexes:
            idx = SpatialIndex()
            idx.add(self.object_of_surface(surface).cols, surface=surface, tp=tp)
            self._indexes[key] = idx
        return self._indexes[key]

    def _compute_digest(self) -> str:
        chunks = [self.config.to_json().encode()]
        for v in self.volumes:
            chunks.append(np.asarray(v.dims, dtype=np.int64))
            chunks.append(np.asarray(v.spacing, dtype=np.float64))
            chunks.append(np.asarray(v.origin, dtype=np.float64))
            chunks.append(v.data)
        for oid in sorted(self.objects):
            chunks.append(self.objects[oid].cols.positions)
        for key in sorted(self.baseline_costs):
            chunks.append(self.baseline_costs[key])
        return fnv1a64_arrays(chunks)

    def solution_snapshot(self) -> SurfaceSolution:
        return self.solution.copy()

    def costs_snapshot(self) -> dict:
        return {k: v.copy() for k, v in self.costs.items()}

    # -- cost plumbing ------------------------------------------------------

    def _set_costs(self, surface: int, tp: int, cols: np.ndarray, rows: np.ndarray) -> None:
        """Overwrite cost rows and push the matching terminal capacities."""
        from .graphnet import quantize_costs

        self.costs[(surface, tp)][cols] = rows
        block = self.net.block(surface, tp)
        q = quantize_costs(rows)
        block.cost_q[cols] = q
        enc = q[:, ::-1] if block.reversed else q
        ids, cs, ct = self.net.terminal_caps(block, cols, enc)
        self.state.update_terminals(ids, cs, ct)

    def _reoptimize(self) -> SurfaceSolution:
        mask, _ = self.state.re_solve()
        self.solution = extract_surfaces(self.net, mask)
        self.generation += 1
        return self.solution

    # -- the nudge ----------------------------------------------------------

    def _compute_rewrite(self, stroke: NudgeStroke):
        """(affected columns, new cost rows) for a stroke on the current session."""
        if stroke.surface not in self.surfaces:
            raise NudgeError(f"unknown surface id {stroke.surface}")
        if not (0 <= stroke.tp < self.n_timepoints):
            raise NudgeError(f"time-point {stroke.tp} out of range")
        idx = self.index(stroke.surface, stroke.tp)
        cols = self.object_of_surface(stroke.surface).cols

        matches = []  # (distance, point order, column, node)
        for pi, p in enumerate(stroke.points):
            for ref, d in idx.nearest(p, stroke.n_nearest):
                matches.append((d, pi, ref.column, ref.node))
        if not matches:
            raise NudgeError("nudge matched no columns")

        best: dict[int, tuple] = {}
        for d, pi, c, j in matches:
            key = (d, pi, j)
            if c not in best or key < best[c]:
                best[c] = key
        affected = np.array(sorted(best), dtype=np.int64)

        k = cols.k
        rows = np.empty((len(affected), k))
        for r, c in enumerate(affected):
            _, _, j_near = best[c]
            anchor = cols.positions[c, j_near]
            dist = np.linalg.norm(cols.positions[c] - anchor, axis=1)
            rows[r] = np.where(dist < stroke.delta_mm, 0.0, 1.0)
        return affected, rows

    def apply_nudge(self, stroke: NudgeStroke) -> SurfaceSolution:
        affected, rows = self._compute_rewrite(stroke)
        prior = self.costs[(stroke.surface, stroke.tp)][affected].copy()
        # a fresh interaction truncates any redoable tail
        del self.records[self.cursor :]
        rec = EditRecord(stroke=stroke, affected_cols=affected, prior=prior, new=rows.copy())
        self.records.append(rec)
        self.cursor += 1
        self._set_costs(stroke.surface, stroke.tp, affected, rows)
        out = self._reoptimize()
        rec.generation_after = self.generation
        return out

    def undo(self) -> SurfaceSolution:
        if self.cursor == 0:
            raise NudgeError("nothing to undo")
        rec = self.records[self.cursor - 1]
        self.cursor -= 1
        self._set_costs(rec.stroke.surface, rec.stroke.tp, rec.affected_cols, rec.prior)
        return self._reoptimize()

    def redo(self) -> SurfaceSolution:
        if self.cursor >= len(self.records):
            raise NudgeError("nothing to redo")
        rec = self.records[self.cursor]
        if not rec.applied_once:  # tail loaded from a stack file
            affected, rows = self._compute_rewrite(rec.stroke)
            rec.affected_cols = affected
            rec.prior = self.costs[(rec.stroke.surface, rec.stroke.tp)][affected].copy()
            rec.new = rows
        self.cursor += 1
        self._set_costs(rec.stroke.surface, rec.stroke.tp, rec.affected_cols, rec.new)
        out = self._reoptimize()
        rec.generation_after = self.generation
        return out

    # -- stack persistence ---------------------------------------------------

    def stack_payload(self) -> dict:
        return {
            "format": STACK_FORMAT,
            "baseline_digest": self.baseline_digest,
            "cursor": self.cursor,
            "strokes": [
                {
                    "surface": r.stroke.surface,
                    "timepoint": r.stroke.tp,
                    "delta_mm": r.stroke.delta_mm,
                    "n_nearest": r.stroke.n_nearest,
                    "points": r.stroke.points.tolist(),
                }
                for r in self.records
            ],
        }

    def save_stack(self, path) -> None:
        with open(path, "w", encoding="ascii") as f:
            json.dump(self.stack_payload(), f, indent=2, sort_keys=True)
            f.write("\n")

    def load_stack_payload(self, payload: dict) -> SurfaceSolution:
        if payload.get("format") != STACK_FORMAT:
            raise StackError("unrecognized stack format")
        if payload.get("baseline_digest") != self.baseline_digest:
            raise StackError(
                "stack baseline digest mismatch: "
                f"{payload.get('baseline_digest')} != {self.baseline_digest}"
            )
        cursor = int(payload.get("cursor", 0))
        strokes = [
            NudgeStroke(
                surface=int(s["surface"]),
                tp=int(s["timepoint"]),
                points=np.asarray(s["points"], dtype=np.float64),
                delta_mm=float(s["delta_mm"]),
                n_nearest=int(s["n_nearest"]),
            )
            for s in payload.get("strokes", [])
        ]
        if not (0 <= cursor <= len(strokes)):
            raise StackError("stack cursor out of range")

        self.reset_to_baseline()
        for s in strokes[:cursor]:
            self.apply_nudge(s)
        self.records.extend(EditRecord(stroke=s) for s in strokes[cursor:])
        return self.solution

    def load_stack(self, path) -> SurfaceSolution:
        with open(path, "r", encoding="ascii") as f:
            try:
                payload = json.load(f)
            except json.JSONDecodeError as e:
                raise StackError(f"malformed stack file: {e}") from e
        return self.load_stack_payload(payload)

    def reset_to_baseline(self) -> SurfaceSolution:
        for (surface, tp), base in self.baseline_costs.items():
            changed = np.flatnonzero(np.any(self.costs[(surface, tp)] != base, axis=1))
            if len(changed):
                self._set_costs(surface, tp, changed, base[changed].copy())
        self.records.clear()
        self.cursor = 0
        return self._reoptimize()


# Module-level operation aliases matching the engine's public verbs.

def apply_nudge(session: Session, stroke: NudgeStroke) -> SurfaceSolution:
    return session.apply_nudge(stroke)


def undo(session: Session) -> SurfaceSolution:
    return session.undo()


def redo(session: Session) -> SurfaceSolution:
    return session.redo()


def save_stack(session: Session, path) -> None:
    session.save_stack(path)


def load_stack(session: Session, path) -> SurfaceSolution:
    return session.load_stack(path)
