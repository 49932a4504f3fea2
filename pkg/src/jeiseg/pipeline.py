"""End-to-end automated segmentation and surface-error evaluation.

segment() runs the full automated chain on one or more objects: fit a
patient-specific surface via a single-surface solve from the initial mesh,
rebuild columns on it, compute bone and cartilage costs, pair facing objects,
assemble the (optionally longitudinal) network, solve, and wrap everything
into an interactive Session.

surface_error() measures signed/unsigned distances in mm along each column
between the selected nodes and an analytic truth surface.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .config import SegmentationConfig
from .cost import bone_costs, cartilage_costs
from .geometry import ColumnSet, Mesh, build_columns, vertex_normals
from .graphnet import (
    GraphSpec,
    NetworkBuilder,
    extract_surfaces,
    pair_objects,
)
from .jei import ObjectGeometry, Session, SurfaceInfo
from .longitudinal import SurfaceCosts, build_4d_network
from .maxflow import solve
from .volume import Volume


class PipelineError(RuntimeError):
    """Raised when the automated pipeline cannot proceed."""


def surface_id_for(object_index: int, kind: str) -> int:
    return 2 * object_index + (0 if kind == "bone" else 1)


def presegment(v: Volume, s0: Mesh, cfg: SegmentationConfig) -> Mesh:
    """Single-surface fit of the initial mesh to the bone edge."""
    cols = build_columns(
        s0, cfg.k, cfg.node_spacing, cfg.inner_fraction, cfg.column_method
    )
    costs = bone_costs(v, cols, cfg.bone_sign)
    b = NetworkBuilder(GraphSpec(smoothness=cfg.smoothness), n_timepoints=1)
    b.add_surface(0, 0, cols, costs)
    net = b.build()
    _, mask, _ = solve(net)
    sol = extract_surfaces(net, mask)
    j = sol.levels[(0, 0)]
    verts = cols.positions[np.arange(cols.n_cols), j]
    return Mesh(
        vertices=verts,
        triangles=s0.triangles.copy(),
        normals=vertex_normals(verts, s0.triangles),
    )


def segment(
    volumes: Volume | list[Volume],
    meshes: list[Mesh],
    cfg: SegmentationConfig | None = None,
    labels: list[float] | None = None,
    truth=None,
    session_id: str = "session",
) -> Session:
    """Automated multi-object multi-surface (optionally 4D) segmentation."""
    cfg = cfg or SegmentationConfig()
    vols = [volumes] if isinstance(volumes, Volume) else list(volumes)
    if not vols:
        raise PipelineError("no volumes")
    if labels is None:
        labels = list(range(len(vols)))
    if len(labels) != len(vols):
        raise PipelineError("labels and volumes must align")
    n_tp = len(vols)

    objects: list[ObjectGeometry] = []
    surfaces: list[SurfaceInfo] = []
    costs: dict = {}
    surface_costs: list[SurfaceCosts] = []
    surface_links: list[tuple[int, int]] = []

    for oi, s0 in enumerate(meshes):
        fitted = presegment(vols[0], s0, cfg)
        cols = build_columns(
            fitted, cfg.k, cfg.node_spacing, cfg.inner_fraction, cfg.column_method
        )
        objects.append(ObjectGeometry(object_id=oi, mesh=fitted, cols=cols))
        bone_id = surface_id_for(oi, "bone")
        cart_id = surface_id_for(oi, "cartilage")
        surfaces.append(SurfaceInfo(surface=bone_id, object_id=oi, kind="bone"))
        surfaces.append(SurfaceInfo(surface=cart_id, object_id=oi, kind="cartilage"))
        bone_by_tp = [bone_costs(v, cols, cfg.bone_sign) for v in vols]
        cart_by_tp = [
            cartilage_costs(v, cols, cfg.w, cfg.cartilage_sign1, cfg.cartilage_sign2)
            for v in vols
        ]
        for t in range(n_tp):
            costs[(bone_id, t)] = bone_by_tp[t]
            costs[(cart_id, t)] = cart_by_tp[t]
        surface_costs.append(
            SurfaceCosts(surface=bone_id, object_id=oi, cols=cols, costs_by_tp=bone_by_tp)
        )
        surface_costs.append(
            SurfaceCosts(surface=cart_id, object_id=oi, cols=cols, costs_by_tp=cart_by_tp)
        )
        surface_links.append((bone_id, cart_id))

    object_links = []
    for a, b in itertools.combinations(range(len(objects)), 2):
        corr = pair_objects(
            objects[a].cols, objects[b].cols, cfg.contact_mm, cfg.contact_angle_deg
        )
        if len(corr):
            object_links.append(
                (surface_id_for(a, "cartilage"), surface_id_for(b, "cartilage"), corr)
            )

    net = build_4d_network(cfg.graph_spec(), surface_costs, surface_links, object_links)
    state, mask, _ = solve(net)
    solution = extract_surfaces(net, mask)
    if truth is not None and not isinstance(truth[0], list):
        truth = [list(truth)] * n_tp  # same analytic truth for every time-point
    return Session(
        session_id=session_id,
        config=cfg,
        volumes=vols,
        labels=list(labels),
        objects=objects,
        surfaces=surfaces,
        costs={k: np.array(v, dtype=np.float64, copy=True) for k, v in costs.items()},
        net=net,
        state=state,
        solution=solution,
        truth=truth,
    )


# ---------------------------------------------------------------------------
# Error metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorRow:
    surface: int
    tp: int
    kind: str
    n_cols: int
    excluded: int
    signed_mean: float
    signed_sd: float
    unsigned_mean: float
    unsigned_sd: float


@dataclass
class ErrorReport:
    rows: list[ErrorRow]
    per_column: dict  # (surface, tp) -> float64 signed mm (nan where excluded)

    def row(self, surface: int, tp: int = 0) -> ErrorRow:
        for r in self.rows:
            if r.surface == surface and r.tp == tp:
                return r
        raise KeyError((surface, tp))

    def to_json(self) -> str:
        return json.dumps(
            {
                "rows": [
                    {
                        "surface": r.surface,
                        "timepoint": r.tp,
                        "kind": r.kind,
                        "columns": r.n_cols,
                        "excluded": r.excluded,
                        "signed_mean_mm": r.signed_mean,
                        "signed_sd_mm": r.signed_sd,
                        "unsigned_mean_mm": r.unsigned_mean,
                        "unsigned_sd_mm": r.unsigned_sd,
                    }
                    for r in self.rows
                ]
            },
            indent=2,
            sort_keys=True,
        )

    def format_table(self) -> str:
        lines = [
            f"{'Surface':<22} {'Signed (mm)':>18} {'Unsigned (mm)':>18}",
            "-" * 60,
        ]
        for r in self.rows:
            name = f"{r.kind} s{r.surface} t{r.tp}"
            signed = f"{r.signed_mean:+.2f} ± {r.signed_sd:.2f}"
            unsigned = f"{r.unsigned_mean:.2f} ± {r.unsigned_sd:.2f}"
            lines.append(f"{name:<22} {signed:>18} {unsigned:>18}")
        return "\n".join(lines)


def column_truth_positions(cols: ColumnSet, level_fn, tol_mm: float = 1e-6):
    """Arc-length position (mm from node 0) where the truth surface crosses
    each column, found by bisection on the level function; nan when the
    column does not cross the surface.
    """
    n, k = cols.n_cols, cols.k
    vals = level_fn(cols.positions.reshape(n * k, 3)).reshape(n, k)
    inside = vals <= 0
    cross = inside[:, :-1] & ~inside[:, 1:]
    out = np.full(n, np.nan)
    has = cross.any(axis=1)
    seg = np.where(has, cross.argmax(axis=1), 0)

    active = np.flatnonzero(has)
    if len(active):
        a = cols.positions[active, seg[active]]
        b = cols.positions[active, seg[active] + 1]
        lo = np.zeros(len(active))
        hi = np.ones(len(active))
        for _ in range(int(np.ceil(np.log2(cols.node_spacing / tol_mm))) + 1):
            mid = 0.5 * (lo + hi)
            pm = a + mid[:, None] * (b - a)
            v = level_fn(pm)
            take_hi = v <= 0
            lo = np.where(take_hi, mid, lo)
            hi = np.where(take_hi, hi, mid)
        t = 0.5 * (lo + hi)
        out[active] = (seg[active] + t) * cols.node_spacing
    return out


def error_stats(signed: np.ndarray) -> tuple[float, float, float, float]:
    s = signed[np.isfinite(signed)]
    if not len(s):
        return (np.nan,) * 4
    u = np.abs(s)
    return float(s.mean()), float(s.std()), float(u.mean()), float(u.std())


def surface_error(session: Session, tp: int | None = None) -> ErrorReport:
    """Column-wise signed/unsigned error of every surface against the truth."""
    if session.truth is None:
        raise PipelineError("session has no analytic truth attached")
    tps = range(session.n_timepoints) if tp is None else [tp]
    rows = []
    per_col = {}
    for t in tps:
        truth_t = session.truth[t]
        for sid, info in sorted(session.surfaces.items()):
            cols = session.objects[info.object_id].cols
            level = getattr(truth_t[info.object_id], info.kind)
            truth_pos = column_truth_positions(cols, level)
            j = session.solution.levels[(sid, t)].astype(np.float64)
            signed = j * cols.node_spacing - truth_pos
            per_col[(sid, t)] = signed
            sm, ssd, um, usd = error_stats(signed)
            rows.append(
                ErrorRow(
                    surface=sid,
                    tp=t,
                    kind=info.kind,
                    n_cols=cols.n_cols,
                    excluded=int(np.isnan(truth_pos).sum()),
                    signed_mean=sm,
                    signed_sd=ssd,
                    unsigned_mean=um,
                    unsigned_sd=usd,
                )
            )
    return ErrorReport(rows=rows, per_column=per_col)
