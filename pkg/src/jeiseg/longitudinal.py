"""Longitudinal (multi-time-point) coupling.

All time-points of a subject share mesh topology, so columns correspond by
index across time.  A single network spans every time-point; consecutive
time-points are chained by inter-time arcs bounding the per-column level
change, and a nudge on one time-point propagates through that chain during
the coupled re-solve.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .geometry import ColumnSet
from .graphnet import FlowNetwork, GraphSpec, NetworkBuilder, ObjectCorrespondence
from .jei import NudgeError, NudgeStroke, Session, SurfaceSolution
from .volume import Volume, load_volume


class TimeSeriesError(ValueError):
    """Raised for inconsistent time-series inputs."""


@dataclass
class TimeSeries:
    labels: list[float]  # strictly increasing (e.g. month offsets)
    volumes: list[Volume]

    def __post_init__(self):
        if len(self.labels) != len(self.volumes):
            raise TimeSeriesError("labels and volumes must align")
        if len(self.labels) < 2:
            raise TimeSeriesError("a time series needs at least 2 time-points")
        if any(b <= a for a, b in zip(self.labels, self.labels[1:])):
            raise TimeSeriesError("time-point labels must be strictly increasing")

    def __len__(self) -> int:
        return len(self.labels)


def save_manifest(path, labels, volume_paths, mesh_paths=None) -> None:
    doc = {
        "timepoints": [
            {"label": float(l), "volume": str(v)} for l, v in zip(labels, volume_paths)
        ]
    }
    if mesh_paths:
        doc["meshes"] = [str(m) for m in mesh_paths]
    with open(path, "w", encoding="ascii") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_manifest(path) -> tuple[TimeSeries, list[str]]:
    """Read a series manifest; volume paths resolve relative to the manifest."""
    with open(path, "r", encoding="ascii") as f:
        doc = json.load(f)
    tps = doc.get("timepoints", [])
    if not tps:
        raise TimeSeriesError("manifest lists no time-points")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    labels = [float(t["label"]) for t in tps]
    volumes = [load_volume(resolve(t["volume"])) for t in tps]
    meshes = [resolve(m) for m in doc.get("meshes", [])]
    return TimeSeries(labels=labels, volumes=volumes), meshes


@dataclass
class SurfaceCosts:
    """Costs of one surface across all time-points of the series."""

    surface: int
    object_id: int
    cols: ColumnSet
    costs_by_tp: list[np.ndarray]


def build_4d_network(
    spec: GraphSpec,
    surfaces: list[SurfaceCosts],
    surface_links: list[tuple[int, int]] = (),
    object_links: list[tuple[int, int, ObjectCorrespondence]] = (),
) -> FlowNetwork:
    """One network spanning all time-points with consecutive-tp coupling.

    Every surface must carry the same number of per-tp cost arrays with a
    shape matching its column set; the first mismatch is reported by name.
    """
    if not surfaces:
        raise TimeSeriesError("no surfaces")
    n_tp = len(surfaces[0].costs_by_tp)
    for s in surfaces:
        if len(s.costs_by_tp) != n_tp:
            raise TimeSeriesError(
                f"surface {s.surface}: {len(s.costs_by_tp)} time-points, expected {n_tp}"
            )
        for t, c in enumerate(s.costs_by_tp):
            if np.asarray(c).shape != (s.cols.n_cols, s.cols.k):
                raise TimeSeriesError(
                    f"topology mismatch at surface {s.surface}, time-points 0 vs {t}: "
                    f"{np.asarray(c).shape} != {(s.cols.n_cols, s.cols.k)}"
                )
    b = NetworkBuilder(spec, n_timepoints=n_tp)
    for s in surfaces:
        b.add_surface(s.surface, s.object_id, s.cols, list(s.costs_by_tp))
    for lower, upper in surface_links:
        b.link_surfaces(lower, upper)
    for sa, sb, corr in object_links:
        b.link_objects(sa, sb, corr)
    return b.build()


def nudge_4d(session: Session, stroke: NudgeStroke) -> SurfaceSolution:
    """Apply a single-time-point stroke to a longitudinal session.

    The rewrite is confined to the stroke's time-point; the coupled re-solve
    returns the solution across all time-points.
    """
    if session.n_timepoints < 2:
        raise NudgeError("nudge_4d needs a longitudinal session")
    return session.apply_nudge(stroke)
