"""Synthetic two-object phantoms with analytic ground-truth surfaces.

Each object is a "bone" ellipsoid wearing a "cartilage" cap of constant
radial thickness over a cone of directions.  An optional fluid blob is
rendered at exactly the cartilage intensity, touching a cap from outside;
it reproduces the classic failure mode where bright fluid is segmented as
cartilage.  Intensity edges are rendered with a linear ramp of configurable
width so the true surface sits exactly at the mid-level of each transition.

Ground truth is returned as per-object level functions (zero on the surface,
negative inside) that evaluate in mm along any probe line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import Mesh, make_ellipsoid_mesh
from .volume import Volume


class PhantomError(ValueError):
    """Raised for invalid phantom specifications."""


@dataclass(frozen=True)
class ObjectSpec:
    """One bone ellipsoid plus an optional cartilage cap."""

    center: tuple[float, float, float]
    radii: tuple[float, float, float]
    cap_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    cap_angle_deg: float = 0.0  # 0 disables the cap
    cap_thickness: float = 1.6

    def __post_init__(self):
        if any(r <= 0 for r in self.radii):
            raise PhantomError(f"ellipsoid radii must be positive, got {self.radii}")
        if self.cap_angle_deg > 0 and self.cap_thickness <= 0:
            raise PhantomError("cartilage thickness must be > 0")
        ax = np.asarray(self.cap_axis, dtype=np.float64)
        n = np.linalg.norm(ax)
        if n == 0:
            raise PhantomError("cap axis must be non-zero")
        object.__setattr__(self, "cap_axis", tuple(ax / n))


@dataclass(frozen=True)
class FluidSpec:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise PhantomError("fluid radius must be positive")


@dataclass(frozen=True)
class PhantomSpec:
    """Full phantom description; intensities are normalized levels."""

    objects: tuple[ObjectSpec, ...]
    background: float = 0.35
    bone: float = 0.15
    cartilage: float = 0.75
    fluid_level: float = 0.75
    fluid: FluidSpec | None = None
    noise: float = 0.0
    seed: int = 0
    edge_softness: float = 0.8  # mm width of intensity ramps
    fluid_softness: float = 0.4  # fluid pockets are more sharply delineated
    mesh_subdivision: int = 3
    mesh_offset: float = 1.5  # mm outward offset of the initial meshes

    def __post_init__(self):
        for lvl in (self.background, self.bone, self.cartilage, self.fluid_level):
            if not (0.0 <= lvl <= 1.0):
                raise PhantomError(f"intensity level {lvl} outside [0, 1]")
        if self.noise < 0:
            raise PhantomError("noise amplitude must be >= 0")
        if not self.objects:
            raise PhantomError("phantom needs at least one object")

    def to_json(self) -> str:
        d = {
            "objects": [
                {
                    "center": list(o.center),
                    "radii": list(o.radii),
                    "cap_axis": list(o.cap_axis),
                    "cap_angle_deg": o.cap_angle_deg,
                    "cap_thickness": o.cap_thickness,
                }
                for o in self.objects
            ],
            "background": self.background,
            "bone": self.bone,
            "cartilage": self.cartilage,
            "fluid_level": self.fluid_level,
            "fluid": None
            if self.fluid is None
            else {"center": list(self.fluid.center), "radius": self.fluid.radius},
            "noise": self.noise,
            "seed": self.seed,
            "edge_softness": self.edge_softness,
            "fluid_softness": self.fluid_softness,
            "mesh_subdivision": self.mesh_subdivision,
            "mesh_offset": self.mesh_offset,
        }
        return json.dumps(d, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "PhantomSpec":
        d = json.loads(text)
        objects = tuple(
            ObjectSpec(
                center=tuple(o["center"]),
                radii=tuple(o["radii"]),
                cap_axis=tuple(o.get("cap_axis", (0, 0, 1))),
                cap_angle_deg=o.get("cap_angle_deg", 0.0),
                cap_thickness=o.get("cap_thickness", 1.6),
            )
            for o in d["objects"]
        )
        fluid = None
        if d.get("fluid"):
            fluid = FluidSpec(center=tuple(d["fluid"]["center"]), radius=d["fluid"]["radius"])
        return PhantomSpec(
            objects=objects,
            background=d.get("background", 0.35),
            bone=d.get("bone", 0.15),
            cartilage=d.get("cartilage", 0.75),
            fluid_level=d.get("fluid_level", 0.75),
            fluid=fluid,
            noise=d.get("noise", 0.0),
            seed=d.get("seed", 0),
            edge_softness=d.get("edge_softness", 0.8),
            fluid_softness=d.get("fluid_softness", 0.4),
            mesh_subdivision=d.get("mesh_subdivision", 3),
            mesh_offset=d.get("mesh_offset", 1.5),
        )


# ---------------------------------------------------------------------------
# Level functions (analytic truth)
# ---------------------------------------------------------------------------

def _radial_mm(points: np.ndarray, center, radii) -> np.ndarray:
    """Signed radial distance to the ellipsoid in mm along the center ray.

    Exact for spheres; for ellipsoids it is the mm distance measured along
    the ray from the center, which is exactly zero on the surface and
    monotone across it.
    """
    p = np.atleast_2d(points) - np.asarray(center, dtype=np.float64)
    q = p / np.asarray(radii, dtype=np.float64)
    rho = np.sqrt(np.sum(q * q, axis=1))
    r = np.sqrt(np.sum(p * p, axis=1))
    out = np.where(rho > 0, r * (1.0 - 1.0 / np.maximum(rho, 1e-300)), -float(min(radii)))
    return out


class LevelSurface:
    """Callable level function: zero on the surface, negative inside."""

    def __init__(self, fn, label: str):
        self._fn = fn
        self.label = label

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self._fn(pts)


@dataclass(frozen=True)
class ObjectTruth:
    bone: LevelSurface
    cartilage: LevelSurface


def _in_cap(points: np.ndarray, obj: ObjectSpec) -> np.ndarray:
    if obj.cap_angle_deg <= 0:
        return np.zeros(len(points), dtype=bool)
    d = points - np.asarray(obj.center)
    n = np.linalg.norm(d, axis=1)
    axis = np.asarray(obj.cap_axis)
    cosang = np.einsum("ij,j->i", d, axis) / np.maximum(n, 1e-300)
    return cosang >= np.cos(np.deg2rad(obj.cap_angle_deg))


def object_truth(obj: ObjectSpec) -> ObjectTruth:
    center, radii = obj.center, obj.radii
    outer = tuple(r + obj.cap_thickness for r in radii)

    def bone_fn(pts):
        return _radial_mm(pts, center, radii)

    def cart_fn(pts):
        inner = _radial_mm(pts, center, radii)
        if obj.cap_angle_deg <= 0:
            return inner
        out = _radial_mm(pts, center, outer)
        return np.where(_in_cap(pts, obj), out, inner)

    return ObjectTruth(
        bone=LevelSurface(bone_fn, "bone"),
        cartilage=LevelSurface(cart_fn, "cartilage"),
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

# Inward shift of the cartilage transition band, as a fraction of the edge
# softness.  The weighted first+second derivative score of a falling edge
# peaks one derivative step outside the band center; shifting the rendered
# band keeps the score extremum on the nominal truth surface.
CART_EDGE_SHIFT = 0.2


def _ramp(level_mm: np.ndarray, softness: float) -> np.ndarray:
    """0 inside, 1 outside, smoothstep over `softness` mm centered on 0."""
    if softness <= 0:
        return (level_mm > 0).astype(np.float64)
    u = np.clip(level_mm / softness + 0.5, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _check_disjoint(objects) -> None:
    # sampled check: every bone surface point of A must lie outside B
    u = np.linspace(0, np.pi, 24)
    v = np.linspace(0, 2 * np.pi, 48, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    dirs = np.stack(
        [np.sin(uu) * np.cos(vv), np.sin(uu) * np.sin(vv), np.cos(uu)], axis=-1
    ).reshape(-1, 3)
    for i, a in enumerate(objects):
        pa = np.asarray(a.center) + dirs * np.asarray(a.radii)
        for j, b in enumerate(objects):
            if i == j:
                continue
            if np.any(_radial_mm(pa, b.center, b.radii) <= 0):
                raise PhantomError(f"bone ellipsoids of objects {i} and {j} overlap")


def _check_bounds(spec: PhantomSpec, dims, spacing, origin) -> None:
    lo = np.asarray(origin, dtype=np.float64)
    hi = lo + (np.asarray(dims) - 1) * np.asarray(spacing)
    for i, o in enumerate(spec.objects):
        reach = np.asarray(o.radii) + o.cap_thickness + spec.edge_softness
        if np.any(np.asarray(o.center) - reach < lo) or np.any(
            np.asarray(o.center) + reach > hi
        ):
            raise PhantomError(f"object {i} exceeds the volume bounds")


def make_phantom(
    spec: PhantomSpec,
    dims: tuple[int, int, int],
    spacing: tuple[float, float, float],
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> tuple[Volume, list[Mesh], list[ObjectTruth]]:
    """Render the phantom volume and return (volume, initial meshes, truth).

    The returned meshes are the bone ellipsoids offset outward by
    spec.mesh_offset; they play the role of the fitted initial shape the
    automated pipeline starts from.
    """
    _check_disjoint(spec.objects)
    _check_bounds(spec, dims, spacing, origin)

    nx, ny, nz = dims
    xs = origin[0] + np.arange(nx) * spacing[0]
    ys = origin[1] + np.arange(ny) * spacing[1]
    zs = origin[2] + np.arange(nz) * spacing[2]
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    img = np.full(len(pts), spec.background, dtype=np.float64)

    for obj in spec.objects:
        if obj.cap_angle_deg > 0:
            outer = tuple(r + obj.cap_thickness for r in obj.radii)
            lvl_outer = _radial_mm(pts, obj.center, outer)
            cap = _in_cap(pts, obj)
            shift = CART_EDGE_SHIFT * spec.edge_softness
            w = 1.0 - _ramp(lvl_outer + shift, spec.edge_softness)
            band = cap & (w > 0)
            img[band] = img[band] + (spec.cartilage - img[band]) * w[band]
        lvl_bone = _radial_mm(pts, obj.center, obj.radii)
        wb = 1.0 - _ramp(lvl_bone, spec.edge_softness)
        inside = wb > 0
        img[inside] = img[inside] + (spec.bone - img[inside]) * wb[inside]

    if spec.fluid is not None:
        lvl_f = _radial_mm(pts, spec.fluid.center, (spec.fluid.radius,) * 3)
        wf = 1.0 - _ramp(lvl_f, spec.fluid_softness)
        # fluid never overwrites bone interiors
        outside_bone = np.ones(len(pts), dtype=bool)
        for obj in spec.objects:
            outside_bone &= _radial_mm(pts, obj.center, obj.radii) > 0
        sel = (wf > 0) & outside_bone
        img[sel] = img[sel] + (spec.fluid_level - img[sel]) * wf[sel]

    if spec.noise > 0:
        rng = np.random.default_rng(spec.seed)
        img = img + rng.uniform(-spec.noise, spec.noise, size=img.shape)

    img = np.clip(img, 0.0, 1.0)
    vol = Volume(dims=dims, spacing=spacing, origin=origin, data=img.astype(np.float32))

    meshes = [
        make_ellipsoid_mesh(
            o.center,
            tuple(r + spec.mesh_offset for r in o.radii),
            spec.mesh_subdivision,
        )
        for o in spec.objects
    ]
    truth = [object_truth(o) for o in spec.objects]
    return vol, meshes, truth


def make_phantom_series(
    spec: PhantomSpec,
    dims,
    spacing,
    n_timepoints: int,
    thinning_per_step: float = 0.4,
    origin=(0.0, 0.0, 0.0),
) -> tuple[list[Volume], list[Mesh], list[list[ObjectTruth]]]:
    """Progressive cartilage thinning series with shared initial meshes.

    Time-point t uses cap thickness max(thickness - t*thinning, 0.2); the
    bone never changes, so mesh topology and column correspondence across
    time are exact by construction.
    """
    if n_timepoints < 1:
        raise PhantomError("need at least one time-point")
    volumes, truths = [], []
    meshes: list[Mesh] = []
    for t in range(n_timepoints):
        objs = tuple(
            ObjectSpec(
                center=o.center,
                radii=o.radii,
                cap_axis=o.cap_axis,
                cap_angle_deg=o.cap_angle_deg,
                cap_thickness=max(o.cap_thickness - t * thinning_per_step, 0.2),
            )
            for o in spec.objects
        )
        spec_t = PhantomSpec(
            objects=objs,
            background=spec.background,
            bone=spec.bone,
            cartilage=spec.cartilage,
            fluid_level=spec.fluid_level,
            fluid=spec.fluid if t == 0 else None,
            noise=spec.noise,
            seed=spec.seed + t,
            edge_softness=spec.edge_softness,
            fluid_softness=spec.fluid_softness,
            mesh_subdivision=spec.mesh_subdivision,
            mesh_offset=spec.mesh_offset,
        )
        vol, m, tr = make_phantom(spec_t, dims, spacing, origin)
        volumes.append(vol)
        truths.append(tr)
        if t == 0:
            meshes = m
    return volumes, meshes, truths
