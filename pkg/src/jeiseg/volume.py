"""3D scalar volumes: EVF file I/O, trilinear sampling, directional derivatives.

A Volume is an immutable grid of normalized intensities in [0, 1] with
physical spacing in mm.  All sampling is done in physical (mm) coordinates;
out-of-bounds points clamp to the boundary voxel so that graph columns near
the volume edge still receive finite values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EVF_MAGIC = "EVF1"


class VolumeError(ValueError):
    """Raised for malformed volume files or invalid volume data."""


@dataclass(frozen=True)
class Volume:
    """Scalar image grid.  data is float32, x-fastest, values in [0, 1]."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        nx, ny, nz = self.dims
        if nx < 2 or ny < 2 or nz < 2:
            raise VolumeError(f"dims must be >= 2 per axis, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise VolumeError(f"spacing must be positive, got {self.spacing}")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.size != nx * ny * nz:
            raise VolumeError(
                f"data length mismatch: header {nx * ny * nz}, payload {data.size}"
            )
        if not np.all(np.isfinite(data)):
            raise VolumeError("volume data contains non-finite values")
        if data.min() < 0.0 or data.max() > 1.0:
            raise VolumeError("volume data outside [0, 1]")
        object.__setattr__(self, "data", data)
        # cached (nz, ny, nx) view for vectorized sampling
        object.__setattr__(self, "_grid", data.reshape(nz, ny, nx))

    @property
    def grid(self) -> np.ndarray:
        """(nz, ny, nx) view of the data."""
        return self._grid

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical bounding box (lo, hi) in mm, inclusive of boundary voxels."""
        lo = np.asarray(self.origin, dtype=np.float64)
        hi = lo + (np.asarray(self.dims) - 1) * np.asarray(self.spacing)
        return lo, hi

    def value_at(self, i: int, j: int, k: int) -> float:
        return float(self._grid[k, j, i])


# ---------------------------------------------------------------------------
# EVF file format
# ---------------------------------------------------------------------------

def save_volume(v: Volume, path) -> None:
    """Write a Volume in the EVF format.  Byte output is deterministic."""
    header = (
        f"{EVF_MAGIC}\n"
        f"dims {v.dims[0]} {v.dims[1]} {v.dims[2]}\n"
        f"spacing {v.spacing[0]!r} {v.spacing[1]!r} {v.spacing[2]!r}\n"
        f"origin {v.origin[0]!r} {v.origin[1]!r} {v.origin[2]!r}\n"
        f"data float32-le\n"
    )
    payload = v.data.astype("<f4", copy=False).tobytes()
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(payload)


def _parse_header_line(line: bytes, key: str, n: int, conv):
    parts = line.decode("ascii", errors="replace").strip().split()
    if len(parts) != n + 1 or parts[0] != key:
        raise VolumeError(f"malformed header line for '{key}': {line!r}")
    try:
        return tuple(conv(p) for p in parts[1:])
    except ValueError as e:
        raise VolumeError(f"malformed header value in '{key}' line: {e}") from e


def load_volume(path) -> Volume:
    """Read an EVF file.  Inverse of save_volume, bit-exact."""
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != EVF_MAGIC.encode("ascii"):
            raise VolumeError(f"bad magic, expected {EVF_MAGIC!r}, got {magic!r}")
        dims = _parse_header_line(f.readline(), "dims", 3, int)
        spacing = _parse_header_line(f.readline(), "spacing", 3, float)
        origin = _parse_header_line(f.readline(), "origin", 3, float)
        fmt = f.readline().strip()
        if fmt != b"data float32-le":
            raise VolumeError(f"unsupported data format line: {fmt!r}")
        n = dims[0] * dims[1] * dims[2]
        raw = f.read()
    if len(raw) != 4 * n:
        raise VolumeError(
            f"data length mismatch: header {n} values, payload {len(raw) // 4}"
        )
    data = np.frombuffer(raw, dtype="<f4").copy()
    return Volume(dims=dims, spacing=spacing, origin=origin, data=data)


# ---------------------------------------------------------------------------
# Sampling and derivatives
# ---------------------------------------------------------------------------

def sample(v: Volume, p, clamp: bool = True):
    """Trilinear interpolation at physical points p (mm).

    p is (3,) or (N, 3).  Points outside the bounding box are clamped to the
    boundary voxel.  Returns (values, oob) where oob flags clamped points;
    scalars for a single point.
    """
    pts = np.atleast_2d(np.asarray(p, dtype=np.float64))
    spacing = np.asarray(v.spacing)
    origin = np.asarray(v.origin)
    dims = np.asarray(v.dims)

    g = (pts - origin) / spacing  # voxel coordinates
    oob = np.any((g < 0) | (g > dims - 1), axis=1)
    if not clamp and np.any(oob):
        raise VolumeError("sample point outside volume bounds")
    g = np.clip(g, 0.0, dims - 1)

    i0 = np.minimum(g.astype(np.int64), dims - 2)
    f = g - i0
    x0, y0, z0 = i0[:, 0], i0[:, 1], i0[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]

    grid = v.grid.astype(np.float64, copy=False)
    c000 = grid[z0, y0, x0]
    c100 = grid[z0, y0, x0 + 1]
    c010 = grid[z0, y0 + 1, x0]
    c110 = grid[z0, y0 + 1, x0 + 1]
    c001 = grid[z0 + 1, y0, x0]
    c101 = grid[z0 + 1, y0, x0 + 1]
    c011 = grid[z0 + 1, y0 + 1, x0]
    c111 = grid[z0 + 1, y0 + 1, x0 + 1]

    c00 = c000 * (1 - fx) + c100 * fx
    c10 = c010 * (1 - fx) + c110 * fx
    c01 = c001 * (1 - fx) + c101 * fx
    c11 = c011 * (1 - fx) + c111 * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    vals = c0 * (1 - fz) + c1 * fz

    if np.isscalar(p[0]) if not isinstance(p, np.ndarray) else np.asarray(p).ndim == 1:
        return float(vals[0]), bool(oob[0])
    return vals, oob


def derivative_step(v: Volume) -> float:
    """Central-difference step: half the smallest voxel spacing."""
    return 0.5 * float(min(v.spacing))


def _check_directions(d: np.ndarray):
    norms = np.linalg.norm(d, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise VolumeError("derivative direction must be unit length")


def deriv1(v: Volume, p, d, h: float | None = None):
    """First directional derivative (per mm) by central differences.

    Falls back to a one-sided difference when one side of the stencil leaves
    the volume; the returned flag marks those points.
    """
    if h is None:
        h = derivative_step(v)
    pts = np.atleast_2d(np.asarray(p, dtype=np.float64))
    dirs = np.broadcast_to(np.atleast_2d(np.asarray(d, dtype=np.float64)), pts.shape)
    _check_directions(dirs)

    fp, oob_p = sample(v, pts + h * dirs)
    fm, oob_m = sample(v, pts - h * dirs)
    f0, _ = sample(v, pts)
    out = (fp - fm) / (2.0 * h)
    flag = oob_p | oob_m
    one_sided_p = oob_p & ~oob_m
    one_sided_m = oob_m & ~oob_p
    out[one_sided_p] = (f0[one_sided_p] - fm[one_sided_p]) / h
    out[one_sided_m] = (fp[one_sided_m] - f0[one_sided_m]) / h

    if np.asarray(p).ndim == 1:
        return float(out[0]), bool(flag[0])
    return out, flag


def deriv2(v: Volume, p, d, h: float | None = None):
    """Second directional derivative (per mm^2) by central differences."""
    if h is None:
        h = derivative_step(v)
    pts = np.atleast_2d(np.asarray(p, dtype=np.float64))
    dirs = np.broadcast_to(np.atleast_2d(np.asarray(d, dtype=np.float64)), pts.shape)
    _check_directions(dirs)

    fp, oob_p = sample(v, pts + h * dirs)
    fm, oob_m = sample(v, pts - h * dirs)
    f0, _ = sample(v, pts)
    out = (fp - 2.0 * f0 + fm) / (h * h)
    flag = oob_p | oob_m

    if np.asarray(p).ndim == 1:
        return float(out[0]), bool(flag[0])
    return out, flag
