"""Regular sampled fields: storage, trilinear lookup, grid file I/O, resampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IngestError


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Samples on a regular lattice.

    ``values`` has shape ``(nz, ny, nx)`` for scalar fields and
    ``(nz, ny, nx, 3)`` for vector fields, i.e. x varies fastest in the
    flattened order.
    """
    origin: tuple[float, float, float]
    spacing: tuple[float, float, float]
    dims: tuple[int, int, int]
    values: np.ndarray

    def __post_init__(self):
        if any(not (s > 0 and math.isfinite(s)) for s in self.spacing):
            raise IngestError(f"spacing must be positive, got {self.spacing}")
        if any(int(d) != d or d < 1 for d in self.dims):
            raise IngestError(f"dims must be positive integers, got {self.dims}")
        nx, ny, nz = self.dims
        shape = self.values.shape
        if shape not in ((nz, ny, nx), (nz, ny, nx, 3)):
            raise IngestError(f"values shape {shape} does not match dims {self.dims}")

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 4

    def at(self, i: int, j: int, k: int):
        """Value at lattice index (i along x, j along y, k along z)."""
        v = self.values[k, j, i]
        return v.copy() if self.is_vector else float(v)

    def node(self, i, j, k) -> tuple[float, float, float]:
        ox, oy, oz = self.origin
        sx, sy, sz = self.spacing
        return (ox + i * sx, oy + j * sy, oz + k * sz)

    @property
    def bounds(self):
        lo = np.array(self.origin, dtype=float)
        hi = lo + (np.array(self.dims) - 1) * np.array(self.spacing)
        return lo, hi

    def contains(self, p, tol=0.0) -> bool:
        lo, hi = self.bounds
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))

    def sample(self, p):
        """Trilinear interpolation at point ``p``; raises ValueError outside the grid."""
        if not self.contains(p, tol=1e-12):
            raise ValueError(f"point {tuple(p)} outside grid")
        idx = []
        frac = []
        for axis in range(3):
            n = self.dims[axis]
            u = (p[axis] - self.origin[axis]) / self.spacing[axis]
            if n == 1:
                idx.append(0)
                frac.append(0.0)
                continue
            u = min(max(u, 0.0), n - 1.0)
            i0 = min(int(math.floor(u)), n - 2)
            idx.append(i0)
            frac.append(u - i0)
        i0, j0, k0 = idx
        fx, fy, fz = frac
        i1 = i0 + (self.dims[0] > 1)
        j1 = j0 + (self.dims[1] > 1)
        k1 = k0 + (self.dims[2] > 1)
        v = self.values
        c00 = v[k0, j0, i0] * (1 - fx) + v[k0, j0, i1] * fx
        c10 = v[k0, j1, i0] * (1 - fx) + v[k0, j1, i1] * fx
        c01 = v[k1, j0, i0] * (1 - fx) + v[k1, j0, i1] * fx
        c11 = v[k1, j1, i0] * (1 - fx) + v[k1, j1, i1] * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        out = c0 * (1 - fz) + c1 * fz
        return np.asarray(out, dtype=float) if self.is_vector else float(out)

    def flat_values(self) -> list:
        return [float(x) for x in self.values.reshape(-1)]


def read_grid_file(text: str) -> FieldGrid:
    """Parse ``origin=``, ``spacing=``, ``dims=`` header lines then the values."""
    header = {}
    body = []
    for line in text.splitlines():
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" in stripped:
            key, _, rest = stripped.partition("=")
            header[key.strip()] = rest.split()
        else:
            body.extend(stripped.split())
    for key in ("origin", "spacing", "dims"):
        if key not in header or len(header[key]) != 3:
            raise IngestError(f"grid file needs '{key}=' with 3 numbers")
    try:
        origin = tuple(float(v) for v in header["origin"])
        spacing = tuple(float(v) for v in header["spacing"])
        dims_f = [float(v) for v in header["dims"]]
        values = np.array([float(v) for v in body], dtype=float)
    except ValueError as exc:
        raise IngestError(f"non-numeric entry in grid file: {exc}") from None
    if any(d != int(d) or d < 1 for d in dims_f):
        raise IngestError(f"dims must be positive integers, got {header['dims']}")
    if any(s <= 0 for s in spacing):
        raise IngestError(f"spacing must be positive, got {spacing}")
    nx, ny, nz = (int(d) for d in dims_f)
    n = nx * ny * nz
    if values.size == n:
        arr = values.reshape(nz, ny, nx)
    elif values.size == 3 * n:
        arr = values.reshape(nz, ny, nx, 3)
    else:
        raise IngestError(f"grid declares {nx}x{ny}x{nz} nodes but has {values.size} values "
                          f"(expected {n} scalar or {3 * n} vector components)")
    if not np.all(np.isfinite(arr)):
        raise IngestError("non-finite value in grid file")
    return FieldGrid(origin, spacing, (nx, ny, nz), arr)


def write_grid_file(grid: FieldGrid) -> str:
    lines = [
        "origin= " + " ".join(repr(float(v)) for v in grid.origin),
        "spacing= " + " ".join(repr(float(v)) for v in grid.spacing),
        "dims= " + " ".join(str(int(v)) for v in grid.dims),
    ]
    per_line = grid.dims[0] * (3 if grid.is_vector else 1)
    flat = grid.flat_values()
    for i in range(0, len(flat), per_line):
        lines.append(" ".join(repr(v) for v in flat[i:i + per_line]))
    return "\n".join(lines) + "\n"


def grid_from_samples(points, values):
    """Rebuild a FieldGrid when the samples cover a complete regular lattice, else None."""
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return None
    axes = []
    for a in range(3):
        u = np.unique(pts[:, a])
        if len(u) > 1:
            steps = np.diff(u)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                return None
            axes.append((u[0], float(steps[0]), len(u)))
        else:
            axes.append((u[0], 1.0, 1))
    nx, ny, nz = (ax[2] for ax in axes)
    if nx * ny * nz != len(pts) or min(nx, ny, nz) < 2:
        return None
    vals = [np.asarray(v, dtype=float) for v in values]
    vector = vals[0].ndim == 1
    arr = np.full((nz, ny, nx, 3) if vector else (nz, ny, nx), np.nan)
    for p, v in zip(pts, vals):
        i, j, k = (int(round((p[a] - axes[a][0]) / axes[a][1])) for a in range(3))
        arr[k, j, i] = v
    if np.isnan(arr).any():
        return None
    return FieldGrid(tuple(float(ax[0]) for ax in axes), tuple(ax[1] for ax in axes),
                     (nx, ny, nz), arr)


def resample_idw(points, values, origin, spacing, dims, power=2.0) -> FieldGrid:
    """Inverse-distance weighting of scattered samples onto a regular grid (all points)."""
    pts = np.asarray(points, dtype=float)
    vals = np.asarray([np.asarray(v, dtype=float) for v in values])
    if len(pts) == 0:
        raise ValueError("no samples to resample")
    nx, ny, nz = (int(d) for d in dims)
    gx = origin[0] + np.arange(nx) * spacing[0]
    gy = origin[1] + np.arange(ny) * spacing[1]
    gz = origin[2] + np.arange(nz) * spacing[2]
    zz, yy, xx = np.meshgrid(gz, gy, gx, indexing="ij")
    nodes = np.stack([xx, yy, zz], axis=-1).reshape(-1, 3)
    d2 = ((nodes[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    exact = d2 == 0
    with np.errstate(divide="ignore"):
        w = 1.0 / d2 ** (power / 2.0)
    w[~np.isfinite(w)] = 0.0
    hit = exact.any(axis=1)
    w[hit] = exact[hit].astype(float)
    w /= w.sum(axis=1, keepdims=True)
    out = w @ vals.reshape(len(pts), -1)
    shape = (nz, ny, nx, 3) if vals.ndim == 2 else (nz, ny, nx)
    return FieldGrid(tuple(map(float, origin)), tuple(map(float, spacing)), (nx, ny, nz),
                     out.reshape(shape))
