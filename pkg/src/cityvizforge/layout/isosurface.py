"""Marching-cubes isosurface extraction on a scalar FieldGrid."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import LayoutError
from ..fields import FieldGrid
from ._mc_tables import EDGES, TRIANGLES

# corner k of a cell sits at lattice offset CORNERS[k] = (di, dj, dk)
CORNERS = ((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
           (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1))


@dataclass
class Mesh:
    vertices: list = field(default_factory=list)   # [(x, y, z)]
    triangles: list = field(default_factory=list)  # [(a, b, c)]
    # lattice edge (node index pair) each vertex was interpolated on; diagnostic only
    vertex_edges: Optional[list] = field(default=None, repr=False, compare=False)

    def area(self) -> float:
        if not self.triangles:
            return 0.0
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=int)
        cross = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        return float(0.5 * np.linalg.norm(cross, axis=1).sum())

    def bounds(self):
        v = np.asarray(self.vertices, dtype=float)
        return v.min(axis=0), v.max(axis=0)


def _cube_indices(values: np.ndarray, level: float) -> np.ndarray:
    inside = values <= level  # corner on the level counts as inside
    idx = np.zeros(tuple(n - 1 for n in values.shape), dtype=np.int32)
    for bit, (di, dj, dk) in enumerate(CORNERS):
        sub = inside[dk:dk + idx.shape[0], dj:dj + idx.shape[1], di:di + idx.shape[2]]
        idx |= sub.astype(np.int32) << bit
    return idx


def extract_level(grid: FieldGrid, level: float) -> Mesh:
    nx, ny, nz = grid.dims
    vals = grid.values
    ox, oy, oz = grid.origin
    sx, sy, sz = grid.spacing
    mesh = Mesh(vertex_edges=[])
    welded: dict = {}

    def node_id(i, j, k):
        return (k * ny + j) * nx + i

    def vertex(cell, e):
        i, j, k = cell
        a, b = EDGES[e]
        pa = (i + CORNERS[a][0], j + CORNERS[a][1], k + CORNERS[a][2])
        pb = (i + CORNERS[b][0], j + CORNERS[b][1], k + CORNERS[b][2])
        va, vb = float(vals[pa[2], pa[1], pa[0]]), float(vals[pb[2], pb[1], pb[0]])
        t = (level - va) / (vb - va)
        if t <= 0.0:
            key, t = ("n", node_id(*pa)), 0.0
        elif t >= 1.0:
            key, t = ("n", node_id(*pb)), 1.0
        else:
            key = ("e",) + tuple(sorted((node_id(*pa), node_id(*pb))))
        if key in welded:
            return welded[key]
        p = tuple(float(c) for c in (
            ox + (pa[0] + t * (pb[0] - pa[0])) * sx,
            oy + (pa[1] + t * (pb[1] - pa[1])) * sy,
            oz + (pa[2] + t * (pb[2] - pa[2])) * sz,
        ))
        welded[key] = len(mesh.vertices)
        mesh.vertices.append(p)
        mesh.vertex_edges.append((pa, pb))
        return welded[key]

    cubes = _cube_indices(vals, level)
    active = np.argwhere((cubes != 0) & (cubes != 255))  # rows of (k, j, i)
    for k, j, i in active:
        tris = TRIANGLES[cubes[k, j, i]]
        for n in range(0, len(tris), 3):
            a, b, c = (vertex((int(i), int(j), int(k)), e) for e in tris[n:n + 3])
            if a == b or b == c or a == c:
                continue
            va, vb, vc = (np.array(mesh.vertices[x]) for x in (a, b, c))
            if not np.any(np.cross(vb - va, vc - va)):
                continue
            mesh.triangles.append((a, b, c))
    _drop_unused(mesh)
    return mesh


def _drop_unused(mesh: Mesh):
    used = sorted({v for t in mesh.triangles for v in t})
    if len(used) == len(mesh.vertices):
        return
    remap = {old: new for new, old in enumerate(used)}
    mesh.vertices = [mesh.vertices[v] for v in used]
    mesh.vertex_edges = [mesh.vertex_edges[v] for v in used]
    mesh.triangles = [tuple(remap[v] for v in t) for t in mesh.triangles]


def compute_isosurface(grid: FieldGrid, levels: Sequence[float]) -> list[tuple[float, Mesh]]:
    """One mesh per level, in the order given; empty meshes are valid."""
    if grid.is_vector:
        raise LayoutError("isosurface needs a scalar field, got a vector field")
    if min(grid.dims) < 2:
        raise LayoutError(f"isosurface needs at least 2 nodes per axis, got dims {grid.dims}")
    out = []
    for level in levels:
        level = float(level)
        if not np.isfinite(level):
            raise LayoutError(f"non-finite iso level {level}")
        out.append((level, extract_level(grid, level)))
    return out
