"""Region-to-point choice functions and spatial-relation solvers."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..citygml import Surface
from ..errors import LayoutError


def _as_ring(region) -> np.ndarray:
    if isinstance(region, Surface):
        rings = region.rings
        if len(rings) != 1:
            raise LayoutError("region_to_point expects a single ring; use surfaces_centroid")
        region = rings[0]
    pts = np.asarray(region, dtype=float).reshape(-1, 3)
    if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    return pts


def newell_normal(ring) -> np.ndarray:
    pts = np.asarray(ring, dtype=float)
    nxt = np.roll(pts, -1, axis=0)
    return np.array([
        np.sum((pts[:, 1] - nxt[:, 1]) * (pts[:, 2] + nxt[:, 2])),
        np.sum((pts[:, 2] - nxt[:, 2]) * (pts[:, 0] + nxt[:, 0])),
        np.sum((pts[:, 0] - nxt[:, 0]) * (pts[:, 1] + nxt[:, 1])),
    ])


def ring_moments(ring) -> tuple[float, np.ndarray]:
    """Area and area-weighted centroid sum (area * centroid) of a planar ring.

    Fan triangulation from the first vertex; triangle areas are signed
    along the ring normal so non-convex rings come out right.
    """
    pts = _as_ring(ring)
    if len(pts) < 3:
        return 0.0, np.zeros(3)
    n = newell_normal(pts)
    norm = np.linalg.norm(n)
    if norm == 0:
        return 0.0, np.zeros(3)
    n = n / norm
    v0 = pts[0]
    area = 0.0
    moment = np.zeros(3)
    for a, b in zip(pts[1:-1], pts[2:]):
        tri = 0.5 * float(np.dot(np.cross(a - v0, b - v0), n))
        area += tri
        moment += tri * (v0 + a + b) / 3.0
    return area, moment


def region_to_point(region) -> tuple[float, float, float]:
    """Area-weighted centroid of a polygon; the vertex mean when the area vanishes."""
    pts = _as_ring(region)
    if len(pts) == 0:
        raise LayoutError("empty region")
    area, moment = ring_moments(pts)
    if abs(area) <= 1e-15 * max(1.0, float(np.abs(pts).max()) ** 2):
        c = pts.mean(axis=0)
    else:
        c = moment / area
    return tuple(float(v) for v in c)


def surfaces_centroid(surfaces: Sequence[Surface]) -> tuple[float, float, float]:
    """Combined area-weighted centroid over every ring of the given surfaces."""
    rings = [r for s in surfaces for r in s.rings]
    if not rings:
        raise LayoutError("no rings to take a centroid of")
    total = 0.0
    moment = np.zeros(3)
    for r in rings:
        a, m = ring_moments(r)
        total += a
        moment += m
    if abs(total) <= 1e-15:
        return tuple(float(v) for v in np.mean([p for r in rings for p in r], axis=0))
    return tuple(float(v) for v in moment / total)


def _name(key) -> str:
    return str(key) if key is not None else "object"


def solve_above(surfaces: Sequence[Surface], clearance: float = 2.0, name=None):
    """Bottom-centre point above a building.

    x, y: centroid of the ground surfaces; z: highest roof vertex plus ``clearance``.
    """
    ground = [s for s in surfaces if s.role == "ground"]
    roof = [s for s in surfaces if s.role == "roof"]
    if not roof:
        raise LayoutError(f"above: {_name(name)} has no roof surfaces")
    if not ground:
        raise LayoutError(f"above: {_name(name)} has no ground surfaces")
    cx, cy, _ = surfaces_centroid(ground)
    top = max(p[2] for s in roof for r in s.rings for p in r)
    return (cx, cy, top + clearance)


def _frame_axis_angle(normal) -> tuple[float, float, float, float]:
    """Rotation taking local +Z to ``normal`` (horizontal) and local +Y to world +Z."""
    z = np.asarray(normal, dtype=float)
    y = np.array([0.0, 0.0, 1.0])
    x = np.cross(y, z)
    m = np.column_stack([x, y, z])
    return matrix_to_axis_angle(m)


def matrix_to_axis_angle(m) -> tuple[float, float, float, float]:
    angle = math.acos(max(-1.0, min(1.0, (np.trace(m) - 1.0) / 2.0)))
    if angle < 1e-12:
        return (0.0, 0.0, 1.0, 0.0)
    if math.pi - angle < 1e-6:
        # axis from the symmetric part when the angle is near pi
        b = (m + np.eye(3)) / 2.0
        i = int(np.argmax(np.diag(b)))
        axis = b[:, i] / math.sqrt(b[i, i])
    else:
        axis = np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
        axis = axis / np.linalg.norm(axis)
    return (float(axis[0]), float(axis[1]), float(axis[2]), float(angle))


def axis_angle_to_matrix(axis_angle) -> np.ndarray:
    x, y, z, a = axis_angle
    k = np.array([x, y, z], dtype=float)
    n = np.linalg.norm(k)
    if n == 0 or a == 0:
        return np.eye(3)
    k /= n
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(a) * K + (1 - math.cos(a)) * K @ K


def solve_near(surfaces: Sequence[Surface], footprint=(4.0, 2.0), distance: float = 2.0, name=None):
    """Point in front of the largest wall and an orientation facing back to it.

    Returns ``(point, normal, axis_angle)``; ``point`` is the footprint centre.
    """
    walls = [s for s in surfaces if s.role == "wall"]
    if not walls:
        raise LayoutError(f"near: {_name(name)} has no wall surfaces")
    best, best_area = None, -1.0
    for s in walls:
        area = sum(abs(ring_moments(r)[0]) for r in s.rings)
        if area > best_area:
            best, best_area = s, area
    c = np.array(surfaces_centroid([best]))
    n = newell_normal(best.rings[0])
    h = np.array([n[0], n[1], 0.0])
    if np.linalg.norm(h) < 1e-12:
        raise LayoutError(f"near: largest wall of {_name(name)} is horizontal")
    h /= np.linalg.norm(h)
    all_pts = np.array([p for s in surfaces for r in s.rings for p in r])
    centre = all_pts.mean(axis=0)
    if np.dot(h[:2], (c - centre)[:2]) < 0:
        h = -h
    p = c + distance * h
    ground = [s for s in surfaces if s.role == "ground"]
    ground_z = min(q[2] for s in (ground or surfaces) for r in s.rings for q in r)
    half = footprint[1] / 2.0
    if p[2] - half < ground_z:
        p[2] = ground_z + half
    normal = -h
    return tuple(float(v) for v in p), tuple(float(v) for v in normal), _frame_axis_angle(normal)


def solve_inside(surfaces: Sequence[Surface], name=None):
    """Mean of the distinct surface vertices of an object."""
    pts = list(dict.fromkeys(p for s in surfaces for r in s.rings for p in r))
    if not pts:
        raise LayoutError(f"inside: {_name(name)} has no geometry")
    return tuple(float(v) for v in np.mean(np.array(pts), axis=0))


def solve_front_of(surfaces, name=None):
    raise LayoutError("frontOf has no layout rule: the relation is in the vocabulary but undefined "
                      "geometrically; register a solver to use it")


def relation_endpoints(obj1: Sequence[Surface], obj2: Sequence[Surface]):
    """One point per related object: the area-weighted centroid of its surfaces."""
    if not obj1 or not obj2:
        raise LayoutError("relation endpoint object has no geometry")
    return surfaces_centroid(obj1), surfaces_centroid(obj2)
