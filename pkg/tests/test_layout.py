import math

import numpy as np
import pytest

from cityvizforge.citygml import Surface, extract_geometry_index, parse_citygml
from cityvizforge.errors import LayoutError
from cityvizforge.fields import FieldGrid
from cityvizforge.fixtures import city_xml, CityConfig
from cityvizforge.layout.geometry import (axis_angle_to_matrix, region_to_point, relation_endpoints,
                                          solve_above, solve_front_of, solve_inside, solve_near,
                                          surfaces_centroid)
from cityvizforge.layout.isosurface import compute_isosurface
from cityvizforge.layout.streamlines import integrate_streamlines
from cityvizforge.rdf import V

from conftest import radial_grid, vector_grid
from oracles import combined_centroid, edge_use_counts, fan_area_centroid

def box(x0, y0, x1, y1, h, roof=None, order=("east", "south", "north", "west")):
    walls = {
        "south": ((x0, y0, 0), (x1, y0, 0), (x1, y0, h), (x0, y0, h)),
        "east": ((x1, y0, 0), (x1, y1, 0), (x1, y1, h), (x1, y0, h)),
        "north": ((x1, y1, 0), (x0, y1, 0), (x0, y1, h), (x1, y1, h)),
        "west": ((x0, y1, 0), (x0, y0, 0), (x0, y0, h), (x0, y1, h)),
    }
    out = [Surface("ground", (((x0, y0, 0), (x0, y1, 0), (x1, y1, 0), (x1, y0, 0)),))]
    out += [Surface("wall", (walls[k],)) for k in order]
    out.append(Surface("roof", (roof or ((x0, y0, h), (x1, y0, h), (x1, y1, h), (x0, y1, h)),)))
    return out


# ---------------------------------------------------------------- region -> point

def test_unit_square_centroid():
    assert region_to_point(((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0))) == pytest.approx((0.5, 0.5, 0))


def test_single_point_region():
    assert region_to_point(((3, 4, 5),)) == (3, 4, 5)


def test_l_shape_centroid():
    ring = ((0, 0, 0), (2, 0, 0), (2, 1, 0), (1, 1, 0), (1, 2, 0), (0, 2, 0))
    got = region_to_point(ring)
    assert got == pytest.approx((2.5 / 3, 2.5 / 3, 0), abs=1e-12)
    assert got == pytest.approx(fan_area_centroid(ring)[1], abs=1e-12)


def test_tilted_quad_centroid_matches_fan_oracle():
    ring = ((0, 0, 0), (3, 0, 1), (4, 2, 2.5), (0.5, 3, 1.2))
    # make it planar: project onto the plane through the first three points
    p0, p1, p2 = (np.array(p, float) for p in ring[:3])
    n = np.cross(p1 - p0, p2 - p0)
    n /= np.linalg.norm(n)
    q = np.array(ring[3], float)
    q = tuple(q - np.dot(q - p0, n) * n)
    ring = ring[:3] + (q,)
    got = surfaces_centroid([Surface("window", (ring,))])
    assert got == pytest.approx(fan_area_centroid(ring)[1], abs=1e-9)


# ---------------------------------------------------------------- above

def test_above_flat_roof():
    assert solve_above(box(0, 0, 4, 4, 10), 2.0) == pytest.approx((2, 2, 12), abs=1e-12)


def test_above_gabled_roof():
    surfaces = box(0, 0, 4, 4, 10)[:-1] + [
        Surface("roof", (((0, 0, 10), (4, 0, 10), (4, 2, 12.5), (0, 2, 12.5)),)),
        Surface("roof", (((4, 4, 10), (0, 4, 10), (0, 2, 12.5), (4, 2, 12.5)),)),
    ]
    roof_top = max(p[2] for s in surfaces if s.role == "roof" for r in s.rings for p in r)
    x, y, z = solve_above(surfaces, 2.0)
    assert (x, y) == pytest.approx((2, 2), abs=1e-12)
    assert z == roof_top + 2.0 == 14.5


def test_above_without_roof_or_ground():
    with pytest.raises(LayoutError, match="roof"):
        solve_above(box(0, 0, 4, 4, 10)[:-1], name="b9")
    with pytest.raises(LayoutError, match="ground"):
        solve_above(box(0, 0, 4, 4, 10)[1:], name="b9")


def test_above_on_generated_buildings():
    xml, infos = city_xml(CityConfig(n_buildings=9, seed=11))
    geom = extract_geometry_index(parse_citygml(xml))
    for info in infos:
        surfaces = geom.entries[V(info.gml_id)]
        x, y, z = solve_above(surfaces, 2.0)
        ground = [r for s in surfaces if s.role == "ground" for r in s.rings]
        assert (x, y) == pytest.approx(combined_centroid(ground)[:2], abs=1e-9)
        roof_top = max(p[2] for s in surfaces if s.role == "roof" for r in s.rings for p in r)
        assert z == roof_top + 2.0
        assert z == pytest.approx(info.ridge + 2.0, abs=1e-3)  # coordinates are written rounded
        x0, y0, x1, y1 = info.footprint
        assert x0 <= x <= x1 and y0 <= y <= y1


# ---------------------------------------------------------------- near / inside / frontOf

def test_near_box_facing_plus_x():
    surfaces = box(2, 0, 4, 4, 10)
    point, normal, orientation = solve_near(surfaces, (4, 2), 2.0)
    assert point == pytest.approx((6, 2, 5), abs=1e-12)
    assert normal == pytest.approx((-1, 0, 0), abs=1e-12)
    # the panel's local +Z (its face normal) is the returned normal, local +Y is up
    m = axis_angle_to_matrix(orientation)
    assert m @ np.array([0, 0, 1.0]) == pytest.approx(normal, abs=1e-12)
    assert m @ np.array([0, 1.0, 0]) == pytest.approx((0, 0, 1), abs=1e-12)


def test_near_distance_zero_is_wall_centroid():
    point, _, _ = solve_near(box(2, 0, 4, 4, 10), (4, 2), 0.0)
    assert point == pytest.approx((4, 2, 5), abs=1e-12)


def test_near_clamps_above_ground():
    point, _, _ = solve_near(box(2, 0, 4, 4, 1), (4, 3), 2.0)
    assert point[2] == pytest.approx(1.5)


def test_near_without_walls():
    with pytest.raises(LayoutError, match="wall"):
        solve_near([s for s in box(0, 0, 1, 1, 1) if s.role != "wall"])


def test_inside_unit_box():
    assert solve_inside(box(0, 0, 1, 1, 1)) == pytest.approx((0.5, 0.5, 0.5))
    single = Surface("wall", (((0, 0, 0), (2, 0, 0), (2, 0, 2)),))
    assert solve_inside([single]) == pytest.approx((4 / 3, 0, 2 / 3))


def test_inside_within_bounding_box_for_city():
    xml, infos = city_xml(CityConfig(n_buildings=100, seed=7))
    geom = extract_geometry_index(parse_citygml(xml))
    for info in infos:
        surfaces = geom.entries[V(info.gml_id)]
        pts = np.array([p for s in surfaces for r in s.rings for p in r])
        c = np.array(solve_inside(surfaces))
        assert np.all(c >= pts.min(axis=0)) and np.all(c <= pts.max(axis=0))


def test_front_of_is_unimplemented():
    with pytest.raises(LayoutError, match="frontOf"):
        solve_front_of(box(0, 0, 1, 1, 1))


def test_relation_endpoints_window_centres():
    w1 = [Surface("window", (((-1, 0, 2), (1, 0, 2), (1, 0, 4), (-1, 0, 4)),))]
    w2 = [Surface("window", (((9, 0, 2.5), (11, 0, 2.5), (11, 0, 3.5), (9, 0, 3.5)),))]
    a, b = relation_endpoints(w1, w2)
    assert a == pytest.approx((0, 0, 3), abs=1e-12)
    assert b == pytest.approx((10, 0, 3), abs=1e-12)
    with pytest.raises(LayoutError):
        relation_endpoints([], w2)


# ---------------------------------------------------------------- isosurface

def test_constant_field_gives_empty_mesh():
    grid = FieldGrid((0, 0, 0), (1, 1, 1), (3, 3, 3), np.full((3, 3, 3), 5.0))
    ((level, mesh),) = compute_isosurface(grid, [5])
    assert level == 5 and mesh.triangles == [] and mesh.vertices == []


def _interp_residual(grid, mesh, level):
    worst = 0.0
    for v, (pa, pb) in zip(mesh.vertices, mesh.vertex_edges):
        fa, fb = grid.at(*pa), grid.at(*pb)
        if pa == pb:
            worst = max(worst, abs(fa - level))
            continue
        xa, xb = np.array(grid.node(*pa)), np.array(grid.node(*pb))
        t = np.linalg.norm(np.array(v) - xa) / np.linalg.norm(xb - xa)
        worst = max(worst, abs(fa + t * (fb - fa) - level))
        assert min(fa, fb) <= level <= max(fa, fb)
    return worst


def test_sphere_isosurface_properties():
    grid = radial_grid()
    ((_, mesh),) = compute_isosurface(grid, [1.0])
    assert _interp_residual(grid, mesh, 1.0) <= 1e-9
    counts = edge_use_counts(mesh.triangles)
    assert set(counts.values()) == {2}
    assert abs(mesh.area() - 4 * math.pi) / (4 * math.pi) <= 0.05


def test_two_levels_nested():
    (l1, m1), (l2, m2) = compute_isosurface(radial_grid(), [1, 2])
    lo1, hi1 = m1.bounds()
    lo2, hi2 = m2.bounds()
    assert np.all(lo2 < lo1) and np.all(hi1 < hi2)


def test_isosurface_rejects_vector_field():
    with pytest.raises(LayoutError):
        compute_isosurface(vector_grid(lambda x, y, z: (x, y, z), n=3), [1])


# ---------------------------------------------------------------- streamlines

def test_uniform_field_is_straight():
    grid = vector_grid(lambda x, y, z: (np.ones_like(x), 0 * y, 0 * z), n=11, lo=-1, hi=6)
    (line,) = integrate_streamlines(grid, [(0, 0, 0)], 0.1, 5.0)
    pts = np.array(line)
    assert np.abs(pts[:, 1:]).max() <= 1e-12
    assert pts[-1, 0] == pytest.approx(5.0, abs=1e-9)
    assert len(line) == 51


def test_rotation_one_revolution_radius_drift():
    grid = vector_grid(lambda x, y, z: (-y, x, 0 * z))
    (line,) = integrate_streamlines(grid, [(1, 0, 0)], 0.01, 2 * math.pi)
    pts = np.array(line)
    drift = np.abs(np.hypot(pts[:, 0], pts[:, 1]) - 1).max()
    assert drift <= 1e-6
    assert pts[-1] == pytest.approx((1, 0, 0), abs=1e-6)


def test_zero_field_returns_seed_only():
    grid = vector_grid(lambda x, y, z: (0 * x, 0 * y, 0 * z), n=5)
    assert integrate_streamlines(grid, [(0.3, 0.2, 0)], 0.1, 5) == [[(0.3, 0.2, 0.0)]]


def test_streamline_stays_in_grid():
    grid = vector_grid(lambda x, y, z: (np.ones_like(x), 0.5 * np.ones_like(y), 0 * z), n=9)
    (line,) = integrate_streamlines(grid, [(0, 0, 0)], 0.3, 100)
    assert all(grid.contains(p) for p in line)
    assert len(line) > 1


def test_seed_outside_grid():
    grid = vector_grid(lambda x, y, z: (x, y, z), n=5)
    with pytest.raises(LayoutError, match="outside"):
        integrate_streamlines(grid, [(5, 0, 0)], 0.1, 1)
