"""Acceptance criteria 1-9. Each test records one PASS/FAIL line in the terminal summary."""
import math
import random
import time
from collections import Counter

import numpy as np
import pytest

from cityvizforge import pipeline
from cityvizforge.citygml import extract_geometry_index, parse_citygml
from cityvizforge.emit import reconstruct_abstract, vocabulary_subgraph
from cityvizforge.fixtures import box_building_xml
from cityvizforge.ingest import ingest_point_data
from cityvizforge.layout.geometry import relation_endpoints, solve_above
from cityvizforge.layout.isosurface import compute_isosurface
from cityvizforge.layout.scene import read_scene
from cityvizforge.layout.streamlines import integrate_streamlines
from cityvizforge.rdf import TYPE, Blank, Graph, Literal, V, isomorphic, parse_graph
from cityvizforge.store import GraphView, Store, Var, match_bgp
from cityvizforge.technique import apply_technique
from cityvizforge.techniques import load_builtin

from conftest import radial_grid, run_stages, vector_grid
from oracles import brute_force_bgp, combined_centroid, edge_use_counts, fan_area_centroid


def fresh_caches():
    pipeline._model.cache_clear()
    pipeline._geometry.cache_clear()


def test_criterion_1_pedestrian_markup(small_city, criterion):
    fresh_caches()
    t0 = time.perf_counter()
    html = pipeline.run_pipeline(pipeline.load_config(small_city / "pedestrians.cfg"))
    elapsed = time.perf_counter() - t0
    pieces = ['rotation="1 0 0 1.5708"', 'translation="-13 25 21"', 'height="42"', 'diffusecolor="0 0 1"']
    found = '<transform rotation="1 0 0 1.5708" translation="-13 25 21">' in html and all(p in html for p in pieces)
    ok = found and elapsed < 1.0
    criterion(1, ok, f"cone markup verbatim={found}, runtime {elapsed:.3f} s (< 1 s)")
    assert ok


def test_criterion_2_sphere_radius(criterion):
    data = ingest_point_data([(5.67, 4.5, 44, 1.5)], ":PollutantConcentration")
    store = Store()
    store.add_graph("model", Graph())
    store.add_graph("DataGraph", data)
    g = apply_technique(store.freeze(), load_builtin("pollutant-spheres")).graph
    (sphere,) = g.subjects(TYPE, V("Sphere"))
    err = abs(g.value(sphere, V("radius")).value - 0.0567)
    ok = err <= 1e-12
    criterion(2, ok, f"|radius - 0.0567| = {err:.2e} (<= 1e-12)")
    assert ok


def _random_case(rng):
    iris = [V(f"n{i}") for i in range(6)]
    preds = [V(f"p{i}") for i in range(3)]
    lits = [Literal(float(i)) for i in range(3)] + [Literal("s")]
    g = Graph()
    for _ in range(rng.randint(0, 50)):
        g.add((rng.choice(iris), rng.choice(preds), rng.choice(iris + lits)))
    terms = [Var("a"), Var("b"), Var("c"), Blank("h")] + iris[:2]
    pattern = [(rng.choice(terms), rng.choice(preds + [Var("p")]), rng.choice(terms + lits[:1]))
               for _ in range(rng.randint(1, 3))]
    return g, pattern


def test_criterion_3_bgp_oracle(criterion):
    rng = random.Random(3)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        g, pattern = _random_case(rng)
        assert len(g) <= 50 and len(pattern) <= 3
        if Counter(frozenset(b.items()) for b in match_bgp(g, pattern)) != brute_force_bgp(g, pattern):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30
    criterion(3, ok, f"200 random cases, {mismatches} mismatches, {elapsed:.2f} s (< 30 s)")
    assert ok


def test_criterion_4_construct_cardinality(criterion):
    results = []
    for n in (0, 1, 5, 100):
        rows = [(float(i + 1), i, 0.5 * i, 0) for i in range(n)]
        store = Store()
        store.add_graph("model", Graph())
        store.add_graph("DataGraph", ingest_point_data(rows, ":PollutantConcentration"))
        spheres = apply_technique(store.freeze(), load_builtin("pollutant-spheres")).graph.subjects(TYPE, V("Sphere"))
        individual = len(spheres) == len(set(spheres)) == n and all(isinstance(s, Blank) for s in spheres)
        store = Store()
        store.add_graph("model", Graph())
        store.add_graph("DataGraph", ingest_point_data(rows, ":FieldSample"))
        g = apply_technique(store.freeze(), load_builtin("global-isosurface")).graph
        nodes = g.subjects(TYPE, V("IsoSurface"))
        links = len(set(g.objects(nodes[0], V("inputData")))) if nodes else 0
        global_ok = (len(nodes) == 1 and links == n) if n else not nodes
        results.append((n, individual, global_ok))
    ok = all(i and gl for _, i, gl in results)
    criterion(4, ok, "n in {0,1,5,100}: " + ", ".join(f"n={n} individual={i} global={g}" for n, i, g in results))
    assert ok


def test_criterion_5_layout_invariants(small_city, criterion):
    geom = extract_geometry_index(parse_citygml(box_building_xml()))
    surfaces = geom.entries[V("b1")]
    above = solve_above(surfaces, 2.0)
    roof_top = max(p[2] for s in surfaces if s.role == "roof" for r in s.rings for p in r)
    above_ok = above[2] == roof_top + 2.0 and above[:2] == pytest.approx((2.0, 2.0), abs=1e-12)

    city = extract_geometry_index(parse_citygml((small_city / "city.gml").read_text()))
    worst = 0.0
    windows = [k for k, parts in city.parts.items() if parts and parts[0].role == "window"]
    for a, b in zip(windows[::2], windows[1::2]):
        pa, pb = relation_endpoints(city.parts[a], city.parts[b])
        for got, key in ((pa, a), (pb, b)):
            want = combined_centroid([r for s in city.parts[key] for r in s.rings])
            worst = max(worst, float(np.abs(np.array(got) - np.array(want)).max()))
    ok = above_ok and worst <= 1e-9 and len(windows) > 10
    criterion(5, ok, f"above={tuple(round(c, 12) for c in above)} (2, 2, 12); "
                     f"endpoint error {worst:.1e} over {len(windows)} windows (<= 1e-9)")
    assert ok


def test_criterion_6_isosurface(criterion):
    t0 = time.perf_counter()
    grid = radial_grid(n=17)
    ((_, mesh),) = compute_isosurface(grid, [1.0])
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for v, (pa, pb) in zip(mesh.vertices, mesh.vertex_edges):
        fa, fb = grid.at(*pa), grid.at(*pb)
        if pa == pb:
            worst = max(worst, abs(fa - 1.0))
            continue
        xa, xb = np.array(grid.node(*pa)), np.array(grid.node(*pb))
        t = np.linalg.norm(np.array(v) - xa) / np.linalg.norm(xb - xa)
        worst = max(worst, abs(fa + t * (fb - fa) - 1.0))
    uses = set(edge_use_counts(mesh.triangles).values())
    rel = abs(mesh.area() - 4 * math.pi) / (4 * math.pi)
    ok = worst <= 1e-9 and uses == {2} and rel <= 0.05 and elapsed < 5
    criterion(6, ok, f"interp residual {worst:.1e}, edge uses {sorted(uses)}, area error {100 * rel:.2f}%, "
                     f"{len(mesh.triangles)} triangles, {elapsed:.2f} s (< 5 s)")
    assert ok


def test_criterion_7_streamlines(criterion):
    rot = vector_grid(lambda x, y, z: (-y, x, 0 * z))
    (circle,) = integrate_streamlines(rot, [(1, 0, 0)], 0.01, 2 * math.pi)
    pts = np.array(circle)
    drift = float(np.abs(np.hypot(pts[:, 0], pts[:, 1]) - 1).max())
    uni = vector_grid(lambda x, y, z: (np.ones_like(x), 0 * y, 0 * z), n=11, lo=-1, hi=6)
    (straight,) = integrate_streamlines(uni, [(0, 0, 0)], 0.1, 5.0)
    dev = float(np.abs(np.array(straight)[:, 1:]).max())
    ok = drift <= 1e-6 and dev <= 1e-12
    criterion(7, ok, f"rotation drift {drift:.1e} (<= 1e-6), uniform deviation {dev:.1e} (<= 1e-12)")
    assert ok


BUILTIN_CONFIGS = {"pedestrian-cones": "pedestrians", "pollutant-spheres": "pollutant",
                   "panel-near-object": "panels", "line-between-objects": "intervisibility",
                   "global-isosurface": "isosurface", "flowlines": "flowlines"}


def test_criterion_8_abstraction_principle(small_city, criterion):
    outcome = {}
    for tech, cfg in BUILTIN_CONFIGS.items():
        model, (run,) = run_stages(small_city / f"{cfg}.cfg")
        assert run["spec"].name == tech
        context = GraphView([parse_graph(run["data"]), parse_graph(model)])
        expected = vocabulary_subgraph(parse_graph(run["abstract"]), context)
        got = reconstruct_abstract(read_scene(run["scene"]))
        outcome[tech] = len(expected) > 0 and isomorphic(got, expected)
    ok = all(outcome.values())
    criterion(8, ok, ", ".join(f"{k}={'iso' if v else 'NOT iso'}" for k, v in outcome.items()))
    assert ok


def test_criterion_9_scale(big_city, criterion):
    fresh_caches()
    triples = len(parse_graph(pipeline.stage_convert((big_city / "city.gml").read_text())))
    timings = {}
    for cfg in ("pedestrians", "combined", "isosurface"):
        fresh_caches()
        t0 = time.perf_counter()
        pipeline.run_pipeline(pipeline.load_config(big_city / f"{cfg}.cfg"))
        timings[cfg] = time.perf_counter() - t0
    ok = 4e4 <= triples <= 1.2e5 and max(timings.values()) < 10
    criterion(9, ok, f"100 buildings -> {triples} triples (4e4..1.2e5); pipeline "
                     + ", ".join(f"{k} {v:.2f} s" for k, v in timings.items()) + " (< 10 s)")
    assert ok
