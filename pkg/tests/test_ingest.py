import numpy as np
import pytest

from cityvizforge.errors import IngestError
from cityvizforge.fields import FieldGrid, read_grid_file, resample_idw, write_grid_file, grid_from_samples
from cityvizforge.ingest import (data_nodes, ingest_grid_field, ingest_object_data, ingest_point_data,
                                 ingest_region_data, ingest_relation_data, load_dictionary,
                                 read_csv_table, read_regions, schema_kind)
from cityvizforge.rdf import TYPE, Graph, Literal, V, parse_graph, serialize_graph, isomorphic


def test_pollutant_row_matches_data1_block():
    g = ingest_point_data([(5.67, 4.5, 44, 1.5)], ":PollutantConcentration")
    expected = Graph([
        (V("data1"), TYPE, V("PollutantConcentration")), (V("data1"), V("value"), Literal(5.67)),
        (V("data1"), V("location"), V("loc1")), (V("loc1"), TYPE, V("Point")),
        (V("loc1"), V("xcoord"), Literal(4.5)), (V("loc1"), V("ycoord"), Literal(44)),
        (V("loc1"), V("zcoord"), Literal(1.5)),
    ])
    assert set(g) == set(expected)


def test_pedestrian_row_matches_pednum_block():
    rows = read_csv_table("value,x,y,z\n42,-13,25,0\n")
    g = ingest_point_data(rows, ":PedestrianCounting", prefix="pednum", coords="xloc")
    assert g.value(V("pednum1"), V("value")) == Literal(42)
    assert g.value(V("pednum1"), V("location")) == V("loc1")
    assert [g.value(V("loc1"), V(p)).value for p in ("xloc", "yloc", "zloc")] == [-13, 25, 0]


def test_empty_tables_give_empty_graphs():
    assert len(ingest_point_data(read_csv_table("value,x,y,z\n"), ":T")) == 0
    assert len(ingest_object_data([], ":T", load_dictionary([]))) == 0
    assert len(ingest_relation_data([], ":T", load_dictionary([]))) == 0
    assert len(load_dictionary(read_csv_table(""))) == 0


def test_point_row_errors():
    with pytest.raises(IngestError, match="row 1.*'y'"):
        ingest_point_data([{"value": 1, "x": 0, "z": 0}], ":T")
    with pytest.raises(IngestError, match="non-numeric x"):
        ingest_point_data([(1, "east", 0, 0)], ":T")


def test_object_data_shape():
    d = load_dictionary([("bldg-7", "co2")])
    g = ingest_object_data([("historic facade, built 1820", "bldg-7")], ":RichText", d)
    assert g.value(V("data1"), V("about")) == V("co2")
    assert g.value(V("data1"), V("value")) == Literal("historic facade, built 1820")


def test_object_ref_missing_names_ref():
    with pytest.raises(IngestError, match="'missing'"):
        ingest_object_data([("x", "missing")], ":RichText", load_dictionary([("a", "b")]))


def test_object_ref_must_exist_in_model():
    model = Graph([(V("co2"), TYPE, V("X"))])
    d = load_dictionary([("a", "co2"), ("b", "gone")])
    assert len(ingest_object_data([("x", "a")], ":T", d, model=model)) == 3
    with pytest.raises(IngestError, match="not in the city model"):
        ingest_object_data([("x", "b")], ":T", d, model=model)


def test_relation_shape_and_distinctness():
    d = load_dictionary([("w1", "win1"), ("w2", "win2")])
    assert len(d) == 2
    g = ingest_relation_data([(0.3, "w1", "w2")], ":IntervisibilityRate", d)
    assert g.value(V("data1"), V("arg1")) == V("win1")
    assert g.value(V("data1"), V("arg2")) == V("win2")
    assert g.value(V("data1"), V("value")) == Literal(0.3)
    with pytest.raises(IngestError, match="itself"):
        ingest_relation_data([(0.3, "w1", "w1")], ":T", d)


def test_duplicate_dictionary_ref():
    with pytest.raises(IngestError, match="duplicate"):
        load_dictionary([("w1", "a"), ("w1", "b")])


def test_region_data():
    regions = read_regions('region,poslist\nsq,"0 0 0 2 0 0 2 2 0 0 2 0"\n')
    g = ingest_region_data([(55, "sq")], ":Noise", regions)
    loc = g.value(V("data1"), V("location"))
    assert g.value(loc, TYPE) == V("Surface")
    with pytest.raises(IngestError, match="unknown region"):
        ingest_region_data([(55, "other")], ":Noise", regions)


def test_schema_kind_rederived():
    d = load_dictionary([("w1", "win1"), ("w2", "win2")])
    assert schema_kind(ingest_point_data([(1, 0, 0, 0)], ":T")) == "spatial"
    assert schema_kind(ingest_object_data([("t", "w1")], ":T", d)) == "object"
    assert schema_kind(ingest_relation_data([(1, "w1", "w2")], ":T", d)) == "relation"
    assert schema_kind(Graph()) is None
    mixed = Graph([(V("d"), V("about"), V("win1")), (V("d"), V("arg1"), V("win2"))])
    with pytest.raises(IngestError):
        schema_kind(mixed)


def test_rows_map_to_distinct_nodes():
    rows = [(i, i, 0, 0) for i in range(9)]
    assert len(data_nodes(ingest_point_data(rows, ":T"))) == 9


# ---------------------------------------------------------------- grids

GRID8 = "origin= 0 0 0\nspacing= 1 1 1\ndims= 2 2 2\n0 1 2 3 4 5 6 7\n"


def test_grid_file_small():
    graph, grid = ingest_grid_field(GRID8)
    assert len(data_nodes(graph)) == 8
    assert grid.at(1, 1, 1) == 7
    # trilinear value at the cell centre is the mean of the corners
    assert grid.sample((0.5, 0.5, 0.5)) == pytest.approx(np.mean(range(8)), abs=1e-12)


def test_grid_count_mismatch():
    with pytest.raises(IngestError, match="8 scalar"):
        read_grid_file("origin= 0 0 0\nspacing= 1 1 1\ndims= 2 2 2\n0 1 2 3 4 5 6\n")


def test_grid_nonpositive_spacing():
    with pytest.raises(IngestError, match="spacing"):
        read_grid_file("origin= 0 0 0\nspacing= 1 0 1\ndims= 2 2 2\n0 1 2 3 4 5 6 7\n")


def test_grid_roundtrip_reproduces_samples():
    rng = np.random.default_rng(3)
    grid = FieldGrid((1.0, -2.0, 0.5), (0.5, 0.25, 2.0), (3, 4, 2), rng.normal(size=(2, 4, 3)))
    g1, _ = ingest_grid_field(grid)
    g2, back = ingest_grid_field(write_grid_file(grid))
    assert np.array_equal(back.values, grid.values)
    assert serialize_graph(g1) == serialize_graph(g2)


def test_vector_grid_ingest():
    vals = np.arange(2 * 2 * 2 * 3, dtype=float).reshape(2, 2, 2, 3)
    graph, grid = ingest_grid_field(FieldGrid((0, 0, 0), (1, 1, 1), (2, 2, 2), vals))
    assert grid.is_vector
    vec = graph.value(V("sample8"), V("value"))
    assert [graph.value(vec, V(c)).value for c in ("vx", "vy", "vz")] == [21, 22, 23]
    assert isomorphic(parse_graph(serialize_graph(graph)), graph)


def test_grid_from_samples_requires_full_lattice():
    pts = [(i, j, k) for k in range(2) for j in range(2) for i in range(2)]
    grid = grid_from_samples(pts, list(range(8)))
    assert grid.at(1, 1, 1) == 7
    assert grid_from_samples(pts[:-1], list(range(7))) is None


def test_idw_exact_at_samples():
    pts = [(0, 0, 0), (2, 0, 0)]
    grid = resample_idw(pts, [1.0, 3.0], (0, 0, 0), (1, 1, 1), (3, 1, 1))
    assert [grid.at(i, 0, 0) for i in range(3)] == pytest.approx([1.0, 2.0, 3.0])
