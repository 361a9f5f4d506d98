import pytest

from cityvizforge.errors import TechniqueError
from cityvizforge.ingest import (ingest_object_data, ingest_point_data, ingest_relation_data,
                                 load_dictionary)
from cityvizforge.rdf import TYPE, Blank, Graph, IRI, Literal, V, CGML
from cityvizforge.store import Store
from cityvizforge.technique import (DataCase, LayoutParams, VocabType, apply_technique,
                                    classify_dataset, parse_technique, register_type,
                                    validate_abstract, VOCABULARY)
from cityvizforge.techniques import BUILTIN_NAMES, load_builtin

SPHERE_TECH = """technique "spheres"
case spatial-individual
construct {_:1 a :Sphere . _:1 :radius ?val/100. _:1 :location ?loc}
from DataGraph
where {?x a :PollutantConcentration. ?x :value ?val. ?x :location ?loc. ?loc a :Point}
emit { color = 0 0 1; }
"""


def window_model(*ids):
    g = Graph()
    for i in ids:
        g.add((V(i), TYPE, IRI(CGML + "Window")))
    g.add((V("co2"), TYPE, IRI(CGML + "Building")))
    return g


def store_with(data, model=None, name="DataGraph"):
    s = Store()
    s.add_graph("model", model if model is not None else Graph())
    s.add_graph(name, data)
    return s.freeze()


def test_parse_sphere_technique():
    spec = parse_technique(SPHERE_TECH)
    assert spec.case is DataCase.SPATIAL_INDIVIDUAL
    assert spec.emit.color == (0, 0, 1)
    assert spec.layout == LayoutParams()


def test_unregistered_type_rejected():
    with pytest.raises(TechniqueError, match="Cube"):
        parse_technique(SPHERE_TECH.replace(":Sphere", ":Cube"))


def test_isosurface_without_levels_rejected():
    text = load_builtin("global-isosurface").query.text
    with pytest.raises(TechniqueError, match="iso_levels"):
        parse_technique(f'technique "iso"\ncase spatial-global\n{text}\n')


def test_unknown_layout_key_and_bad_value():
    with pytest.raises(TechniqueError, match="wobble"):
        parse_technique(SPHERE_TECH + "layout { wobble = 1; }")
    with pytest.raises(TechniqueError, match="clearance"):
        parse_technique(SPHERE_TECH + "layout { clearance = -1; }")
    with pytest.raises(TechniqueError, match="color"):
        parse_technique(SPHERE_TECH.replace("0 0 1", "0 0 2"))


def test_case_must_match_complexity():
    with pytest.raises(TechniqueError, match="spatial-global"):
        parse_technique(SPHERE_TECH.replace("spatial-individual", "spatial-global"))


def test_all_builtins_parse():
    assert len(BUILTIN_NAMES) == 6
    for name in BUILTIN_NAMES:
        assert load_builtin(name).name == name


def test_register_type_requires_location_mode():
    with pytest.raises(TechniqueError):
        register_type(VocabType("Blob", "simple", ("size",)))
    assert V("Blob") not in VOCABULARY


# ---------------------------------------------------------------- classification

def test_classify_reference_shapes():
    d = load_dictionary([("w1", "win1"), ("w2", "win2"), ("b", "co2")])
    assert classify_dataset(ingest_point_data([(5.67, 4.5, 44, 1.5)], ":P")) is DataCase.SPATIAL_INDIVIDUAL
    assert classify_dataset(ingest_point_data([(1, 0, 0, 0)], ":P"), True) is DataCase.SPATIAL_GLOBAL
    assert classify_dataset(ingest_relation_data([(0.3, "w1", "w2")], ":I", d)) is DataCase.OBJECT_RELATION
    assert classify_dataset(ingest_object_data([("t", "b")], ":R", d)) is DataCase.OBJECT_RELATED
    mixed = Graph([(V("d"), V("about"), V("co2")), (V("d"), V("arg1"), V("win1")), (V("d"), V("arg2"), V("win2"))])
    with pytest.raises(TechniqueError):
        classify_dataset(mixed)


def test_case_mismatch_rejected_on_apply():
    d = load_dictionary([("b", "co2")])
    data = ingest_object_data([("t", "b")], ":PollutantConcentration", d)
    with pytest.raises(TechniqueError, match="object-related"):
        apply_technique(store_with(data, window_model()), parse_technique(SPHERE_TECH))


# ---------------------------------------------------------------- application

def test_cone_over_pednum1():
    data = ingest_point_data([(42, -13, 25, 0)], ":PedestrianCounting", prefix="pednum", coords="xloc")
    res = apply_technique(store_with(data, name="data"), load_builtin("pedestrian-cones"), "data")
    g = res.graph
    (cone,) = g.subjects(TYPE, V("Cone"))
    assert g.value(cone, V("height")) == Literal(42)
    loc = g.value(cone, V("location"))
    assert isinstance(loc, Blank)
    assert [g.value(loc, V(p)).value for p in ("xloc", "yloc", "zloc")] == [-13, 25, 0]
    assert res.provenance[cone] == [V("pednum1")]


def test_panel_over_data2():
    d = load_dictionary([("bldg-7", "co2")])
    data = ingest_object_data([("historic facade, built 1820", "bldg-7")], ":RichText", d, prefix="data2")
    res = apply_technique(store_with(data, window_model()), load_builtin("panel-near-object"))
    g = res.graph
    (panel,) = g.subjects(TYPE, V("Panel"))
    loc = g.value(panel, V("location"))
    assert g.value(loc, TYPE) == V("nearRelation")
    assert g.value(loc, V("arg1")) == V("co2")
    assert g.value(loc, V("arg2")) == panel


def test_intervisibility_output_is_valid():
    model = window_model("win1", "win2")
    d = load_dictionary([("w1", "win1"), ("w2", "win2")])
    data = ingest_relation_data([(0.3, "w1", "w2")], ":IntervisibilityRelation", d)
    res = apply_technique(store_with(data, model), load_builtin("line-between-objects"))
    assert validate_abstract(res.graph, model) == []
    (line,) = res.graph.subjects(TYPE, V("Line"))
    color = res.graph.value(line, V("color"))
    assert [res.graph.value(color, p).value for p in (V("red"), V("green"), V("blue"))] == [0.3, 0, 0]


def test_empty_dataset_gives_empty_graph():
    res = apply_technique(store_with(Graph()), parse_technique(SPHERE_TECH))
    assert len(res.graph) == 0


@pytest.mark.parametrize("n", [0, 1, 5, 100])
def test_cardinality_individual_and_global(n):
    data = ingest_point_data([(float(i + 1), i, 0, 0) for i in range(n)], ":PollutantConcentration")
    res = apply_technique(store_with(data), parse_technique(SPHERE_TECH))
    spheres = res.graph.subjects(TYPE, V("Sphere"))
    assert len(spheres) == n == len(set(spheres))
    assert all(len(res.provenance[s]) >= 1 for s in spheres)
    data = ingest_point_data([(float(i + 1), i, 0, 0) for i in range(n)], ":FieldSample")
    res = apply_technique(store_with(data), load_builtin("global-isosurface"))
    complex_nodes = res.graph.subjects(TYPE, V("IsoSurface"))
    assert len(complex_nodes) == (1 if n else 0)
    if n:
        assert len(res.graph.objects(complex_nodes[0], V("inputData"))) == n


def test_unknown_graph_name():
    s = Store()
    s.add_graph("other", Graph())
    with pytest.raises(TechniqueError, match="DataGraph"):
        apply_technique(s, parse_technique(SPHERE_TECH))


# ---------------------------------------------------------------- validation

def test_sphere_without_radius():
    g = Graph([(Blank("s"), TYPE, V("Sphere")), (Blank("s"), V("location"), V("loc1"))])
    ctx = Graph([(V("loc1"), V("xcoord"), Literal(0)), (V("loc1"), V("ycoord"), Literal(0)),
                 (V("loc1"), V("zcoord"), Literal(0))])
    problems = validate_abstract(g, Graph(), ctx)
    assert len(problems) == 1 and ":radius" in problems[0].message


def test_dangling_endpoint():
    g = Graph([(Blank("l"), TYPE, V("Line")), (Blank("l"), V("color"), Blank("c")),
               (Blank("c"), V("red"), Literal(1)), (Blank("c"), V("green"), Literal(0)),
               (Blank("c"), V("blue"), Literal(0)),
               (Blank("l"), V("endpoint"), V("win1")), (Blank("l"), V("endpoint"), V("win9"))])
    problems = validate_abstract(g, window_model("win1"))
    assert len(problems) == 1
    assert "dangling" in problems[0].message and "win9" in problems[0].message


def test_invalid_output_raises_on_apply():
    # relation rows referencing a building instead of windows construct nothing
    model = window_model("win1")
    d = load_dictionary([("w1", "win1"), ("b", "co2")])
    data = ingest_relation_data([(0.3, "w1", "b")], ":IntervisibilityRelation", d)
    res = apply_technique(store_with(data, model), load_builtin("line-between-objects"))
    assert len(res.graph) == 0
    tech = SPHERE_TECH.replace("?val/100", "?val - 10")
    data = ingest_point_data([(5, 0, 0, 0)], ":PollutantConcentration")
    with pytest.raises(TechniqueError, match="positive"):
        apply_technique(store_with(data), parse_technique(tech))
