import random
from collections import Counter

import pytest

from cityvizforge.errors import CvfError, EvalError, QueryError
from cityvizforge.query import (BinOp, Const, VarRef, eval_construct, eval_expression, parse_query)
from cityvizforge.rdf import (TYPE, Blank, Graph, IRI, Literal, V, isomorphic, iri, parse_graph,
                              serialize_graph)
from cityvizforge.store import Store, Var, match_bgp

from oracles import brute_force_bgp

POLLUTANT_QUERY = """construct {_:1 a :Sphere .
    _:1 :radius ?val/100.
    _:1 :location ?loc}
from DataGraph
where {?x a :PollutantConcentration. ?x :value ?val.
?x :location ?loc. ?loc a :Point}"""

GLOBAL_QUERY = """construct {:vObj a :IsoSurface .
:vObj :inputData _:1. _:1 :value ?val. _:1 :location ?loc}
from DataGraph
where {?x a :PollutantConcentration. ?x :value ?val. ?x :location ?loc}"""


def pollutant_graph(rows):
    g = Graph()
    for n, (v, x, y, z) in enumerate(rows, 1):
        d, loc = V(f"data{n}"), V(f"loc{n}")
        g.update([(d, TYPE, V("PollutantConcentration")), (d, V("value"), Literal(v)),
                  (d, V("location"), loc), (loc, TYPE, V("Point")), (loc, V("xcoord"), Literal(x)),
                  (loc, V("ycoord"), Literal(y)), (loc, V("zcoord"), Literal(z))])
    return g


# ---------------------------------------------------------------- terms, graphs

def test_term_invariants():
    with pytest.raises(ValueError):
        IRI("")
    with pytest.raises(ValueError):
        Blank("")
    with pytest.raises(ValueError):
        Literal(float("nan"))
    g = Graph()
    with pytest.raises(ValueError):
        g.add((Literal(1), V("p"), V("o")))
    with pytest.raises(ValueError):
        g.add((V("s"), Blank("p"), V("o")))


def test_set_semantics():
    g = Graph()
    assert g.add((V("a"), V("p"), Literal(1)))
    assert not g.add((V("a"), V("p"), Literal(1.0)))
    assert len(g) == 1


def test_prefixes():
    assert iri("cgml:Building").value == "http://www.opengis.net/citygml/2.0#Building"
    assert iri(":value").value == "http://cityvizforge.org/ns#value"
    assert iri("gml:posList").value == "http://www.opengis.net/gml#posList"


def test_serialize_empty_and_single():
    assert serialize_graph(Graph()) == ""
    text = serialize_graph(Graph([(V("a"), V("p"), Literal("x y"))]))
    assert text.count("\n") == 1


def test_serialize_roundtrip_with_blanks():
    g = Graph([(Blank("b2"), V("p"), Blank("b10")), (Blank("b10"), V("q"), Literal(0.0567)),
               (V("a"), V("r"), Literal('quote " and \\ backslash'))])
    back = parse_graph(serialize_graph(g))
    assert isomorphic(back, g)
    assert serialize_graph(back) == serialize_graph(g)


def test_parse_graph_rejects_garbage():
    with pytest.raises(CvfError, match="line 1"):
        parse_graph("not a triple\n")


def test_isomorphism_detects_structure():
    p = V("p")
    cycle = lambda n, off: [(Blank(f"b{off + i}"), p, Blank(f"b{off + (i + 1) % n}")) for i in range(n)]
    assert not isomorphic(Graph(cycle(3, 0) + cycle(3, 3)), Graph(cycle(6, 0)))
    assert isomorphic(Graph(cycle(4, 0)), Graph(cycle(4, 50)))
    assert not isomorphic(Graph([(Blank("a"), p, Literal(1))]), Graph([(Blank("a"), p, Literal(2))]))


# ---------------------------------------------------------------- match_bgp

def test_match_single():
    g = Graph([(V("a"), V("p"), V("b"))])
    s, o = Var("s"), Var("o")
    assert list(match_bgp(g, [(s, V("p"), o)])) == [{s: V("a"), o: V("b")}]


def test_match_self_join_counts():
    g = Graph([(V("a"), V("p"), V("b")), (V("a"), V("p"), V("c"))])
    s, o, o2 = Var("s"), Var("o"), Var("o2")
    got = list(match_bgp(g, [(s, V("p"), o), (s, V("p"), o2)]))
    assert len(got) == 4
    assert Counter(frozenset(b.items()) for b in got) == brute_force_bgp(g, [(s, V("p"), o), (s, V("p"), o2)])


def test_empty_pattern_yields_one_empty_binding():
    assert list(match_bgp(Graph(), [])) == [{}]


def test_named_graphs_and_union():
    store = Store()
    store.add("g1", (V("a"), V("p"), V("b")))
    store.add("g2", (V("c"), V("p"), V("d")))
    pat = [(Var("s"), V("p"), Var("o"))]
    assert len(list(match_bgp(store, pat, "g1"))) == 1
    assert len(list(match_bgp(store, pat))) == 2
    with pytest.raises(CvfError, match="unknown graph"):
        list(match_bgp(store, pat, "nope"))


def test_frozen_store_rejects_writes():
    store = Store().freeze()
    with pytest.raises(CvfError):
        store.add("g", (V("a"), V("p"), V("b")))


def _random_case(rng):
    iris = [V(f"n{i}") for i in range(5)]
    preds = [V(f"p{i}") for i in range(3)]
    lits = [Literal(float(i)) for i in range(3)]
    g = Graph()
    for _ in range(rng.randint(0, 50)):
        g.add((rng.choice(iris), rng.choice(preds), rng.choice(iris + lits)))
    variables = [Var(v) for v in "abc"] + [Blank("h")]
    pattern = []
    for _ in range(rng.randint(1, 3)):
        pattern.append((rng.choice(variables + iris[:2]), rng.choice(preds + [Var("p")]),
                        rng.choice(variables + iris[:2] + lits[:1])))
    return g, pattern


def test_match_bgp_equals_brute_force_on_random_cases():
    rng = random.Random(20261015)
    for _ in range(60):
        g, pattern = _random_case(rng)
        got = Counter(frozenset(b.items()) for b in match_bgp(g, pattern))
        assert got == brute_force_bgp(g, pattern), pattern


# ---------------------------------------------------------------- parsing

def test_parse_pollutant_query():
    q = parse_query(POLLUTANT_QUERY)
    assert len(q.templates) == 3
    assert len(q.pattern) == 4
    assert q.from_graph == "DataGraph"
    radius = q.templates[1]
    assert radius.p == V("radius")
    assert radius.o == BinOp("/", VarRef(Var("val")), Const(Literal(100)))


def test_parse_empty_query():
    q = parse_query("construct { } where { }")
    assert q.templates == [] and q.pattern == []
    assert len(eval_construct(Store(), q)) == 0


def test_unbound_template_variable():
    with pytest.raises(QueryError, match=r"\?z"):
        parse_query("construct {_:1 :radius ?z} where {?x :value ?val}")


def test_unknown_function_and_arity():
    with pytest.raises(QueryError, match="sqrt"):
        parse_query("construct {_:1 :r sqrt(?v)} where {?x :value ?v}")
    with pytest.raises(QueryError, match="abs"):
        parse_query("construct {_:1 :r abs(?v, ?v)} where {?x :value ?v}")


def test_syntax_error_has_position():
    with pytest.raises(QueryError) as info:
        parse_query("construct {_:1 a :Sphere\nwhere {?x :value ?v}")
    assert info.value.line is not None


def test_template_blank_shared_with_pattern_rejected():
    with pytest.raises(QueryError):
        parse_query("construct {_:1 :r ?v} where {_:1 :value ?v}")


# ---------------------------------------------------------------- expressions

def _expr(text):
    q = parse_query(f"construct {{_:1 :r {text}}} where {{?x :value ?val. ?x :name ?name}}")
    return q.templates[0].o


def test_expression_examples():
    val = Var("val")
    assert abs(eval_expression(_expr("?val/100"), {val: Literal(5.67)}).value - 0.0567) <= 1e-12
    assert eval_expression(_expr("?val"), {val: Literal(42)}) == Literal(42)
    assert eval_expression(_expr('concat(str(?val), " m")'), {val: Literal(3)}) == Literal("3 m")
    assert eval_expression(_expr("max(?val, 2) - min(?val, 2) * 2"), {val: Literal(5)}) == Literal(1)
    assert eval_expression(_expr("abs(0 - ?val)"), {val: Literal(5)}) == Literal(5)


def test_expression_errors():
    val, name = Var("val"), Var("name")
    with pytest.raises(EvalError, match="zero"):
        eval_expression(_expr("?val / 0"), {val: Literal(1)})
    with pytest.raises(EvalError):
        eval_expression(_expr("?val + ?name"), {val: Literal(1), name: Literal("x")})
    with pytest.raises(EvalError, match="unbound"):
        eval_expression(_expr("?val + 1"), {})


# ---------------------------------------------------------------- construct

def test_construct_sphere_radius():
    store = Store()
    store.add_graph("DataGraph", pollutant_graph([(5.67, 4.5, 44, 1.5)]))
    out = eval_construct(store, parse_query(POLLUTANT_QUERY))
    (sphere,) = out.subjects(TYPE, V("Sphere"))
    assert isinstance(sphere, Blank)
    assert abs(out.value(sphere, V("radius")).value - 0.0567) <= 1e-12
    assert out.value(sphere, V("location")) == V("loc1")


def test_construct_global_query_one_complex_node():
    store = Store()
    store.add_graph("DataGraph", pollutant_graph([(1, 0, 0, 0), (2, 1, 0, 0), (3, 2, 0, 0)]))
    out = eval_construct(store, parse_query(GLOBAL_QUERY))
    assert out.subjects(TYPE, V("IsoSurface")) == [V("vObj")]
    inputs = out.objects(V("vObj"), V("inputData"))
    assert len(inputs) == 3 and len(set(inputs)) == 3
    assert all(isinstance(b, Blank) for b in inputs)


def test_construct_over_empty_store():
    store = Store()
    store.add_graph("DataGraph", Graph())
    assert len(eval_construct(store, parse_query(POLLUTANT_QUERY))) == 0


def test_fresh_blank_per_binding():
    rows = [(float(i), i, 0, 0) for i in range(7)]
    store = Store()
    store.add_graph("DataGraph", pollutant_graph(rows))
    out = eval_construct(store, parse_query(POLLUTANT_QUERY))
    assert len(out.subjects(TYPE, V("Sphere"))) == 7


def test_failed_template_is_dropped_with_warning():
    store = Store()
    g = pollutant_graph([(1, 0, 0, 0)])
    g.add((V("data2"), TYPE, V("PollutantConcentration")))
    g.add((V("data2"), V("value"), Literal("n/a")))
    g.add((V("data2"), V("location"), V("loc1")))
    store.add_graph("DataGraph", g)
    warnings = []
    out = eval_construct(store, parse_query(POLLUTANT_QUERY), warnings=warnings)
    assert len(out.subjects(TYPE, V("Sphere"))) == 2
    assert len(out.subjects(V("radius"))) == 1
    assert len(warnings) == 1


@pytest.mark.parametrize("sep", [" ", "\x1c", "\x85", "\r", "\x0b"])
def test_literal_with_line_separator_roundtrips(sep):
    g = Graph([(V("a"), V("p"), Literal(f"x{sep}y"))])
    assert set(parse_graph(serialize_graph(g))) == set(g)
