"""Technique definitions, dataset classification, the abstract-level
transformation and the abstract vocabulary it is checked against."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Optional

from .errors import IngestError, QueryError, TechniqueError
from .ingest import ARG1, ARG2, COORD_PREDICATES, LOCATION, POSLIST, SURFACE, VALUE, schema_kind
from .query import Query, construct_instances, parse_query_prefix
from .rdf import IRI, TYPE, VOCAB, Blank, Graph, Literal, Term, V, term_text
from .store import Store, Var

# --------------------------------------------------------------------------
# vocabulary


@dataclass(frozen=True)
class VocabType:
    """Abstract vocabulary entry.

    ``kind`` is simple, complex, relation or auxiliary. ``location`` is the
    location mode a simple/complex object uses: ``located`` (a :location that
    is a point, a model location node or a relation), ``endpoints`` (two
    :endpoint links) or ``field`` (:inputData samples).
    """
    name: str
    kind: str
    required: tuple[str, ...] = ()
    optional: tuple[str, ...] = ()
    location: Optional[str] = None

    @property
    def iri(self) -> IRI:
        return V(self.name)


VOCABULARY: dict[IRI, VocabType] = {}
LOCATION_MODES = {"located", "endpoints", "field"}


def register_type(entry: VocabType) -> VocabType:
    """Add a type to the abstract vocabulary.

    Simple and complex types must declare a location mode and at least one
    required property; a concrete builder must also be registered with the
    layout manager before scenes using the type can be laid out.
    """
    if entry.kind in ("simple", "complex"):
        if entry.location not in LOCATION_MODES:
            raise TechniqueError(f"vocabulary type {entry.name} must declare a location mode "
                                 f"({', '.join(sorted(LOCATION_MODES))})")
        if not entry.required:
            raise TechniqueError(f"vocabulary type {entry.name} needs at least one required property")
    elif entry.kind not in ("relation", "auxiliary"):
        raise TechniqueError(f"unknown vocabulary kind {entry.kind!r}")
    VOCABULARY[entry.iri] = entry
    return entry


for _entry in (
    VocabType("Sphere", "simple", ("radius", "location"), ("color",), "located"),
    VocabType("Cone", "simple", ("height", "location"), ("color",), "located"),
    VocabType("Line", "simple", ("color", "endpoint"), (), "endpoints"),
    VocabType("Panel", "simple", ("content", "location"), ("color",), "located"),
    VocabType("IsoSurface", "complex", ("inputData",), (), "field"),
    VocabType("FlowLines", "complex", ("inputData",), (), "field"),
    VocabType("nearRelation", "relation", ("arg1", "arg2")),
    VocabType("aboveRelation", "relation", ("arg1", "arg2")),
    VocabType("insideRelation", "relation", ("arg1", "arg2")),
    VocabType("frontOfRelation", "relation", ("arg1", "arg2")),
    VocabType("Color", "auxiliary", ("red", "green", "blue")),
    VocabType("Point", "auxiliary"),
    VocabType("Surface", "auxiliary"),
    VocabType("Vector", "auxiliary"),
):
    register_type(_entry)

COLOR = V("color")
ENDPOINT = V("endpoint")
INPUT_DATA = V("inputData")
RGB = (V("red"), V("green"), V("blue"))


def visual_type(graph, node) -> Optional[VocabType]:
    for t in graph.types(node):
        entry = VOCABULARY.get(t)
        if entry is not None and entry.kind in ("simple", "complex"):
            return entry
    return None


def visual_nodes(graph) -> list:
    """Nodes typed with a simple or complex vocabulary type, in graph order."""
    return [t.s for t in graph.triples(None, TYPE, None)
            if (e := VOCABULARY.get(t.o)) is not None and e.kind in ("simple", "complex")]


# --------------------------------------------------------------------------
# technique spec


class DataCase(str, Enum):
    SPATIAL_INDIVIDUAL = "spatial-individual"
    SPATIAL_GLOBAL = "spatial-global"
    OBJECT_RELATED = "object-related"
    OBJECT_RELATION = "object-relation"


def _floats(text, n=None, key=""):
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise TechniqueError(f"{key}: expected numbers, got {text!r}") from None
    if not vals or (n is not None and len(vals) != n):
        raise TechniqueError(f"{key}: expected {n or 'some'} numbers, got {text!r}")
    if not all(math.isfinite(v) for v in vals):
        raise TechniqueError(f"{key}: non-finite number in {text!r}")
    return vals


def _scalar(check, what):
    def conv(text, key):
        v = _floats(text, 1, key)[0]
        if not check(v):
            raise TechniqueError(f"{key} must be {what}, got {text}")
        return v
    return conv


_positive = _scalar(lambda v: v > 0, "positive")
_nonneg = _scalar(lambda v: v >= 0, "non-negative")
_unit = _scalar(lambda v: 0 <= v <= 1, "in [0, 1]")


def _triple(text, key):
    return _floats(text, 3, key)


def _positive_triple(text, key):
    v = _floats(text, 3, key)
    if min(v) <= 0:
        raise TechniqueError(f"{key} must be positive, got {text}")
    return v


def _dims(text, key):
    v = _floats(text, 3, key)
    if any(d != int(d) or d < 2 for d in v):
        raise TechniqueError(f"{key} must be 3 integers >= 2, got {text}")
    return tuple(int(d) for d in v)


def _rgb(text, key):
    v = _floats(text, 3, key)
    if any(not 0 <= c <= 1 for c in v):
        raise TechniqueError(f"{key} components must be in [0, 1], got {text}")
    return v


def _seeds(text, key):
    groups = [g for g in text.split(",") if g.strip()]
    if not groups:
        raise TechniqueError(f"{key}: expected comma-separated x y z points")
    return tuple(_floats(g, 3, key) for g in groups)


def _levels(text, key):
    return _floats(text, None, key)


@dataclass(frozen=True)
class LayoutParams:
    clearance: float = 2.0
    near_distance: float = 2.0
    cone_base_radius: float = 1.0
    line_width: float = 0.05
    panel_width: float = 4.0
    panel_height: float = 2.0
    iso_levels: Optional[tuple[float, ...]] = None
    idw_power: float = 2.0
    grid_origin: Optional[tuple[float, float, float]] = None
    grid_spacing: Optional[tuple[float, float, float]] = None
    grid_dims: Optional[tuple[int, int, int]] = None
    streamline_step: float = 0.1
    max_length: float = 10.0
    seeds: Optional[tuple[tuple[float, float, float], ...]] = None

    def with_overrides(self, overrides: dict) -> "LayoutParams":
        return replace(self, **_convert(overrides, LAYOUT_KEYS, "layout"))


_LAYOUT_CONVERTERS = {
    "clearance": _nonneg, "near_distance": _nonneg, "cone_base_radius": _positive,
    "line_width": _positive, "panel_width": _positive, "panel_height": _positive,
    "iso_levels": _levels, "idw_power": _positive, "grid_origin": _triple,
    "grid_spacing": _positive_triple, "grid_dims": _dims, "streamline_step": _positive,
    "max_length": _positive, "seeds": _seeds,
}
LAYOUT_KEYS = {f.name: _LAYOUT_CONVERTERS[f.name] for f in fields(LayoutParams)}


@dataclass(frozen=True)
class EmitHints:
    color: tuple[float, float, float] = (0.0, 0.0, 1.0)
    transparency: float = 0.0
    building_color: tuple[float, float, float] = (0.8, 0.8, 0.8)

    def with_overrides(self, overrides: dict) -> "EmitHints":
        return replace(self, **_convert(overrides, EMIT_KEYS, "emit"))


EMIT_KEYS = {"color": _rgb, "transparency": _unit, "building_color": _rgb}


def _convert(overrides, table, section):
    out = {}
    for key, text in overrides.items():
        if key not in table:
            raise TechniqueError(f"unknown {section} key {key!r} (known: {', '.join(sorted(table))})")
        out[key] = table[key](str(text), f"{section}.{key}")
    return out


@dataclass(frozen=True)
class TechniqueSpec:
    name: str
    case: DataCase
    query: Query
    layout: LayoutParams = field(default_factory=LayoutParams)
    emit: EmitHints = field(default_factory=EmitHints)

    @property
    def complex_types(self) -> list[VocabType]:
        return [VOCABULARY[t] for t in self.query.constructed_types()
                if VOCABULARY[t].kind == "complex"]


def _line_col(text, pos):
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


_WS = re.compile(r"(?:\s+|#[^\n]*)*")


class _Reader:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def skip(self):
        self.pos = _WS.match(self.text, self.pos).end()

    def error(self, msg):
        line, col = _line_col(self.text, self.pos)
        return TechniqueError(f"{msg} (line {line}, column {col})")

    def match(self, regex):
        self.skip()
        m = re.compile(regex).match(self.text, self.pos)
        if m:
            self.pos = m.end()
        return m

    def expect(self, regex, what):
        m = self.match(regex)
        if not m:
            found = self.text[self.pos:self.pos + 20].split("\n")[0] or "end of file"
            raise self.error(f"expected {what}, found {found!r}")
        return m

    def block(self) -> dict:
        self.expect(r"\{", "'{'")
        m = self.expect(r"[^}]*", "block body")
        body_start = m.start()
        self.expect(r"\}", "'}'")
        out = {}
        for part in m.group(0).split(";"):
            stripped = "\n".join(line.split("#", 1)[0] for line in part.splitlines()).strip()
            if not stripped:
                continue
            key, eq, value = stripped.partition("=")
            if not eq:
                self.pos = body_start
                raise self.error(f"expected 'key = value' in block, found {stripped!r}")
            key = key.strip()
            if key in out:
                self.pos = body_start
                raise self.error(f"duplicate key {key!r}")
            out[key] = " ".join(value.split())
        return out


def parse_technique(text: str) -> TechniqueSpec:
    """Parse a technique file.

    Layout: ``technique "<name>"``, ``case <kind>``, a construct query, then
    optional ``layout { key = value; }`` and ``emit { key = value; }`` blocks.
    """
    r = _Reader(text)
    r.expect(r"technique\b", "'technique'")
    m = r.expect(r'"(?:[^"\\\n]|\\.)*"', "quoted technique name")
    name = json.loads(m.group(0))
    if not name:
        raise r.error("technique name is empty")
    r.expect(r"case\b", "'case'")
    m = r.expect(r"[a-z-]+", "data case")
    try:
        case = DataCase(m.group(0))
    except ValueError:
        raise r.error(f"unknown case {m.group(0)!r} (known: {', '.join(c.value for c in DataCase)})") from None
    r.skip()
    try:
        query, end = parse_query_prefix(text, r.pos)
    except QueryError as exc:
        raise TechniqueError(f"technique {name!r}: {exc}") from None
    r.pos = end
    sections = {}
    while True:
        m = r.match(r"(layout|emit)\b")
        if not m:
            break
        if m.group(1) in sections:
            raise r.error(f"duplicate {m.group(1)} block")
        sections[m.group(1)] = r.block()
    r.skip()
    if r.pos != len(text):
        raise r.error(f"unexpected text {text[r.pos:r.pos + 20]!r}")
    layout = LayoutParams().with_overrides(sections.get("layout", {}))
    emit = EmitHints().with_overrides(sections.get("emit", {}))
    spec = TechniqueSpec(name, case, query, layout, emit)
    check_technique(spec)
    return spec


def check_technique(spec: TechniqueSpec) -> None:
    """Vocabulary and parameter checks shared by parsing and override application."""
    types = spec.query.constructed_types()
    for t in types:
        if t not in VOCABULARY:
            raise TechniqueError(f"technique {spec.name!r}: type {term_text(t)} is not in the abstract vocabulary")
    visual = [VOCABULARY[t] for t in types if VOCABULARY[t].kind in ("simple", "complex")]
    if not visual and spec.query.templates:
        raise TechniqueError(f"technique {spec.name!r} constructs no visual object type")
    complex_ = [v for v in visual if v.kind == "complex"]
    if (spec.case == DataCase.SPATIAL_GLOBAL) != bool(complex_):
        if complex_:
            raise TechniqueError(f"technique {spec.name!r} builds {complex_[0].name}, "
                                 f"which needs case spatial-global, not {spec.case.value}")
        raise TechniqueError(f"technique {spec.name!r}: case spatial-global needs a complex object type")
    for v in complex_:
        if v.name == "IsoSurface" and not spec.layout.iso_levels:
            raise TechniqueError(f"technique {spec.name!r}: IsoSurface needs layout parameter iso_levels")
        if v.name == "FlowLines" and not spec.layout.seeds:
            raise TechniqueError(f"technique {spec.name!r}: FlowLines needs layout parameter seeds")
    g = spec.layout
    grid = (g.grid_origin, g.grid_spacing, g.grid_dims)
    if any(x is not None for x in grid) and any(x is None for x in grid):
        raise TechniqueError(f"technique {spec.name!r}: grid_origin, grid_spacing and grid_dims go together")


# --------------------------------------------------------------------------
# classification and application

_KIND_TO_CASE = {"object": DataCase.OBJECT_RELATED, "relation": DataCase.OBJECT_RELATION}


def classify_dataset(data: Graph, complex_technique: bool = False) -> Optional[DataCase]:
    """Case of a dataset graph; None when it holds no data elements."""
    try:
        kind = schema_kind(data)
    except IngestError as exc:
        raise TechniqueError(f"cannot classify dataset: {exc}") from None
    if kind is None:
        return None
    if kind == "spatial":
        return DataCase.SPATIAL_GLOBAL if complex_technique else DataCase.SPATIAL_INDIVIDUAL
    return _KIND_TO_CASE[kind]


@dataclass
class AbstractResult:
    graph: Graph
    provenance: dict  # abstract node -> list of source data nodes
    warnings: list = field(default_factory=list)


def _source_var(query: Query) -> Optional[Var]:
    for s, _, _ in query.pattern:
        if isinstance(s, Var) and not s.name.startswith("_:"):
            return s
    return None


def apply_technique(store: Store, spec: TechniqueSpec, data_graph: Optional[str] = None,
                    model_graph: str = "model", blank_prefix: str = "v",
                    validate: bool = True) -> AbstractResult:
    """Run the technique's construct query over one dataset graph plus the model.

    The dataset graph is the query's ``from`` name, else ``data_graph``. The
    result carries a provenance map from each constructed subject to the
    data nodes bound to the pattern's first subject variable.
    """
    name = spec.query.from_graph or data_graph
    if name is None:
        raise TechniqueError("no dataset graph named for the technique")
    if name not in store:
        raise TechniqueError(f"technique {spec.name!r} reads graph {name!r}, which is not loaded")
    graphs = [name] + ([model_graph] if model_graph in store and model_graph != name else [])
    found = classify_dataset(store.graphs[name], bool(spec.complex_types))
    if found is not None and found != spec.case:
        raise TechniqueError(f"technique {spec.name!r} expects {spec.case.value} data "
                             f"but dataset {name!r} is {found.value}")
    src = _source_var(spec.query)
    result = AbstractResult(Graph(), {})
    for binding, triples in construct_instances(store, spec.query, graphs, blank_prefix, result.warnings):
        origin = binding.get(src) if src is not None else None
        for s, p, o in triples:
            result.graph.add((s, p, o))
            sources = result.provenance.setdefault(s, [])
            if origin is not None and origin not in sources:
                sources.append(origin)
    if validate:
        model = store.graphs.get(model_graph, Graph())
        context = store.view(graphs)
        problems = validate_abstract(result.graph, model, context)
        if problems:
            listed = "; ".join(str(v) for v in problems[:10])
            more = f" (+{len(problems) - 10} more)" if len(problems) > 10 else ""
            raise TechniqueError(f"technique {spec.name!r} produced an invalid abstract graph: {listed}{more}")
    return result


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    node: str
    message: str

    def __str__(self):
        return f"{self.node}: {self.message}"


def point_coords(graph, node) -> Optional[tuple[float, float, float]]:
    """Coordinates of a point node in either predicate family, else None."""
    for preds in COORD_PREDICATES.values():
        vals = [graph.value(node, p) for p in preds]
        if all(isinstance(v, Literal) and v.is_number for v in vals):
            return tuple(v.value for v in vals)
    return None


def coord_family(graph, node) -> Optional[str]:
    for name, preds in COORD_PREDICATES.items():
        if all(graph.value(node, p) is not None for p in preds):
            return name
    return None


def relation_type(graph, node) -> Optional[VocabType]:
    for t in graph.types(node):
        entry = VOCABULARY.get(t)
        if entry is not None and entry.kind == "relation":
            return entry
    return None


def _number(graph, node, pred) -> Optional[float]:
    v = graph.value(node, pred)
    return v.value if isinstance(v, Literal) and v.is_number else None


def _union(*graphs):
    from .store import GraphView
    return GraphView([g for g in graphs if g is not None])


def validate_abstract(graph: Graph, model: Graph, context=None) -> list[Violation]:
    """Check the abstract graph against the vocabulary; an empty list means valid.

    ``context`` (data plus model) resolves location references that point at
    dataset nodes; the model alone resolves city-object references.
    """
    context = _union(graph, context if context is not None else model)
    out: list[Violation] = []

    def bad(node, msg):
        out.append(Violation(term_text(node), msg))

    def city_object(node, ref, what):
        if not isinstance(ref, IRI):
            bad(node, f"{what} {term_text(ref)} is not a city-object IRI")
        elif not model.has_subject(ref):
            bad(node, f"dangling reference: {what} {term_text(ref)} is not in the city model")

    for t in graph.triples(None, TYPE, None):
        if isinstance(t.o, IRI) and t.o.value.startswith(VOCAB) and t.o not in VOCABULARY:
            bad(t.s, f"type {term_text(t.o)} is not in the abstract vocabulary")

    for node in visual_nodes(graph):
        entry = visual_type(graph, node)
        for prop in entry.required:
            if graph.value(node, V(prop)) is None:
                bad(node, f"{entry.name} is missing required property :{prop}")
        for prop in ("radius", "height"):
            if graph.value(node, V(prop)) is not None:
                v = _number(graph, node, V(prop))
                if v is None or v <= 0:
                    bad(node, f":{prop} must be a positive number, got {term_text(graph.value(node, V(prop)))}")
        color = graph.value(node, COLOR)
        if color is not None:
            for pred in RGB:
                c = _number(graph, color, pred)
                if c is None or not 0 <= c <= 1:
                    bad(node, f"color component {term_text(pred)} must be a number in [0, 1]")
        if entry.location == "endpoints":
            ends = graph.objects(node, ENDPOINT)
            if len(ends) not in (0, 2):
                bad(node, f"{entry.name} needs exactly 2 :endpoint links, found {len(ends)}")
            for e in ends:
                if point_coords(context, e) is None:
                    city_object(node, e, "endpoint")
        elif entry.location == "field":
            for d in graph.objects(node, INPUT_DATA):
                if graph.value(d, VALUE) is None or graph.value(d, LOCATION) is None:
                    bad(node, f"input sample {term_text(d)} needs :value and :location")
        else:
            locs = graph.objects(node, LOCATION)
            if len(locs) > 1:
                bad(node, f"{len(locs)} :location values")
            for loc in locs:
                _check_location(graph, context, node, loc, bad, city_object)
    return out


def _check_location(graph, context, node, loc, bad, city_object):
    if isinstance(loc, Literal):
        bad(node, ":location is a literal")
        return
    rel = relation_type(graph, loc)
    if rel is not None:
        a1, a2 = graph.value(loc, ARG1), graph.value(loc, ARG2)
        if a1 is None or a2 is None:
            bad(node, f"{rel.name} {term_text(loc)} needs :arg1 and :arg2")
            return
        if (a1 == node) == (a2 == node):
            bad(node, f"{rel.name} must relate the object itself to one city object")
            return
        city_object(node, a2 if a1 == node else a1, rel.name + " argument")
        return
    if point_coords(context, loc) is not None:
        return
    if SURFACE in context.objects(loc, TYPE) and context.value(loc, POSLIST) is not None:
        return
    bad(node, f":location {term_text(loc)} is neither a point, a surface nor a spatial relation")
