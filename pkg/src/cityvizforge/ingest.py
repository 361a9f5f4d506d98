"""Tabular datasets -> RDF following the three data-element shapes.

* spatial:  ``x a T; :value v; :location loc``  with ``loc a :Point`` (or ``:Surface``)
* object:   ``x a T; :value v; :about y``
* relation: ``x a T; :value v; :arg1 y1; :arg2 y2``

City-object references in datasets are resolved to model IRIs through a
:class:`Dictionary`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .citygml import gml_id_iri, parse_poslist
from .errors import CityGMLError, IngestError
from .fields import FieldGrid, read_grid_file
from .rdf import IRI, TYPE, Graph, Literal, V, iri

VALUE = V("value")
LOCATION = V("location")
ABOUT = V("about")
ARG1 = V("arg1")
ARG2 = V("arg2")
POINT = V("Point")
SURFACE = V("Surface")
VECTOR = V("Vector")
POSLIST = V("posList")

COORD_PREDICATES = {
    "xcoord": (V("xcoord"), V("ycoord"), V("zcoord")),
    "xloc": (V("xloc"), V("yloc"), V("zloc")),
}
VECTOR_PREDICATES = (V("vx"), V("vy"), V("vz"))


def read_csv_table(text: str) -> list[dict]:
    """Comma-separated text with a mandatory header row."""
    reader = csv.DictReader(io.StringIO(text))
    if not reader.fieldnames:
        return []
    rows = []
    for row in reader:
        if None in row:
            raise IngestError(f"row {reader.line_num} has more cells than the header")
        rows.append({k.strip(): (v or "").strip() for k, v in row.items()})
    return rows


def _records(rows, columns: Sequence[str]) -> list[dict]:
    out = []
    for n, row in enumerate(rows, 1):
        if isinstance(row, Mapping):
            missing = [c for c in columns if c not in row]
            if missing:
                raise IngestError(f"row {n}: missing column {missing[0]!r}")
            out.append(dict(row))
        else:
            if len(row) != len(columns):
                raise IngestError(f"row {n}: expected {len(columns)} cells, got {len(row)}")
            out.append(dict(zip(columns, row)))
    return out


def _number(cell, col, n) -> float:
    try:
        v = float(cell)
    except (TypeError, ValueError):
        raise IngestError(f"row {n}: non-numeric {col} {cell!r}") from None
    if not math.isfinite(v):
        raise IngestError(f"row {n}: non-finite {col} {cell!r}")
    return v


def _value(cell) -> Literal:
    # numbers stay numbers, anything else is text
    if isinstance(cell, (int, float)) and not isinstance(cell, bool):
        return Literal(float(cell))
    try:
        v = float(cell)
        if math.isfinite(v):
            return Literal(v)
    except (TypeError, ValueError):
        pass
    return Literal(str(cell))


def _type(type_iri) -> IRI:
    return type_iri if isinstance(type_iri, IRI) else iri(type_iri)


@dataclass
class Dictionary:
    entries: dict[str, IRI] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def resolve(self, ref: str, row: int, model: Optional[Graph] = None) -> IRI:
        try:
            target = self.entries[ref]
        except KeyError:
            raise IngestError(f"row {row}: unresolvable object reference {ref!r}") from None
        if model is not None and not model.has_subject(target):
            raise IngestError(f"row {row}: reference {ref!r} maps to {target} which is not in the city model")
        return target


def load_dictionary(rows) -> Dictionary:
    d = Dictionary()
    for n, rec in enumerate(_records(rows, ("ref", "gml_id")), 1):
        ref, gid = str(rec["ref"]), str(rec["gml_id"])
        if not ref or not gid:
            raise IngestError(f"row {n}: empty ref or gml_id")
        if ref in d.entries:
            raise IngestError(f"row {n}: duplicate reference {ref!r}")
        d.entries[ref] = gml_id_iri(gid)
    return d


def ingest_point_data(rows, type_iri, prefix="data", loc_prefix="loc", coords="xcoord") -> Graph:
    """One data element per row of ``value,x,y,z``."""
    t = _type(type_iri)
    try:
        px, py, pz = COORD_PREDICATES[coords]
    except KeyError:
        raise IngestError(f"unknown coordinate style {coords!r}") from None
    g = Graph()
    for n, rec in enumerate(_records(rows, ("value", "x", "y", "z")), 1):
        value = _number(rec["value"], "value", n)
        x, y, z = (_number(rec[c], c, n) for c in "xyz")
        node, loc = V(f"{prefix}{n}"), V(f"{loc_prefix}{n}")
        g.update([
            (node, TYPE, t), (node, VALUE, Literal(value)), (node, LOCATION, loc),
            (loc, TYPE, POINT), (loc, px, Literal(x)), (loc, py, Literal(y)), (loc, pz, Literal(z)),
        ])
    return g


def read_regions(text: str) -> dict[str, tuple]:
    """Side file of rings: CSV ``region,poslist``."""
    regions = {}
    for n, rec in enumerate(_records(read_csv_table(text), ("region", "poslist")), 1):
        if rec["region"] in regions:
            raise IngestError(f"row {n}: duplicate region {rec['region']!r}")
        try:
            regions[rec["region"]] = parse_poslist(rec["poslist"], f"in region {rec['region']!r}")
        except CityGMLError as exc:
            raise IngestError(str(exc)) from None
    return regions


def ingest_region_data(rows, type_iri, regions: Mapping[str, Sequence], prefix="data",
                       loc_prefix="loc") -> Graph:
    """Rows of ``value,region`` located on polygons from a regions side file."""
    t = _type(type_iri)
    g = Graph()
    for n, rec in enumerate(_records(rows, ("value", "region")), 1):
        ring = regions.get(rec["region"])
        if ring is None:
            raise IngestError(f"row {n}: unknown region {rec['region']!r}")
        node, loc = V(f"{prefix}{n}"), V(f"{loc_prefix}{n}")
        text = " ".join(repr(float(c)) for p in ring for c in p)
        g.update([
            (node, TYPE, t), (node, VALUE, _value(rec["value"])), (node, LOCATION, loc),
            (loc, TYPE, SURFACE), (loc, POSLIST, Literal(text)),
        ])
    return g


def ingest_object_data(rows, type_iri, dictionary: Dictionary, prefix="data",
                       model: Optional[Graph] = None) -> Graph:
    t = _type(type_iri)
    g = Graph()
    for n, rec in enumerate(_records(rows, ("value", "object_ref")), 1):
        target = dictionary.resolve(str(rec["object_ref"]), n, model)
        node = V(f"{prefix}{n}")
        g.update([(node, TYPE, t), (node, VALUE, _value(rec["value"])), (node, ABOUT, target)])
    return g


def ingest_relation_data(rows, type_iri, dictionary: Dictionary, prefix="data",
                         model: Optional[Graph] = None) -> Graph:
    t = _type(type_iri)
    g = Graph()
    for n, rec in enumerate(_records(rows, ("value", "arg1_ref", "arg2_ref")), 1):
        a1 = dictionary.resolve(str(rec["arg1_ref"]), n, model)
        a2 = dictionary.resolve(str(rec["arg2_ref"]), n, model)
        if a1 == a2:
            raise IngestError(f"row {n}: relation of {rec['arg1_ref']!r} to itself")
        node = V(f"{prefix}{n}")
        g.update([(node, TYPE, t), (node, VALUE, _value(rec["value"])),
                  (node, ARG1, a1), (node, ARG2, a2)])
    return g


def ingest_grid_field(source: Union[str, FieldGrid], type_iri=":FieldSample", prefix="sample",
                      coords="xcoord") -> tuple[Graph, FieldGrid]:
    """Grid file (or grid) -> one spatial data element per node, plus the grid itself."""
    grid = source if isinstance(source, FieldGrid) else read_grid_file(source)
    t = _type(type_iri)
    px, py, pz = COORD_PREDICATES[coords]
    g = Graph()
    nx, ny, nz = grid.dims
    n = 0
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                n += 1
                node, loc = V(f"{prefix}{n}"), V(f"{prefix}{n}loc")
                x, y, z = grid.node(i, j, k)
                g.update([(node, TYPE, t), (node, LOCATION, loc), (loc, TYPE, POINT),
                          (loc, px, Literal(x)), (loc, py, Literal(y)), (loc, pz, Literal(z))])
                if grid.is_vector:
                    vec = V(f"{prefix}{n}vec")
                    g.add((node, VALUE, vec))
                    g.add((vec, TYPE, VECTOR))
                    for pred, comp in zip(VECTOR_PREDICATES, grid.at(i, j, k)):
                        g.add((vec, pred, Literal(float(comp))))
                else:
                    g.add((node, VALUE, Literal(grid.at(i, j, k))))
    return g, grid


_SHAPE_OF = {LOCATION: "spatial", ABOUT: "object", ARG1: "relation", ARG2: "relation"}


def data_nodes(graph) -> list:
    """Subjects carrying a value or one of the shape discriminators, in graph order."""
    return list(dict.fromkeys(t.s for t in graph if t.p == VALUE or t.p in _SHAPE_OF))


def schema_kind(graph: Graph) -> Optional[str]:
    """Re-derive which data shape a graph follows: 'spatial', 'object' or 'relation'.

    Returns None for an empty dataset; raises IngestError on mixed shapes.
    """
    kinds = set()
    for node in data_nodes(graph):
        names = {_SHAPE_OF[p] for p in _SHAPE_OF if graph.value(node, p) is not None}
        if len(names) != 1:
            raise IngestError(f"data node {node} mixes or lacks :location/:about/:arg properties")
        if "relation" in names and (graph.value(node, ARG1) is None or graph.value(node, ARG2) is None):
            raise IngestError(f"relation data node {node} needs both :arg1 and :arg2")
        kinds |= names
    if len(kinds) > 1:
        raise IngestError(f"dataset mixes data shapes: {sorted(kinds)}")
    return kinds.pop() if kinds else None
