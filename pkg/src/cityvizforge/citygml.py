"""CityGML subset -> RDF graph, and the geometry index used for layout.

The XML is read with the alternating class/property convention: elements
at even depth (the ``CityModel`` root, ``Building``, ``gml:Polygon`` ...)
become nodes, elements at odd depth (``boundedBy``, ``gml:exterior`` ...)
become predicates. Elements carrying ``gml:id`` map to IRIs in the default
namespace, everything else to blank nodes.
"""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional

from .errors import CityGMLError
from .rdf import CGML, GML, IRI, TYPE, VOCAB, Blank, Graph, Literal, Term

GML_NS = "http://www.opengis.net/gml"
XLINK_NS = "http://www.w3.org/1999/xlink"
CITYGML_NS_PREFIX = "http://www.opengis.net/citygml/"

SUPPORTED_CITYGML_CLASSES = {
    "CityModel", "Building", "GroundSurface", "RoofSurface", "WallSurface",
    "ClosureSurface", "OuterCeilingSurface", "OuterFloorSurface", "Window", "Door",
}
SUPPORTED_GML_CLASSES = {"MultiSurface", "CompositeSurface", "Solid", "Polygon", "LinearRing", "Envelope"}
SUPPORTED_GML_PROPERTIES = {
    "boundedBy", "surfaceMember", "exterior", "posList", "name", "description",
    "lowerCorner", "upperCorner",
}

ROLE_BY_TYPE = {
    "GroundSurface": "ground",
    "RoofSurface": "roof",
    "WallSurface": "wall",
    "Window": "window",
    "Door": "other",
    "ClosureSurface": "other",
    "OuterCeilingSurface": "other",
    "OuterFloorSurface": "other",
}

Point3 = tuple[float, float, float]


def _split(tag: str) -> tuple[Optional[str], str]:
    if tag.startswith("{"):
        ns, local = tag[1:].split("}", 1)
        return ns, local
    return None, tag


def qname_iri(tag: str) -> IRI:
    ns, local = _split(tag)
    if ns is None:
        return IRI(VOCAB + local)
    if ns.startswith(CITYGML_NS_PREFIX):
        return IRI(CGML + local)
    if ns == GML_NS:
        return IRI(GML + local)
    sep = "" if ns.endswith(("#", "/")) else "#"
    return IRI(ns + sep + local)


def gml_id_iri(gml_id: str) -> IRI:
    return IRI(VOCAB + gml_id)


@dataclass
class CityModelGraph:
    graph: Graph
    source_name: str = ""


def parse_citygml(xml_text: str, source_name: str = "") -> CityModelGraph:
    """Convert CityGML text into a graph; see the module docstring."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise CityGMLError(f"malformed XML at line {line}, column {col}: {exc}") from None
    ns, local = _split(root.tag)
    if local != "CityModel" or not (ns or "").startswith(CITYGML_NS_PREFIX):
        raise CityGMLError(f"root element must be a CityGML CityModel, found {root.tag}")

    graph = Graph()
    ids: dict[str, IRI] = {}
    hrefs: list[tuple[str, str]] = []
    counter = 0

    def node_for(elem, path) -> Term:
        nonlocal counter
        gid = elem.get(f"{{{GML_NS}}}id")
        if gid is None:
            counter += 1
            return Blank(f"m{counter}")
        if gid in ids:
            raise CityGMLError(f"duplicate gml:id {gid!r} at {path}")
        ids[gid] = gml_id_iri(gid)
        return ids[gid]

    def check_class(elem, path):
        ns, local = _split(elem.tag)
        if ns == GML_NS:
            if local not in SUPPORTED_GML_CLASSES:
                raise CityGMLError(f"unsupported geometry element gml:{local} at {path}")
        elif (ns or "").startswith(CITYGML_NS_PREFIX):
            if local not in SUPPORTED_CITYGML_CLASSES:
                raise CityGMLError(f"unsupported CityGML element {local} at {path}")
        else:
            raise CityGMLError(f"unsupported element {elem.tag} at {path}")

    def check_property(elem, parent, path):
        ns, local = _split(elem.tag)
        if ns == GML_NS and local not in SUPPORTED_GML_PROPERTIES:
            if local == "interior":
                raise CityGMLError(f"unsupported geometry element gml:interior (interior rings) at {path}")
            raise CityGMLError(f"unsupported geometry element gml:{local} at {path}")
        if _split(parent.tag) == (GML_NS, "LinearRing") and (ns, local) != (GML_NS, "posList"):
            raise CityGMLError(f"unsupported geometry element {local} at {path}; rings need gml:posList")

    def visit_class(elem, path) -> Term:
        check_class(elem, path)
        node = node_for(elem, path)
        graph.add((node, TYPE, qname_iri(elem.tag)))
        for child in elem:
            if not isinstance(child.tag, str):
                continue
            cpath = f"{path}/{_split(child.tag)[1]}"
            check_property(child, elem, cpath)
            pred = qname_iri(child.tag)
            members = [c for c in child if isinstance(c.tag, str)]
            if len(members) > 1:
                raise CityGMLError(f"property element at {cpath} has {len(members)} children; "
                                   "expected alternating class/property structure")
            if members:
                graph.add((node, pred, visit_class(members[0], f"{cpath}/{_split(members[0].tag)[1]}")))
                continue
            href = child.get(f"{{{XLINK_NS}}}href")
            if href is not None:
                hrefs.append((href, cpath))
                graph.add((node, pred, gml_id_iri(href.lstrip("#"))))
                continue
            text = " ".join((child.text or "").split())
            if _split(child.tag) == (GML_NS, "posList"):
                dim = child.get("srsDimension", "3")
                if dim != "3":
                    raise CityGMLError(f"srsDimension {dim} not supported at {cpath}")
                n = len(text.split())
                if n % 3:
                    raise CityGMLError(f"posList at {cpath} has {n} values, not a multiple of 3")
            graph.add((node, pred, Literal(text)))
        return node

    visit_class(root, _split(root.tag)[1])
    for href, path in hrefs:
        if href.lstrip("#") not in ids:
            raise CityGMLError(f"xlink:href {href!r} at {path} does not resolve to a gml:id")
    return CityModelGraph(graph, source_name)


# --------------------------------------------------------------------------
# geometry index

@dataclass(frozen=True)
class Surface:
    """Role-tagged polygon group. Rings are implicitly closed (no repeated end point)."""
    role: str
    rings: tuple[tuple[Point3, ...], ...]
    source: Optional[Term] = None


@dataclass
class GeometryIndex:
    entries: dict[Term, list[Surface]] = field(default_factory=dict)
    parts: dict[Term, list[Surface]] = field(default_factory=dict)

    def lookup(self, key: Term) -> list[Surface]:
        if key in self.entries:
            return self.entries[key]
        if key in self.parts:
            return self.parts[key]
        raise KeyError(key)

    def __contains__(self, key):
        return key in self.entries or key in self.parts

    def surfaces(self, key: Term, role: Optional[str] = None) -> list[Surface]:
        return [s for s in self.lookup(key) if role is None or s.role == role]


def parse_poslist(text: str, where="") -> tuple[Point3, ...]:
    parts = text.split()
    try:
        values = [float(v) for v in parts]
    except ValueError:
        bad = next(v for v in parts if not _is_float(v))
        raise CityGMLError(f"unparsable posList token {bad!r} {where}".strip()) from None
    if len(values) % 3:
        raise CityGMLError(f"posList length {len(values)} is not a multiple of 3 {where}".strip())
    if not all(math.isfinite(v) for v in values):
        raise CityGMLError(f"non-finite coordinate in posList {where}".strip())
    pts = [tuple(values[i:i + 3]) for i in range(0, len(values), 3)]
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    if len(set(pts)) < 3:
        raise CityGMLError(f"ring with fewer than 3 distinct vertices {where}".strip())
    return tuple(pts)


def _is_float(v):
    try:
        float(v)
        return True
    except ValueError:
        return False


def _newell(ring) -> tuple[float, float, float]:
    nx = ny = nz = 0.0
    n = len(ring)
    for i in range(n):
        x0, y0, z0 = ring[i]
        x1, y1, z1 = ring[(i + 1) % n]
        nx += (y0 - y1) * (z0 + z1)
        ny += (z0 - z1) * (x0 + x1)
        nz += (x0 - x1) * (y0 + y1)
    return nx, ny, nz


def _role_from_normal(ring) -> str:
    nx, ny, nz = _newell(ring)
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    if norm == 0:
        return "other"
    c = nz / norm
    if c > 0.7:
        return "roof"
    if c < -0.7:
        return "ground"
    return "wall"


def extract_geometry_index(model) -> GeometryIndex:
    """Collect role-tagged rings per Building (``entries``) and per identified part."""
    graph = model.graph if isinstance(model, CityModelGraph) else model
    building = IRI(CGML + "Building")
    linear_ring = IRI(GML + "LinearRing")
    polygon = IRI(GML + "Polygon")
    poslist = IRI(GML + "posList")
    index = GeometryIndex()

    def local_type(node):
        for t in graph.types(node):
            if isinstance(t, IRI) and t.value.startswith(CGML):
                name = t.value[len(CGML):]
                if name in ROLE_BY_TYPE:
                    return name
        return None

    for b in graph.subjects(TYPE, building):
        surfaces: list[Surface] = []
        seen = set()

        def walk(node, role, acc, owner):
            if node in seen:
                return
            seen.add(node)
            kind = local_type(node)
            own = None
            types = graph.types(node)
            if kind is not None:
                role, own = ROLE_BY_TYPE[kind], []
            elif acc is None and (polygon in types or linear_ring in types):
                own = []
            if own is not None:
                acc, owner = own, node
                # reserve the slot now so enclosing surfaces precede nested openings
                slot = len(surfaces)
                surfaces.append(None)
            if linear_ring in types:
                for lit in graph.objects(node, poslist):
                    acc.append(parse_poslist(lit.value, f"on ring {node}"))
            for t in graph.triples(node, None, None):
                if t.p != TYPE and isinstance(t.o, (IRI, Blank)):
                    walk(t.o, role, acc, owner)
            if own:
                surf = Surface(role or _role_from_normal(own[0]), tuple(own), owner)
                surfaces[slot] = surf
                if kind is not None and isinstance(node, IRI):
                    index.parts[node] = [surf]

        for t in graph.triples(b, None, None):
            if t.p != TYPE and isinstance(t.o, (IRI, Blank)):
                walk(t.o, None, None, None)
        index.entries[b] = [s for s in surfaces if s is not None]
    return index
