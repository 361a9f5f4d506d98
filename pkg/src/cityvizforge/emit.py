"""X3D / X3DOM emission and reconstruction of the abstract view from a scene.

World coordinates stay Z-up. Y-up primitives (cone, cylinder) get a
``rotation="1 0 0 1.5708"`` so their axis follows world Z, and a cone's
translation is its base point raised by half the height (X3D cones are
centred on their origin).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .citygml import GeometryIndex
from .errors import CvfError
from .ingest import ARG1, ARG2, COORD_PREDICATES, LOCATION, POSLIST, SURFACE, VALUE
from .layout.geometry import axis_angle_to_matrix
from .layout.scene import IDENTITY, ConcreteScene, SceneNode
from .numfmt import format_number
from .rdf import IRI, TYPE, Blank, Graph, Literal, V, iri, term_from_text, term_text
from .store import GraphView
from .technique import (COLOR, ENDPOINT, INPUT_DATA, RGB, EmitHints, coord_family, point_coords,
                        relation_type, visual_nodes, visual_type)

__all__ = ["format_number", "EmittedDocument", "emit_x3dom", "emit_x3d",
           "reconstruct_abstract", "vocabulary_subgraph"]

X3DOM_SCRIPT = "https://www.x3dom.org/download/x3dom.js"
X3DOM_CSS = "https://www.x3dom.org/download/x3dom.css"
Y_TO_Z = (1.0, 0.0, 0.0, math.pi / 2)
WINDOW_COLOR = (0.55, 0.75, 0.95)
PANEL_THICKNESS = 0.05


@dataclass(frozen=True)
class EmittedDocument:
    kind: str  # "x3d-xml" or "x3dom-html"
    text: str


def _nums(values) -> str:
    return " ".join(format_number(v) for v in values)


class _El:
    __slots__ = ("name", "attrs", "children")

    def __init__(self, name, attrs=None, children=()):
        self.name = name
        self.attrs = attrs or {}
        self.children = list(children)

    def render(self, lower: bool, depth: int, out: list):
        name = self.name.lower() if lower else self.name
        attrs = "".join(
            f' {k.lower() if lower else k}="{escape(str(v), {chr(34): "&quot;"})}"'
            for k, v in self.attrs.items())
        pad = "  " * depth
        if not self.children:
            out.append(f"{pad}<{name}{attrs}></{name}>")
            return
        out.append(f"{pad}<{name}{attrs}>")
        for c in self.children:
            c.render(lower, depth + 1, out)
        out.append(f"{pad}</{name}>")


def _appearance(color, transparency=0.0) -> _El:
    attrs = {"diffuseColor": _nums(color)}
    if transparency:
        attrs["transparency"] = format_number(transparency)
    return _El("Appearance", children=[_El("Material", attrs)])


def _shape(prov, color, transparency, geometry) -> _El:
    return _El("Shape", {"data-prov": prov}, [_appearance(color, transparency), geometry])


def _is_identity(orientation) -> bool:
    return orientation[3] == 0 or not any(orientation[:3])


def _rotation_between(a, b):
    """Axis-angle rotating unit vector a onto unit vector b."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    axis = np.cross(a, b)
    s, c = float(np.linalg.norm(axis)), float(np.dot(a, b))
    if s < 1e-12:
        return IDENTITY if c > 0 else (1.0, 0.0, 0.0, math.pi)
    axis /= s
    return (float(axis[0]), float(axis[1]), float(axis[2]), math.atan2(s, c))


def _emit_cone(n: SceneNode) -> _El:
    h = n.params["height"]
    geom_attrs = {"height": format_number(h)}
    if n.params.get("base_radius", 1.0) != 1.0:
        geom_attrs["bottomRadius"] = format_number(n.params["base_radius"])
    shape = _shape(n.prov, n.color, n.transparency, _El("Cone", geom_attrs))
    if _is_identity(n.orientation):
        x, y, z = n.position
        return _El("Transform", {"rotation": _nums(Y_TO_Z), "translation": _nums((x, y, z + h / 2))}, [shape])
    r = axis_angle_to_matrix(n.orientation)
    centre = np.asarray(n.position) + r @ np.array([0.0, 0.0, h / 2])
    inner = _El("Transform", {"rotation": _nums(Y_TO_Z)}, [shape])
    return _El("Transform", {"translation": _nums(centre), "rotation": _nums(n.orientation)}, [inner])


def _emit_sphere(n: SceneNode) -> _El:
    shape = _shape(n.prov, n.color, n.transparency, _El("Sphere", {"radius": format_number(n.params["radius"])}))
    return _El("Transform", {"translation": _nums(n.position)}, [shape])


def _emit_line(n: SceneNode) -> _El:
    p1, p2 = np.asarray(n.params["p1"], float), np.asarray(n.params["p2"], float)
    d = p2 - p1
    length = float(np.linalg.norm(d))
    rot = _rotation_between((0.0, 1.0, 0.0), d / length)
    cyl = _El("Cylinder", {"height": format_number(length), "radius": format_number(n.params["width"] / 2)})
    attrs = {"translation": _nums((p1 + p2) / 2)}
    if not _is_identity(rot):
        attrs = {"rotation": _nums(rot)} | attrs
    return _El("Transform", attrs, [_shape(n.prov, n.color, n.transparency, cyl)])


def _emit_panel(n: SceneNode) -> _El:
    w, h = n.params["width"], n.params["height"]
    board = _shape(n.prov, n.color, n.transparency, _El("Box", {"size": _nums((w, h, PANEL_THICKNESS))}))
    quoted = n.params["text"].replace("\\", "\\\\").replace('"', '\\"')
    text = _El("Text", {"string": f'"{quoted}"'},
               [_El("FontStyle", {"size": format_number(min(h / 4, 0.5)), "justify": '"MIDDLE" "MIDDLE"'})])
    label = _El("Transform", {"translation": _nums((0, 0, PANEL_THICKNESS))},
                [_shape(n.prov, (0.0, 0.0, 0.0), 0.0, text)])
    attrs = {"translation": _nums(n.position)}
    if not _is_identity(n.orientation):
        attrs["rotation"] = _nums(n.orientation)
    return _El("Transform", attrs, [board, label])


def _face_set(rings_or_tris, vertices) -> _El:
    index = " ".join(" ".join(str(i) for i in face) + " -1" for face in rings_or_tris)
    coords = ", ".join(_nums(v) for v in vertices)
    return _El("IndexedFaceSet", {"solid": "false", "coordIndex": index},
               [_El("Coordinate", {"point": coords})])


def _emit_mesh(n: SceneNode) -> _El:
    return _shape(n.prov, n.color, n.transparency, _face_set(n.params["triangles"], n.params["vertices"]))


def _emit_polyline(n: SceneNode) -> _El:
    pts = n.params["points"]
    lines = _El("LineSet", {"vertexCount": str(len(pts))},
                [_El("Coordinate", {"point": ", ".join(_nums(p) for p in pts)})])
    return _El("Shape", {"data-prov": n.prov},
               [_El("Appearance", children=[_El("Material", {"emissiveColor": _nums(n.color),
                                                             "diffuseColor": _nums(n.color)})]),
                lines])


_EMITTERS = {
    "cone": _emit_cone, "sphere": _emit_sphere, "line": _emit_line,
    "panel": _emit_panel, "mesh": _emit_mesh, "polyline": _emit_polyline,
}


def _building_shapes(geom: Optional[GeometryIndex], hints: EmitHints) -> list[_El]:
    out = []
    if geom is None:
        return out
    for key, surfaces in geom.entries.items():
        by_role: dict[str, list] = {}
        for s in surfaces:
            by_role.setdefault(s.role, []).extend(s.rings)
        for role, rings in by_role.items():
            vertices, faces = [], []
            for ring in rings:
                faces.append(range(len(vertices), len(vertices) + len(ring)))
                vertices.extend(ring)
            color = WINDOW_COLOR if role == "window" else hints.building_color
            out.append(_shape(term_text(key), color, 0.0, _face_set(faces, vertices)))
    return out


def _scene_elements(scene: ConcreteScene, geom, hints) -> list[_El]:
    items = _building_shapes(geom, hints)
    for n in scene.nodes:
        emitter = _EMITTERS.get(n.shape)
        if emitter is None:
            raise CvfError(f"cannot emit scene shape {n.shape!r}")
        items.append(emitter(n))
    return items


def _render(elements, lower, depth) -> list[str]:
    out: list[str] = []
    for e in elements:
        e.render(lower, depth, out)
    return out


def emit_x3dom(scene: ConcreteScene, geom: Optional[GeometryIndex] = None,
               hints: Optional[EmitHints] = None, title: str = "city-viz-forge scene") -> EmittedDocument:
    """Minimal HTML page with an inline X3DOM scene."""
    body = _render(_scene_elements(scene, geom, hints or EmitHints()), True, 0)
    lines = [
        "<!DOCTYPE html>",
        "<html>",
        "<head>",
        '<meta charset="utf-8">',
        f"<title>{escape(title)}</title>",
        f'<script type="text/javascript" src="{X3DOM_SCRIPT}"></script>',
        f'<link rel="stylesheet" type="text/css" href="{X3DOM_CSS}">',
        "</head>",
        "<body>",
        '<x3d width="960px" height="640px">',
        "<scene>",
        *body,
        "</scene>",
        "</x3d>",
        "</body>",
        "</html>",
    ]
    return EmittedDocument("x3dom-html", "\n".join(lines) + "\n")


def emit_x3d(scene: ConcreteScene, geom: Optional[GeometryIndex] = None,
             hints: Optional[EmitHints] = None) -> EmittedDocument:
    """Standalone X3D XML document with the same content as :func:`emit_x3dom`."""
    body = _render(_scene_elements(scene, geom, hints or EmitHints()), False, 2)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<X3D profile="Immersive" version="3.3">',
        "  <Scene>",
        *body,
        "  </Scene>",
        "</X3D>",
    ]
    return EmittedDocument("x3d-xml", "\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# abstraction principle
#
# Both functions below produce the same normal form: per visual node its
# type, literal visual properties, a :Color node, :endpoint links, and a
# :location that is an IRI reference, a point node, a surface node or a
# relation node; complex nodes list one :inputData node per sample value.

SHAPE_TYPES = {"sphere": "Sphere", "cone": "Cone", "line": "Line", "panel": "Panel",
               "mesh": "IsoSurface", "polyline": "FlowLines"}


class _NormalForm:
    def __init__(self):
        self.graph = Graph()
        self.count = 0

    def blank(self) -> Blank:
        self.count += 1
        return Blank(f"n{self.count}")

    def point(self, family, coords) -> Blank:
        b = self.blank()
        for pred, c in zip(COORD_PREDICATES[family or "xcoord"], coords):
            self.graph.add((b, pred, Literal(float(c))))
        return b

    def add(self, node, type_iri, props, color, endpoints, location, inputs):
        g = self.graph
        g.add((node, TYPE, type_iri))
        for p, lit in props:
            g.add((node, p, lit))
        if color is not None:
            c = self.blank()
            g.add((node, COLOR, c))
            g.add((c, TYPE, V("Color")))
            for pred, v in zip(RGB, color):
                g.add((c, pred, Literal(float(v))))
        for e in endpoints:
            g.add((node, ENDPOINT, self.point(e[1], e[2]) if isinstance(e, tuple) else e))
        if location is not None:
            kind = location[0]
            if kind == "ref":
                g.add((node, LOCATION, location[1]))
            elif kind == "point":
                g.add((node, LOCATION, self.point(location[1], location[2])))
            elif kind == "surface":
                s = self.blank()
                g.update([(node, LOCATION, s), (s, TYPE, SURFACE), (s, POSLIST, Literal(location[1]))])
            else:
                _, rel, obj, self_arg = location
                r = self.blank()
                g.update([(node, LOCATION, r), (r, TYPE, rel),
                          (r, ARG1, node if self_arg == 1 else obj),
                          (r, ARG2, obj if self_arg == 1 else node)])
        for value in inputs:
            d = self.blank()
            g.add((node, INPUT_DATA, d))
            g.add((d, VALUE, value))


def _abstract_location(abstract, lookup, node):
    loc = abstract.value(node, LOCATION)
    if loc is None:
        return None
    rel = relation_type(abstract, loc)
    if rel is not None:
        a1, a2 = abstract.value(loc, ARG1), abstract.value(loc, ARG2)
        return ("relation", rel.iri, a2 if a1 == node else a1, 1 if a1 == node else 2)
    if isinstance(loc, IRI):
        return ("ref", loc)
    coords = point_coords(lookup, loc)
    if coords is not None:
        return ("point", coord_family(lookup, loc), coords)
    text = lookup.value(loc, POSLIST)
    return ("surface", text.value if text is not None else "")


def vocabulary_subgraph(abstract: Graph, context=None) -> Graph:
    """Normal form of the vocabulary-typed part of an abstract graph."""
    lookup = GraphView([abstract] + ([context] if context is not None else []))
    nf = _NormalForm()
    for node in dict.fromkeys(visual_nodes(abstract)):
        entry = visual_type(abstract, node)
        props = [(t.p, t.o) for t in abstract.triples(node, None, None)
                 if t.p != TYPE and isinstance(t.o, Literal)]
        c = abstract.value(node, COLOR)
        color = tuple(abstract.value(c, p).value for p in RGB) if c is not None else None
        endpoints = []
        for e in abstract.objects(node, ENDPOINT):
            if isinstance(e, IRI):
                endpoints.append(e)
            else:
                endpoints.append(("point", coord_family(lookup, e), point_coords(lookup, e)))
        inputs = [abstract.value(d, VALUE) for d in abstract.objects(node, INPUT_DATA)]
        subject = node if isinstance(node, IRI) else nf.blank()
        nf.add(subject, entry.iri, props, color, endpoints,
               _abstract_location(abstract, lookup, node), inputs)
    return nf.graph


def _scene_location(meta, node: SceneNode):
    loc = meta.get("location")
    if loc is None:
        return None
    kind = loc["kind"]
    if kind == "relation":
        return ("relation", V(loc["relation"]), term_from_text(loc["object"]), loc["self_arg"])
    if kind == "ref":
        return ("ref", term_from_text(loc["ref"]))
    if kind == "point":
        return ("point", loc["family"], node.position)
    return ("surface", loc["poslist"])


def reconstruct_abstract(scene: ConcreteScene) -> Graph:
    """Project a concrete scene back to the abstract normal form.

    Geometry supplies what it can (radius, height, point positions, colours,
    line endpoints); ``meta`` supplies references and relation kinds.
    """
    groups: dict[str, list[SceneNode]] = {}
    for n in scene.nodes:
        if not n.prov:
            raise CvfError(f"{n.shape} scene node without provenance")
        groups.setdefault(n.prov, []).append(n)
    nf = _NormalForm()
    for prov, nodes in groups.items():
        first = nodes[0]
        meta = next((n.meta for n in nodes if n.meta), {})
        type_iri = V(SHAPE_TYPES[first.shape])
        props = []
        for p, v in meta.get("props", []):
            pred = iri(p)
            local = pred.value.rsplit("#", 1)[-1]
            if local in ("radius", "height") and local in first.params:
                v = first.params[local]
            props.append((pred, Literal(v)))
        color = first.color if meta.get("color") else None
        endpoints = []
        for ref, p in zip(meta.get("endpoints", []), ("p1", "p2")):
            endpoints.append(("point", ref["family"], first.params[p]) if isinstance(ref, dict)
                             else term_from_text(ref))
        inputs = [term_from_text(v) for v in meta.get("inputs", [])]
        subject = nf.blank() if prov.startswith("_:") else term_from_text(prov)
        nf.add(subject, type_iri, props, color, endpoints, _scene_location(meta, first), inputs)
    return nf.graph
