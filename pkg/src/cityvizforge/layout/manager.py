"""The layout manager: abstract visual graph -> concrete scene.

Concrete builders are registered per vocabulary type and relation solvers
per relation type, so an extended vocabulary only needs matching entries in
:data:`BUILDERS` / :data:`RELATION_SOLVERS`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from ..citygml import GeometryIndex, parse_poslist
from ..errors import CityGMLError, LayoutError
from ..fields import grid_from_samples, resample_idw
from ..ingest import ARG1, ARG2, LOCATION, POSLIST, SURFACE, VALUE, VECTOR_PREDICATES
from ..numfmt import format_number
from ..rdf import IRI, TYPE, Graph, Literal, V, term_text
from ..store import GraphView
from ..technique import (COLOR, ENDPOINT, INPUT_DATA, RGB, EmitHints, LayoutParams, coord_family,
                         point_coords, relation_type, visual_nodes, visual_type)
from . import geometry
from .isosurface import compute_isosurface
from .scene import ConcreteScene, SceneNode
from .streamlines import integrate_streamlines

# default panel stance: upright, facing -y
PANEL_UPRIGHT = (1.0, 0.0, 0.0, math.pi / 2)


@dataclass(frozen=True)
class Placement:
    point: tuple[float, float, float]
    anchor: str  # "natural" (the shape's own origin), "bottom" or "center"
    orientation: Optional[tuple[float, float, float, float]] = None


@dataclass
class LayoutContext:
    abstract: Graph
    geom: GeometryIndex
    params: LayoutParams
    emit: EmitHints
    lookup: GraphView  # abstract + datasets + model, for resolving references


def _surfaces(ctx: LayoutContext, ref, what):
    try:
        surfaces = ctx.geom.lookup(ref)
    except KeyError:
        raise LayoutError(f"{what}: city object {term_text(ref)} has no geometry in the model") from None
    if not surfaces:
        raise LayoutError(f"{what}: city object {term_text(ref)} has no surfaces")
    return surfaces


# --------------------------------------------------------------------------
# relation solvers: (surfaces, footprint (w, h), params, name) -> Placement


def _above(surfaces, footprint, params, name):
    return Placement(geometry.solve_above(surfaces, params.clearance, name), "bottom")


def _near(surfaces, footprint, params, name):
    p, _, orientation = geometry.solve_near(surfaces, footprint, params.near_distance, name)
    return Placement(p, "center", orientation)


def _inside(surfaces, footprint, params, name):
    return Placement(geometry.solve_inside(surfaces, name), "center")


def _front_of(surfaces, footprint, params, name):
    return geometry.solve_front_of(surfaces, name)


RELATION_SOLVERS: dict[str, Callable] = {
    "aboveRelation": _above,
    "nearRelation": _near,
    "insideRelation": _inside,
    "frontOfRelation": _front_of,
}


def register_relation_solver(name: str, solver: Callable) -> None:
    RELATION_SOLVERS[name] = solver


# --------------------------------------------------------------------------
# location resolution


def resolve_location(ctx: LayoutContext, node, footprint) -> tuple[Placement, dict]:
    """Placement for a located object plus the meta record describing its location."""
    loc = ctx.abstract.value(node, LOCATION)
    if loc is None:
        raise LayoutError(f"{term_text(node)} has no :location")
    rel = relation_type(ctx.abstract, loc)
    if rel is not None:
        a1, a2 = ctx.abstract.value(loc, ARG1), ctx.abstract.value(loc, ARG2)
        target = a2 if a1 == node else a1
        solver = RELATION_SOLVERS.get(rel.name)
        if solver is None:
            raise LayoutError(f"no layout solver registered for {rel.name}")
        surfaces = _surfaces(ctx, target, f"{rel.name} of {term_text(node)}")
        try:
            placement = solver(surfaces, footprint, ctx.params, term_text(target))
        except LayoutError as exc:
            raise LayoutError(f"{term_text(node)}: {exc}") from None
        meta = {"kind": "relation", "relation": rel.name, "object": term_text(target),
                "self_arg": 1 if a1 == node else 2}
        return placement, meta
    coords = point_coords(ctx.lookup, loc)
    if coords is not None:
        meta = ({"kind": "ref", "ref": term_text(loc)} if isinstance(loc, IRI)
                else {"kind": "point", "family": coord_family(ctx.lookup, loc)})
        return Placement(coords, "natural"), meta
    if SURFACE in ctx.lookup.objects(loc, TYPE):
        text = ctx.lookup.value(loc, POSLIST)
        try:
            ring = parse_poslist(text.value, f"on location {term_text(loc)}")
        except (CityGMLError, AttributeError) as exc:
            raise LayoutError(f"{term_text(node)}: bad surface location: {exc}") from None
        meta = ({"kind": "ref", "ref": term_text(loc)} if isinstance(loc, IRI)
                else {"kind": "surface", "poslist": text.value})
        return Placement(geometry.region_to_point(ring), "natural"), meta
    raise LayoutError(f"{term_text(node)}: cannot resolve :location {term_text(loc)}")


def _placed(placement: Placement, bottom: float, center: float):
    """Shape origin from a placement; ``bottom``/``center`` are the z offsets
    from a bottom or centre anchor to the shape's own origin."""
    x, y, z = placement.point
    dz = {"natural": 0.0, "bottom": bottom, "center": center}[placement.anchor]
    return (x, y, z + dz)


def _literal_props(graph, node) -> list:
    out = []
    for t in graph.triples(node, None, None):
        if t.p != TYPE and isinstance(t.o, Literal):
            out.append([term_text(t.p), t.o.value])
    return out


def _color(ctx, node):
    c = ctx.abstract.value(node, COLOR)
    if c is None:
        return tuple(ctx.emit.color), False
    return tuple(float(ctx.abstract.value(c, p).value) for p in RGB), True


def _base_meta(ctx, node) -> dict:
    return {"props": _literal_props(ctx.abstract, node)}


def _number(ctx, node, local):
    v = ctx.abstract.value(node, V(local))
    if not (isinstance(v, Literal) and v.is_number):
        raise LayoutError(f"{term_text(node)}: :{local} is not a number")
    return v.value


# --------------------------------------------------------------------------
# builders: (ctx, node) -> list[SceneNode]


def build_sphere(ctx, node):
    r = _number(ctx, node, "radius")
    placement, loc_meta = resolve_location(ctx, node, (2 * r, 2 * r))
    color, has_color = _color(ctx, node)
    meta = _base_meta(ctx, node) | {"location": loc_meta, "color": has_color}
    return [SceneNode("sphere", {"radius": r}, _placed(placement, r, 0.0), term_text(node),
                      color=color, transparency=ctx.emit.transparency, meta=meta)]


def build_cone(ctx, node):
    h = _number(ctx, node, "height")
    base = ctx.params.cone_base_radius
    placement, loc_meta = resolve_location(ctx, node, (2 * base, h))
    color, has_color = _color(ctx, node)
    meta = _base_meta(ctx, node) | {"location": loc_meta, "color": has_color}
    return [SceneNode("cone", {"height": h, "base_radius": base}, _placed(placement, 0.0, -h / 2),
                      term_text(node), color=color, transparency=ctx.emit.transparency, meta=meta)]


def build_panel(ctx, node):
    w, h = ctx.params.panel_width, ctx.params.panel_height
    content = ctx.abstract.value(node, V("content"))
    text = format_number(content.value) if content.is_number else content.value
    placement, loc_meta = resolve_location(ctx, node, (w, h))
    color, has_color = _color(ctx, node)
    meta = _base_meta(ctx, node) | {"location": loc_meta, "color": has_color}
    orientation = placement.orientation or PANEL_UPRIGHT
    return [SceneNode("panel", {"width": w, "height": h, "text": text}, _placed(placement, h / 2, 0.0),
                      term_text(node), orientation=tuple(orientation), color=color,
                      transparency=ctx.emit.transparency, meta=meta)]


def _endpoint(ctx, node, e):
    if isinstance(e, IRI) and e in ctx.geom:
        return geometry.surfaces_centroid(_surfaces(ctx, e, f"endpoint of {term_text(node)}")), term_text(e)
    coords = point_coords(ctx.lookup, e)
    if coords is None:
        raise LayoutError(f"{term_text(node)}: endpoint {term_text(e)} is neither a city object nor a point")
    return coords, (term_text(e) if isinstance(e, IRI) else {"family": coord_family(ctx.lookup, e)})


def build_line(ctx, node):
    ends = ctx.abstract.objects(node, ENDPOINT)
    if len(ends) != 2:
        raise LayoutError(f"{term_text(node)}: a line needs 2 endpoints, found {len(ends)}")
    if all(isinstance(e, IRI) and e in ctx.geom for e in ends):
        p1, p2 = geometry.relation_endpoints(*(_surfaces(ctx, e, f"endpoint of {term_text(node)}")
                                               for e in ends))
        refs = [term_text(e) for e in ends]
    else:
        (p1, r1), (p2, r2) = (_endpoint(ctx, node, e) for e in ends)
        refs = [r1, r2]
    if p1 == p2:
        raise LayoutError(f"{term_text(node)}: both endpoints resolve to the same point {p1}")
    color, has_color = _color(ctx, node)
    meta = _base_meta(ctx, node) | {"endpoints": refs, "color": has_color}
    return [SceneNode("line", {"p1": list(p1), "p2": list(p2), "width": ctx.params.line_width}, tuple(p1),
                      term_text(node), color=color, transparency=ctx.emit.transparency, meta=meta)]


def _samples(ctx, node, vector: bool):
    points, values, inputs = [], [], []
    for d in ctx.abstract.objects(node, INPUT_DATA):
        loc = ctx.abstract.value(d, LOCATION)
        val = ctx.abstract.value(d, VALUE)
        coords = point_coords(ctx.lookup, loc) if loc is not None else None
        if coords is None:
            raise LayoutError(f"{term_text(node)}: sample {term_text(d)} has no point location")
        if vector:
            comps = [ctx.lookup.value(val, p) for p in VECTOR_PREDICATES] if not isinstance(val, Literal) else []
            if len(comps) != 3 or not all(isinstance(c, Literal) and c.is_number for c in comps):
                raise LayoutError(f"{term_text(node)}: sample {term_text(d)} has no vector value")
            values.append([c.value for c in comps])
        else:
            if not (isinstance(val, Literal) and val.is_number):
                raise LayoutError(f"{term_text(node)}: sample {term_text(d)} has a non-numeric value")
            values.append(val.value)
        points.append(coords)
        inputs.append(term_text(val))
    if not points:
        raise LayoutError(f"{term_text(node)} has no input samples")
    p = ctx.params
    if p.grid_dims is not None:
        grid = resample_idw(points, values, p.grid_origin, p.grid_spacing, p.grid_dims, p.idw_power)
    else:
        grid = grid_from_samples(points, values)
        if grid is None:
            raise LayoutError(f"{term_text(node)}: samples are not on a regular lattice; "
                              "set grid_origin, grid_spacing and grid_dims to resample them")
    return grid, inputs


def build_isosurface(ctx, node):
    levels = ctx.params.iso_levels
    if not levels:
        raise LayoutError(f"{term_text(node)}: IsoSurface needs iso_levels")
    grid, inputs = _samples(ctx, node, vector=False)
    out = []
    for i, (level, mesh) in enumerate(compute_isosurface(grid, levels)):
        meta = {"inputs": inputs} if i == 0 else {}
        out.append(SceneNode("mesh", {"level": level, "vertices": [list(v) for v in mesh.vertices],
                                      "triangles": [list(t) for t in mesh.triangles]},
                             (0.0, 0.0, 0.0), term_text(node), color=tuple(ctx.emit.color),
                             transparency=ctx.emit.transparency, meta=meta))
    return out


def build_flowlines(ctx, node):
    seeds = ctx.params.seeds
    if not seeds:
        raise LayoutError(f"{term_text(node)}: FlowLines needs seeds")
    grid, inputs = _samples(ctx, node, vector=True)
    lines = integrate_streamlines(grid, seeds, ctx.params.streamline_step, ctx.params.max_length)
    out = []
    for i, pts in enumerate(lines):
        meta = {"inputs": inputs} if i == 0 else {}
        out.append(SceneNode("polyline", {"points": [list(p) for p in pts], "width": ctx.params.line_width},
                             tuple(pts[0]), term_text(node), color=tuple(ctx.emit.color),
                             transparency=ctx.emit.transparency, meta=meta))
    return out


BUILDERS: dict[str, Callable] = {
    "Sphere": build_sphere,
    "Cone": build_cone,
    "Panel": build_panel,
    "Line": build_line,
    "IsoSurface": build_isosurface,
    "FlowLines": build_flowlines,
}


def register_builder(type_name: str, builder: Callable) -> None:
    BUILDERS[type_name] = builder


def layout_scene(abstract: Graph, geom: GeometryIndex, params: Optional[LayoutParams] = None,
                 context=None, emit: Optional[EmitHints] = None, source: str = "") -> ConcreteScene:
    """Resolve every abstract visual node to scene nodes, in abstract-graph order.

    ``context`` holds the dataset and model graphs that location references
    point into.
    """
    graphs = [abstract]
    if context is not None:
        graphs += list(context.graphs) if isinstance(context, GraphView) else [context]
    ctx = LayoutContext(abstract, geom, params or LayoutParams(), emit or EmitHints(), GraphView(graphs))
    scene = ConcreteScene(source=source)
    for node in dict.fromkeys(visual_nodes(abstract)):
        entry = visual_type(abstract, node)
        builder = BUILDERS.get(entry.name)
        if builder is None:
            raise LayoutError(f"{term_text(node)}: type {entry.name} has no concrete builder registered")
        scene.nodes.extend(builder(ctx, node))
    scene.check()
    return scene
