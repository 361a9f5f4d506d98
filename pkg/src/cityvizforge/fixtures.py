"""Deterministic synthetic city and datasets for tests and demos.

The city is a grid of LOD2 gabled-roof buildings: one ground polygon,
four walls (two rectangles, two gable pentagons), two roof slopes, a door,
and a row of windows per storey on every wall. Every surface, window and
door carries a gml:id so datasets can refer to them.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .fields import FieldGrid, write_grid_file

CORE_NS = "http://www.opengis.net/citygml/2.0"
BLDG_NS = "http://www.opengis.net/citygml/building/2.0"
GML_NS = "http://www.opengis.net/gml"

STOREY_HEIGHT = 3.0
WINDOW_OFFSET = 0.05  # windows sit slightly proud of their wall


@dataclass(frozen=True)
class CityConfig:
    n_buildings: int = 100
    seed: int = 7
    spacing: float = 30.0
    min_storeys: int = 4
    max_storeys: int = 6


@dataclass
class BuildingInfo:
    gml_id: str
    footprint: tuple[float, float, float, float]  # x0, y0, x1, y1
    eave: float
    ridge: float
    windows: list


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _poslist(ring) -> str:
    closed = list(ring) + [ring[0]]
    return " ".join(_fmt(c) for p in closed for c in p)


def _polygon_xml(ring, indent) -> list[str]:
    pad = " " * indent
    return [
        f"{pad}<gml:MultiSurface>",
        f"{pad}  <gml:surfaceMember>",
        f"{pad}    <gml:Polygon>",
        f"{pad}      <gml:exterior>",
        f"{pad}        <gml:LinearRing>",
        f'{pad}          <gml:posList srsDimension="3">{_poslist(ring)}</gml:posList>',
        f"{pad}        </gml:LinearRing>",
        f"{pad}      </gml:exterior>",
        f"{pad}    </gml:Polygon>",
        f"{pad}  </gml:surfaceMember>",
        f"{pad}</gml:MultiSurface>",
    ]


def _surface_xml(kind, gid, ring, openings=()) -> list[str]:
    lines = ["      <bldg:boundedBy>", f'        <bldg:{kind} gml:id="{gid}">',
             "          <bldg:lod2MultiSurface>"]
    lines += _polygon_xml(ring, 12)
    lines.append("          </bldg:lod2MultiSurface>")
    for okind, oid, oring in openings:
        lines += ["          <bldg:opening>", f'            <bldg:{okind} gml:id="{oid}">',
                  "              <bldg:lod3MultiSurface>"]
        lines += _polygon_xml(oring, 16)
        lines += ["              </bldg:lod3MultiSurface>", f"            </bldg:{okind}>",
                  "          </bldg:opening>"]
    lines += [f"        </bldg:{kind}>", "      </bldg:boundedBy>"]
    return lines


def _rect_on_wall(wall, a0, a1, z0, z1):
    """Window rectangle on one of the four walls, wound with the wall's outward normal."""
    side, coord = wall
    o = WINDOW_OFFSET
    if side == "south":
        y = coord - o
        return [(a0, y, z0), (a1, y, z0), (a1, y, z1), (a0, y, z1)]
    if side == "north":
        y = coord + o
        return [(a1, y, z0), (a0, y, z0), (a0, y, z1), (a1, y, z1)]
    if side == "west":
        x = coord - o
        return [(x, a1, z0), (x, a0, z0), (x, a0, z1), (x, a1, z1)]
    x = coord + o
    return [(x, a0, z0), (x, a1, z0), (x, a1, z1), (x, a0, z1)]


def _slots(lo, hi, count, width):
    step = (hi - lo) / count
    return [(lo + (i + 0.5) * step - width / 2, lo + (i + 0.5) * step + width / 2) for i in range(count)]


def building_xml(n: int, rng: random.Random, origin) -> tuple[list[str], BuildingInfo]:
    bid = f"b{n}"
    w = rng.uniform(10.0, 16.0)
    d = rng.uniform(8.0, 11.0)
    storeys = rng.randint(4, 6)
    x0, y0 = origin
    x1, y1 = x0 + w, y0 + d
    ym = (y0 + y1) / 2
    eave = storeys * STOREY_HEIGHT
    ridge = eave + rng.uniform(2.5, 4.0)

    ground = [(x0, y0, 0), (x0, y1, 0), (x1, y1, 0), (x1, y0, 0)]
    walls = {
        "south": [(x0, y0, 0), (x1, y0, 0), (x1, y0, eave), (x0, y0, eave)],
        "east": [(x1, y0, 0), (x1, y1, 0), (x1, y1, eave), (x1, ym, ridge), (x1, y0, eave)],
        "north": [(x1, y1, 0), (x0, y1, 0), (x0, y1, eave), (x1, y1, eave)],
        "west": [(x0, y1, 0), (x0, y0, 0), (x0, y0, eave), (x0, ym, ridge), (x0, y1, eave)],
    }
    roofs = [
        [(x0, y0, eave), (x1, y0, eave), (x1, ym, ridge), (x0, ym, ridge)],
        [(x1, y1, eave), (x0, y1, eave), (x0, ym, ridge), (x1, ym, ridge)],
    ]
    spans = {"south": (x0, x1, y0), "north": (x0, x1, y1), "west": (y0, y1, x0), "east": (y0, y1, x1)}
    per_storey = {"south": max(3, int(w // 2.5)), "north": max(3, int(w // 2.5)),
                  "west": max(2, int(d // 3)), "east": max(2, int(d // 3))}

    windows = []
    lines = [f'  <core:cityObjectMember>', f'    <bldg:Building gml:id="{bid}">',
             f"      <gml:name>Building {n}</gml:name>",
             f"      <bldg:storeysAboveGround>{storeys}</bldg:storeysAboveGround>",
             f'      <bldg:measuredHeight uom="m">{_fmt(ridge)}</bldg:measuredHeight>']
    lines += _surface_xml("GroundSurface", f"{bid}_ground", ground)
    wcount = 0
    for side, ring in walls.items():
        lo, hi, coord = spans[side]
        openings = []
        for s in range(storeys):
            z0 = s * STOREY_HEIGHT + 0.9
            for k, (a0, a1) in enumerate(_slots(lo, hi, per_storey[side], 1.2)):
                if side == "south" and s == 0 and k == 0:
                    door = _rect_on_wall((side, coord), a0, a1 + 0.2, 0.0, 2.2)
                    openings.append(("Door", f"{bid}_door", door))
                    continue
                wcount += 1
                wid = f"{bid}_win{wcount}"
                openings.append(("Window", wid, _rect_on_wall((side, coord), a0, a1, z0, z0 + 1.4)))
                windows.append(wid)
        lines += _surface_xml("WallSurface", f"{bid}_wall_{side}", ring, openings)
    for k, ring in enumerate(roofs, 1):
        lines += _surface_xml("RoofSurface", f"{bid}_roof{k}", ring)
    lines += ["    </bldg:Building>", "  </core:cityObjectMember>"]
    return lines, BuildingInfo(bid, (x0, y0, x1, y1), eave, ridge, windows)


def city_xml(cfg: CityConfig) -> tuple[str, list[BuildingInfo]]:
    rng = random.Random(cfg.seed)
    cols = max(1, math.ceil(math.sqrt(cfg.n_buildings)))
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<core:CityModel xmlns:core="{CORE_NS}" xmlns:bldg="{BLDG_NS}" xmlns:gml="{GML_NS}">',
             "  <gml:name>Synthetic city</gml:name>"]
    infos = []
    for i in range(cfg.n_buildings):
        row, col = divmod(i, cols)
        blines, info = building_xml(i + 1, rng, (col * cfg.spacing, row * cfg.spacing))
        lines += blines
        infos.append(info)
    lines.append("</core:CityModel>")
    return "\n".join(lines) + "\n", infos


# --------------------------------------------------------------------------
# datasets


def _csv(header, rows) -> str:
    out = [",".join(header)]
    for r in rows:
        out.append(",".join(_cell(c) for c in r))
    return "\n".join(out) + "\n"


def _cell(c) -> str:
    if isinstance(c, str):
        return '"' + c.replace('"', '""') + '"' if ("," in c or '"' in c) else c
    return _fmt(float(c))


def scalar_field(extent, dims=(17, 17, 9), source=None) -> FieldGrid:
    """Squared distance to a source point, scaled so level 1 is a 0.3-extent blob."""
    x_max, y_max = extent
    nx, ny, nz = dims
    spacing = (x_max / (nx - 1), y_max / (ny - 1), 30.0 / (nz - 1))
    sx, sy, sz = source or (x_max * 0.5, y_max * 0.5, 5.0)
    rad = 0.3 * min(x_max, y_max)
    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    x, y, z = i * spacing[0], j * spacing[1], k * spacing[2]
    vals = ((x - sx) ** 2 + (y - sy) ** 2 + (z - sz) ** 2) / rad ** 2
    return FieldGrid((0.0, 0.0, 0.0), spacing, dims, np.round(vals, 6))


def vector_field(extent, dims=(9, 9, 5)) -> FieldGrid:
    """Rotation about the vertical axis through the city centre plus a slight updraft."""
    x_max, y_max = extent
    nx, ny, nz = dims
    spacing = (x_max / (nx - 1), y_max / (ny - 1), 30.0 / (nz - 1))
    cx, cy = x_max / 2, y_max / 2
    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    x, y = i * spacing[0], j * spacing[1]
    vals = np.stack([-(y - cy), x - cx, np.full(x.shape, 0.05 * max(cx, cy))], axis=-1)
    return FieldGrid((0.0, 0.0, 0.0), spacing, dims, np.round(vals, 6))


def _config(lines: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in lines.items())


def make_fixtures(out_dir, n_buildings: int = 100, seed: int = 7) -> dict[str, Path]:
    """Write the city, datasets, grids and pipeline configs; return name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed + 1)
    cfg = CityConfig(n_buildings=n_buildings, seed=seed)
    xml, infos = city_xml(cfg)
    files: dict[str, str] = {"city.gml": xml}

    cols = max(1, math.ceil(math.sqrt(n_buildings)))
    rows_ = max(1, math.ceil(n_buildings / cols))
    extent = (cols * cfg.spacing, rows_ * cfg.spacing)

    files["pedestrians.csv"] = _csv(("value", "x", "y", "z"), [(42, -13, 25, 0), (17, -6, 4, 0)])
    pollutant = [(5.67, 4.5, 44, 1.5)]
    for _ in range(9):
        pollutant.append((round(rng.uniform(1, 30), 2), round(rng.uniform(0, extent[0]), 1),
                          round(rng.uniform(0, extent[1]), 1), 1.5))
    files["pollutant.csv"] = _csv(("value", "x", "y", "z"), pollutant)

    dict_rows = []
    for info in infos:
        dict_rows.append((f"bldg-{info.gml_id[1:]}", info.gml_id))
    picked = [(info, info.windows[0], info.windows[-1]) for info in infos[: min(len(infos), 5)]]
    for n, (info, wa, wb) in enumerate(picked, 1):
        dict_rows.append((f"w{2 * n - 1}", wa))
        dict_rows.append((f"w{2 * n}", wb))
    files["dict.csv"] = _csv(("ref", "gml_id"), dict_rows)

    descriptions = [
        "historic facade, built 1820",
        "town hall annex",
        "former printing works",
        "listed building",
        "covered market",
    ]
    files["descriptions.csv"] = _csv(
        ("value", "object_ref"),
        [(text, f"bldg-{i + 1}") for i, text in enumerate(descriptions[: min(n_buildings, 5)])])

    inter = [(0.3, "w1", "w2")]
    for n in range(2, len(picked) + 1):
        inter.append((round(rng.uniform(0, 1), 2), f"w{2 * n - 1}", f"w{2 * n}"))
    if len(picked) > 1:
        inter.append((round(rng.uniform(0, 1), 2), "w1", "w3"))
    files["intervisibility.csv"] = _csv(("value", "arg1_ref", "arg2_ref"), inter)

    x0, y0, x1, y1 = infos[0].footprint
    files["regions.csv"] = _csv(("region", "poslist"), [
        ("square", f"{_fmt(x0 - 6)} {_fmt(y0 - 6)} 0 {_fmt(x0 - 2)} {_fmt(y0 - 6)} 0 "
                   f"{_fmt(x0 - 2)} {_fmt(y0 - 2)} 0 {_fmt(x0 - 6)} {_fmt(y0 - 2)} 0"),
    ])
    files["noise.csv"] = _csv(("value", "region"), [(55, "square")])

    files["field_scalar.grid"] = write_grid_file(scalar_field(extent))
    files["field_vector.grid"] = write_grid_file(vector_field(extent))

    base = {"model": "city.gml", "format": "x3dom"}
    files["pedestrians.cfg"] = _config(base | {
        "technique": "builtin:pedestrian-cones", "output": "pedestrians.html",
        "dataset.pedestrians.path": "pedestrians.csv", "dataset.pedestrians.kind": "point",
        "dataset.pedestrians.type": ":PedestrianCounting", "dataset.pedestrians.coords": "xloc",
        "dataset.pedestrians.prefix": "pednum", "dataset.pedestrians.loc_prefix": "loc",
    })
    files["pollutant.cfg"] = _config(base | {
        "technique": "builtin:pollutant-spheres", "output": "pollutant.html",
        "dataset.pollutant.path": "pollutant.csv", "dataset.pollutant.kind": "point",
        "dataset.pollutant.type": ":PollutantConcentration",
    })
    files["combined.cfg"] = _config(base | {
        "technique": "builtin:pollutant-spheres", "output": "combined.html",
        "dataset.pollutant.path": "pollutant.csv", "dataset.pollutant.kind": "point",
        "dataset.pollutant.type": ":PollutantConcentration",
        "dataset.pedestrians.path": "pedestrians.csv", "dataset.pedestrians.kind": "point",
        "dataset.pedestrians.type": ":PedestrianCounting", "dataset.pedestrians.coords": "xloc",
        "dataset.pedestrians.prefix": "pednum",
        "dataset.pedestrians.technique": "builtin:pedestrian-cones",
    })
    files["panels.cfg"] = _config(base | {
        "technique": "builtin:panel-near-object", "output": "panels.html",
        "dataset.descriptions.path": "descriptions.csv", "dataset.descriptions.kind": "object",
        "dataset.descriptions.type": ":RichText", "dataset.descriptions.dict": "dict.csv",
    })
    files["intervisibility.cfg"] = _config(base | {
        "technique": "builtin:line-between-objects", "output": "intervisibility.html",
        "dataset.intervisibility.path": "intervisibility.csv",
        "dataset.intervisibility.kind": "relation",
        "dataset.intervisibility.type": ":IntervisibilityRelation",
        "dataset.intervisibility.dict": "dict.csv",
    })
    files["isosurface.cfg"] = _config(base | {
        "technique": "builtin:global-isosurface", "output": "isosurface.html",
        "dataset.plume.path": "field_scalar.grid", "dataset.plume.kind": "grid",
        "dataset.plume.type": ":FieldSample", "layout.iso_levels": "0.5 1",
    })
    cx, cy = extent[0] / 2, extent[1] / 2
    seeds = ", ".join(f"{_fmt(cx + r)} {_fmt(cy)} 2" for r in (0.15 * cx, 0.3 * cx, 0.45 * cx))
    files["flowlines.cfg"] = _config(base | {
        "technique": "builtin:flowlines", "output": "flowlines.html",
        "dataset.wind.path": "field_vector.grid", "dataset.wind.kind": "grid",
        "dataset.wind.type": ":FieldSample", "layout.seeds": seeds,
        "layout.streamline_step": "0.5", "layout.max_length": "60", "layout.line_width": "0.2",
    })

    written = {}
    for name, text in files.items():
        path = out / name
        path.write_text(text, encoding="utf-8")
        written[name] = path
    return written


def building_infos(n_buildings: int = 100, seed: int = 7) -> list[BuildingInfo]:
    return city_xml(CityConfig(n_buildings=n_buildings, seed=seed))[1]


def box_building_xml(ground_z: float = 0.0, size=(4.0, 4.0, 10.0), gid: str = "b1",
                     roof: Optional[str] = "flat") -> str:
    """Single axis-aligned box building (flat roof) used by layout tests."""
    w, d, h = size
    z = ground_z
    ground = [(0, 0, z), (0, d, z), (w, d, z), (w, 0, z)]
    walls = [
        [(0, 0, z), (w, 0, z), (w, 0, z + h), (0, 0, z + h)],
        [(w, 0, z), (w, d, z), (w, d, z + h), (w, 0, z + h)],
        [(w, d, z), (0, d, z), (0, d, z + h), (w, d, z + h)],
        [(0, d, z), (0, 0, z), (0, 0, z + h), (0, d, z + h)],
    ]
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<core:CityModel xmlns:core="{CORE_NS}" xmlns:bldg="{BLDG_NS}" xmlns:gml="{GML_NS}">',
             "  <core:cityObjectMember>", f'    <bldg:Building gml:id="{gid}">']
    lines += _surface_xml("GroundSurface", f"{gid}_ground", ground)
    for k, ring in enumerate(walls, 1):
        lines += _surface_xml("WallSurface", f"{gid}_wall{k}", ring)
    if roof == "flat":
        lines += _surface_xml("RoofSurface", f"{gid}_roof", [(0, 0, z + h), (w, 0, z + h), (w, d, z + h), (0, d, z + h)])
    lines += ["    </bldg:Building>", "  </core:cityObjectMember>", "</core:CityModel>"]
    return "\n".join(lines) + "\n"
