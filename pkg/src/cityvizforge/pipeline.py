"""Stage functions and the flat ``key = value`` pipeline config.

Each stage takes and returns the textual interchange formats (CityGML XML,
N-Triples, technique text, scene JSONL), so a run chained through files by
hand and a ``pipeline`` run produce the same bytes.
"""
from __future__ import annotations

import functools
import os
import re
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .citygml import extract_geometry_index, parse_citygml
from .errors import CvfError
from .ingest import (
    ingest_grid_field, ingest_object_data, ingest_point_data, ingest_region_data,
    ingest_relation_data, load_dictionary, read_csv_table, read_regions,
)
from .layout.manager import layout_scene
from .layout.scene import ConcreteScene, read_scene, write_scene
from .rdf import Graph, parse_graph, serialize_graph
from .store import GraphView, Store
from .technique import (
    EMIT_KEYS, LAYOUT_KEYS, TechniqueSpec, apply_technique, check_technique, parse_technique,
)
from .techniques import BUILTIN_NAMES, builtin_text
from .emit import emit_x3d, emit_x3dom

KINDS = ("point", "region", "object", "relation", "grid")
FORMATS = ("x3dom", "x3d")
DATASET_KEYS = ("path", "kind", "type", "dict", "regions", "prefix", "loc_prefix", "coords", "technique")
DEFAULT_DATA_GRAPH = "data"


class ConfigError(CvfError):
    pass


# --------------------------------------------------------------------------
# techniques


def read_technique_text(ref: str, base: Optional[Path] = None) -> str:
    """``builtin:<name>`` or a path (relative to ``base``)."""
    if ref.startswith("builtin:"):
        name = ref[len("builtin:"):]
        if name not in BUILTIN_NAMES:
            raise ConfigError(f"unknown built-in technique {name!r}; known: {', '.join(BUILTIN_NAMES)}")
        return builtin_text(name)
    return _resolve(ref, base).read_text(encoding="utf-8")


def technique_exists(ref: str, base: Optional[Path] = None) -> bool:
    if ref.startswith("builtin:"):
        return ref[len("builtin:"):] in BUILTIN_NAMES
    return _resolve(ref, base).is_file()


def load_technique(text: str, layout: Optional[dict] = None, emit: Optional[dict] = None) -> TechniqueSpec:
    spec = parse_technique(text)
    if layout or emit:
        spec = replace(spec, layout=spec.layout.with_overrides(layout or {}),
                       emit=spec.emit.with_overrides(emit or {}))
        check_technique(spec)
    return spec


def _resolve(path, base: Optional[Path]) -> Path:
    p = Path(path)
    return p if p.is_absolute() or base is None else base / p


# --------------------------------------------------------------------------
# stages


@functools.lru_cache(maxsize=2)
def _model(model_text: str) -> Graph:
    # stages of one run share the parsed model; the graph is never mutated
    return parse_graph(model_text)


@functools.lru_cache(maxsize=2)
def _geometry(model_text: str):
    return extract_geometry_index(_model(model_text))


def stage_convert(xml_text: str, source: str = "") -> str:
    """CityGML XML -> N-Triples text of the model graph."""
    return serialize_graph(parse_citygml(xml_text, source).graph)


@dataclass
class IngestOptions:
    kind: str
    type_iri: str
    prefix: Optional[str] = None
    loc_prefix: Optional[str] = None
    coords: str = "xcoord"
    dict_text: Optional[str] = None
    regions_text: Optional[str] = None


def stage_ingest(data_text: str, opts: IngestOptions, model_text: Optional[str] = None) -> str:
    """Dataset file text -> N-Triples text of the data graph."""
    prefix = opts.prefix or "data"
    loc_prefix = opts.loc_prefix or (prefix + "loc" if opts.prefix else "loc")
    kind = opts.kind
    if kind == "grid":
        graph, _ = ingest_grid_field(data_text, opts.type_iri, prefix=opts.prefix or "sample", coords=opts.coords)
        return serialize_graph(graph)
    rows = read_csv_table(data_text)
    if kind == "point":
        graph = ingest_point_data(rows, opts.type_iri, prefix, loc_prefix, opts.coords)
    elif kind == "region":
        if opts.regions_text is None:
            raise ConfigError("region datasets need a regions file")
        graph = ingest_region_data(rows, opts.type_iri, read_regions(opts.regions_text), prefix, loc_prefix)
    elif kind in ("object", "relation"):
        if opts.dict_text is None:
            raise ConfigError(f"{kind} datasets need a reference dictionary")
        dictionary = load_dictionary(read_csv_table(opts.dict_text))
        # the model is only needed to check dictionary targets
        model = _model(model_text) if model_text is not None else None
        fn = ingest_object_data if kind == "object" else ingest_relation_data
        graph = fn(rows, opts.type_iri, dictionary, prefix, model)
    else:
        raise ConfigError(f"unknown dataset kind {kind!r}; expected one of {', '.join(KINDS)}")
    return serialize_graph(graph)


def blank_prefix_for(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", name) + ".v"


def _store(model: Graph, data: Graph, spec: TechniqueSpec) -> tuple[Store, str]:
    store = Store()
    store.add_graph("model", model)
    graph_name = spec.query.from_graph or DEFAULT_DATA_GRAPH
    store.add_graph(graph_name, data)
    return store, graph_name


def stage_apply(model_text: str, data_text: str, spec: TechniqueSpec, name: str) -> str:
    """Technique over one dataset -> N-Triples text of the abstract graph."""
    model, data = _model(model_text), parse_graph(data_text)
    store, graph_name = _store(model, data, spec)
    result = apply_technique(store, spec, graph_name, "model", blank_prefix_for(name))
    return serialize_graph(result.graph)


def stage_layout(model_text: str, data_text: str, abstract_text: str, spec: TechniqueSpec,
                 source: str = "") -> str:
    """Abstract graph -> scene JSONL text."""
    model, data, abstract = _model(model_text), parse_graph(data_text), parse_graph(abstract_text)
    geom = _geometry(model_text)
    scene = layout_scene(abstract, geom, spec.layout, GraphView([data, model]), spec.emit, source)
    return write_scene(scene)


def merge_scenes(texts) -> ConcreteScene:
    scenes = [read_scene(t) for t in texts]
    merged = ConcreteScene(source=",".join(s.source for s in scenes if s.source))
    for s in scenes:
        merged.nodes.extend(s.nodes)
    return merged


def stage_emit(model_text: str, scene_texts, fmt: str = "x3dom", spec: Optional[TechniqueSpec] = None) -> str:
    """Scene files plus the model -> X3DOM page or X3D document text."""
    if fmt not in FORMATS:
        raise ConfigError(f"unknown output format {fmt!r}; expected x3d or x3dom")
    geom = _geometry(model_text)
    scene = merge_scenes(scene_texts)
    scene.check()
    hints = spec.emit if spec is not None else None
    doc = emit_x3dom(scene, geom, hints) if fmt == "x3dom" else emit_x3d(scene, geom, hints)
    return doc.text


# --------------------------------------------------------------------------
# config


@dataclass
class DatasetEntry:
    name: str
    path: Path
    kind: str
    type_iri: str
    dict_path: Optional[Path] = None
    regions_path: Optional[Path] = None
    prefix: Optional[str] = None
    loc_prefix: Optional[str] = None
    coords: str = "xcoord"
    technique: Optional[str] = None

    def options(self) -> IngestOptions:
        read = lambda p: p.read_text(encoding="utf-8") if p is not None else None
        return IngestOptions(self.kind, self.type_iri, self.prefix, self.loc_prefix, self.coords,
                             read(self.dict_path), read(self.regions_path))


@dataclass
class PipelineConfig:
    model: Path
    technique: str
    output: Path
    format: str = "x3dom"
    datasets: list = field(default_factory=list)
    layout: dict = field(default_factory=dict)
    emit: dict = field(default_factory=dict)
    base: Path = Path(".")


_LINE = re.compile(r"^\s*([A-Za-z0-9_.\-]+)\s*=\s*(.*?)\s*$")


def parse_config(text: str, base: Path = Path(".")) -> PipelineConfig:
    top: dict[str, str] = {}
    groups: dict[str, dict] = {}
    layout, emit = {}, {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"config line {n}: expected 'key = value'")
        key, value = m.groups()
        section, _, rest = key.partition(".")
        if section == "dataset":
            name, _, attr = rest.rpartition(".")
            if not name or attr not in DATASET_KEYS:
                raise ConfigError(f"config line {n}: unknown dataset key {key!r}")
            groups.setdefault(name, {})[attr] = value
        elif section == "layout":
            if rest not in LAYOUT_KEYS:
                raise ConfigError(f"config line {n}: unknown layout key {rest!r}")
            layout[rest] = value
        elif section == "emit":
            if rest not in EMIT_KEYS:
                raise ConfigError(f"config line {n}: unknown emit key {rest!r}")
            emit[rest] = value
        elif key in ("model", "technique", "output", "format"):
            if key in top:
                raise ConfigError(f"config line {n}: {key} given twice")
            top[key] = value
        else:
            raise ConfigError(f"config line {n}: unknown key {key!r}")
    for key in ("model", "technique", "output"):
        if key not in top:
            raise ConfigError(f"config is missing {key!r}")
    if not groups:
        raise ConfigError("config names no datasets")
    fmt = top.get("format", "x3dom")
    if fmt not in FORMATS:
        raise ConfigError(f"unknown output format {fmt!r}")
    datasets = []
    for name, g in groups.items():
        for req in ("path", "kind", "type"):
            if req not in g:
                raise ConfigError(f"dataset {name!r} is missing {req!r}")
        if g["kind"] not in KINDS:
            raise ConfigError(f"dataset {name!r}: unknown kind {g['kind']!r}")
        opt = lambda k: _resolve(g[k], base) if k in g else None
        datasets.append(DatasetEntry(
            name, _resolve(g["path"], base), g["kind"], g["type"], opt("dict"), opt("regions"),
            g.get("prefix"), g.get("loc_prefix"), g.get("coords", "xcoord"), g.get("technique")))
    return PipelineConfig(_resolve(top["model"], base), top["technique"], _resolve(top["output"], base),
                          fmt, datasets, layout, emit, base)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    cfg = parse_config(path.read_text(encoding="utf-8"), path.parent)
    check_paths(cfg)
    return cfg


def check_paths(cfg: PipelineConfig) -> None:
    """Every referenced file must exist before any stage runs."""
    missing = []
    if not cfg.model.is_file():
        missing.append(str(cfg.model))
    for ref in [cfg.technique] + [d.technique for d in cfg.datasets if d.technique]:
        if not technique_exists(ref, cfg.base):
            missing.append(ref)
    for d in cfg.datasets:
        missing += [str(p) for p in (d.path, d.dict_path, d.regions_path) if p is not None and not p.is_file()]
    if missing:
        raise ConfigError("missing input file(s): " + ", ".join(missing))


# --------------------------------------------------------------------------
# whole run


@dataclass
class StageReport:
    stage: str
    seconds: float
    detail: str


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def count_lines(text: str) -> int:
    return text.count("\n")


def run_pipeline(cfg: PipelineConfig, report=None) -> str:
    """Run every stage in memory (through the text formats) and return the document text.

    ``report`` receives a StageReport after each stage.
    """
    import time

    def done(stage, t0, detail):
        if report is not None:
            report(StageReport(stage, time.perf_counter() - t0, detail))

    t0 = time.perf_counter()
    model_text = stage_convert(cfg.model.read_text(encoding="utf-8"), cfg.model.name)
    done("convert", t0, f"{count_lines(model_text)} model triples")

    techniques = {}
    for ref in dict.fromkeys([cfg.technique] + [d.technique for d in cfg.datasets if d.technique]):
        techniques[ref] = load_technique(read_technique_text(ref, cfg.base), cfg.layout, cfg.emit)

    scenes = []
    for d in cfg.datasets:
        spec = techniques[d.technique or cfg.technique]
        t0 = time.perf_counter()
        data_text = stage_ingest(d.path.read_text(encoding="utf-8"), d.options(), model_text)
        done(f"ingest {d.name}", t0, f"{count_lines(data_text)} data triples")
        t0 = time.perf_counter()
        abstract_text = stage_apply(model_text, data_text, spec, d.name)
        done(f"apply {d.name}", t0, f"{count_lines(abstract_text)} abstract triples")
        t0 = time.perf_counter()
        scene_text = stage_layout(model_text, data_text, abstract_text, spec, d.name)
        done(f"layout {d.name}", t0, f"{count_lines(scene_text) - 1} scene nodes")
        scenes.append(scene_text)

    t0 = time.perf_counter()
    text = stage_emit(model_text, scenes, cfg.format, techniques[cfg.technique])
    done("emit", t0, f"{len(text)} bytes {cfg.format}")
    return text
