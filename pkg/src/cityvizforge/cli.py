"""Command-line entry point: ``cvf <command> ...``.

Exit status is 0 on success, 2 for bad input or usage, 3 when an internal
invariant check fails. Counts go to stdout, timings and errors to stderr.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .errors import CvfError, InvariantViolation
from .fixtures import make_fixtures
from .pipeline import (
    FORMATS, KINDS, IngestOptions, StageReport, atomic_write, count_lines, load_config,
    load_technique, read_technique_text, run_pipeline, stage_apply, stage_convert, stage_emit,
    stage_ingest, stage_layout, ConfigError,
)

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _overrides(pairs) -> tuple[dict, dict]:
    layout, emit = {}, {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        section, _, name = key.strip().partition(".")
        if not sep or section not in ("layout", "emit") or not name:
            raise ConfigError(f"--set expects layout.KEY=VALUE or emit.KEY=VALUE, got {pair!r}")
        (layout if section == "layout" else emit)[name] = value.strip()
    return layout, emit


def _technique(args):
    layout, emit = _overrides(args.set)
    return load_technique(read_technique_text(args.technique, Path.cwd()), layout, emit)


def _timed(label, fn):
    t0 = time.perf_counter()
    out = fn()
    print(f"{label}: {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    return out


def cmd_convert(args) -> int:
    text = _timed("convert", lambda: stage_convert(_read(args.model), Path(args.model).name))
    atomic_write(args.out, text)
    print(count_lines(text))
    return EXIT_OK


def cmd_ingest(args) -> int:
    opts = IngestOptions(
        args.kind, args.type, args.prefix, args.loc_prefix, args.coords,
        _read(args.dict) if args.dict else None, _read(args.regions) if args.regions else None)
    model = _read(args.model) if args.model else None
    text = _timed("ingest", lambda: stage_ingest(_read(args.data), opts, model))
    atomic_write(args.out, text)
    print(count_lines(text))
    return EXIT_OK


def cmd_apply(args) -> int:
    spec = _technique(args)
    name = args.name or Path(args.data).stem
    text = _timed("apply", lambda: stage_apply(_read(args.model), _read(args.data), spec, name))
    atomic_write(args.out, text)
    print(count_lines(text))
    return EXIT_OK


def cmd_layout(args) -> int:
    spec = _technique(args)
    name = args.name or Path(args.data).stem
    text = _timed("layout", lambda: stage_layout(
        _read(args.model), _read(args.data), _read(args.abstract), spec, name))
    atomic_write(args.out, text)
    print(count_lines(text) - 1)
    return EXIT_OK


def cmd_emit(args) -> int:
    spec = _technique(args) if args.technique else None
    scenes = [_read(p) for p in args.scene]
    text = _timed("emit", lambda: stage_emit(_read(args.model), scenes, args.format, spec))
    atomic_write(args.out, text)
    print(len(text.encode("utf-8")))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.output = Path(args.out)
    if args.format:
        cfg.format = args.format

    def report(r: StageReport):
        print(f"{r.stage}: {r.seconds:.3f} s, {r.detail}", file=sys.stderr)

    t0 = time.perf_counter()
    text = run_pipeline(cfg, report)
    atomic_write(cfg.output, text)
    print(f"total: {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    print(cfg.output)
    return EXIT_OK


def cmd_make_fixtures(args) -> int:
    written = make_fixtures(args.out_dir, args.n_buildings, args.seed)
    for path in written.values():
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvf", description="Semantic 3D city visualization pipeline.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", help="CityGML -> RDF model graph (N-Triples)")
    c.add_argument("--model", required=True, help="CityGML file")
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_convert)

    c = sub.add_parser("ingest", help="dataset file -> RDF data graph")
    c.add_argument("--data", required=True)
    c.add_argument("--kind", required=True, choices=KINDS)
    c.add_argument("--type", required=True, help="type IRI, e.g. :PedestrianCounting")
    c.add_argument("--dict", help="reference dictionary CSV (ref,gml_id)")
    c.add_argument("--regions", help="regions side file CSV (region,poslist)")
    c.add_argument("--model", help="model graph, used to check dictionary targets")
    c.add_argument("--prefix")
    c.add_argument("--loc-prefix")
    c.add_argument("--coords", default="xcoord", choices=("xcoord", "xloc"))
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_ingest)

    def technique_args(c, required=True):
        c.add_argument("--technique", required=required, help="technique file or builtin:NAME")
        c.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="layout/emit override, repeatable")

    c = sub.add_parser("apply", help="technique over a data graph -> abstract graph")
    c.add_argument("--model", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--name", help="dataset name (default: data file stem)")
    c.add_argument("--out", required=True)
    technique_args(c)
    c.set_defaults(fn=cmd_apply)

    c = sub.add_parser("layout", help="abstract graph -> concrete scene (JSONL)")
    c.add_argument("--model", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--abstract", required=True)
    c.add_argument("--name", help="dataset name (default: data file stem)")
    c.add_argument("--out", required=True)
    technique_args(c)
    c.set_defaults(fn=cmd_layout)

    c = sub.add_parser("emit", help="scene(s) + model -> X3DOM page or X3D document")
    c.add_argument("--model", required=True)
    c.add_argument("--scene", required=True, action="append")
    c.add_argument("--format", default="x3dom", choices=FORMATS)
    c.add_argument("--out", required=True)
    technique_args(c, required=False)
    c.set_defaults(fn=cmd_emit)

    c = sub.add_parser("pipeline", help="run all stages from a config file")
    c.add_argument("config")
    c.add_argument("--out", help="override the configured output path")
    c.add_argument("--format", choices=FORMATS)
    c.set_defaults(fn=cmd_pipeline)

    c = sub.add_parser("make-fixtures", help="write the synthetic city, datasets and configs")
    c.add_argument("--out-dir", required=True)
    c.add_argument("--n-buildings", type=int, default=100)
    c.add_argument("--seed", type=int, default=7)
    c.set_defaults(fn=cmd_make_fixtures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InvariantViolation as exc:
        print(f"cvf: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (CvfError, OSError, UnicodeDecodeError) as exc:
        print(f"cvf {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
