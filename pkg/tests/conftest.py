import numpy as np
import pytest

from cityvizforge.fields import FieldGrid
from cityvizforge.fixtures import make_fixtures


@pytest.fixture(scope="session")
def small_city(tmp_path_factory):
    """Four-building fixture directory (city, datasets, configs)."""
    out = tmp_path_factory.mktemp("city4")
    make_fixtures(out, n_buildings=4)
    return out


@pytest.fixture(scope="session")
def big_city(tmp_path_factory):
    out = tmp_path_factory.mktemp("city100")
    make_fixtures(out, n_buildings=100)
    return out


def radial_grid(n=17, lo=-2.0, hi=2.0) -> FieldGrid:
    """f = x^2 + y^2 + z^2 sampled on [lo, hi]^3 with n nodes per axis."""
    h = (hi - lo) / (n - 1)
    ax = lo + np.arange(n) * h
    z, y, x = np.meshgrid(ax, ax, ax, indexing="ij")
    return FieldGrid((lo, lo, lo), (h, h, h), (n, n, n), x * x + y * y + z * z)


def vector_grid(fn, n=41, lo=-2.0, hi=2.0, nz=3) -> FieldGrid:
    h = (hi - lo) / (n - 1)
    ax = lo + np.arange(n) * h
    az = -1.0 + np.arange(nz) * (2.0 / (nz - 1))
    z, y, x = np.meshgrid(az, ax, ax, indexing="ij")
    vals = np.stack(fn(x, y, z), axis=-1).astype(float)
    return FieldGrid((lo, lo, -1.0), (h, h, 2.0 / (nz - 1)), (n, n, nz), vals)


def run_stages(cfg_path):
    """Run a config stage by stage; returns the model text and per-dataset stage outputs."""
    from cityvizforge.pipeline import (load_config, load_technique, read_technique_text, stage_apply,
                                       stage_convert, stage_ingest, stage_layout)

    cfg = load_config(cfg_path)
    model_text = stage_convert(cfg.model.read_text(encoding="utf-8"))
    out = []
    for d in cfg.datasets:
        spec = load_technique(read_technique_text(d.technique or cfg.technique, cfg.base), cfg.layout, cfg.emit)
        data_text = stage_ingest(d.path.read_text(encoding="utf-8"), d.options(), model_text)
        abstract_text = stage_apply(model_text, data_text, spec, d.name)
        scene_text = stage_layout(model_text, data_text, abstract_text, spec, d.name)
        out.append(dict(name=d.name, spec=spec, data=data_text, abstract=abstract_text, scene=scene_text))
    return model_text, out


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""
    def record(number, ok, detail):
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
