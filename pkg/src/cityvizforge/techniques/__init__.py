"""Built-in technique library."""
from __future__ import annotations

from importlib import resources

from ..errors import TechniqueError

BUILTIN_NAMES = (
    "pollutant-spheres",
    "pedestrian-cones",
    "global-isosurface",
    "panel-near-object",
    "line-between-objects",
    "flowlines",
)


def builtin_text(name: str) -> str:
    if name not in BUILTIN_NAMES:
        raise TechniqueError(f"no built-in technique {name!r} (known: {', '.join(BUILTIN_NAMES)})")
    return resources.files(__name__).joinpath(f"{name}.tech").read_text(encoding="utf-8")


def load_builtin(name: str):
    from ..technique import parse_technique
    return parse_technique(builtin_text(name))
