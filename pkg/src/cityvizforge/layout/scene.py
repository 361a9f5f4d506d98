"""Concrete scene records and the scene interchange file.

The file is JSON Lines: a header object ``{"format": "cvf-scene", "version": 1}``
followed by one object per node with the keys ``shape``, ``params``,
``position``, ``orientation`` (axis x y z, angle in radians), ``color``,
``transparency``, ``prov`` (abstract node id) and ``meta``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from ..errors import CvfError, InvariantViolation

SCENE_FORMAT = "cvf-scene"
SCENE_VERSION = 1
SHAPES = ("sphere", "cone", "line", "panel", "mesh", "polyline")
IDENTITY = (0.0, 0.0, 1.0, 0.0)

# parameters that must be positive per shape
_POSITIVE = {
    "sphere": ("radius",),
    "cone": ("height", "base_radius"),
    "line": ("width",),
    "panel": ("width", "height"),
    "polyline": ("width",),
    "mesh": (),
}


@dataclass
class SceneNode:
    shape: str
    params: dict
    position: tuple[float, float, float]
    prov: str
    orientation: tuple[float, float, float, float] = IDENTITY
    color: tuple[float, float, float] = (0.0, 0.0, 1.0)
    transparency: float = 0.0
    # abstract facts the geometry alone cannot carry (relation kinds, references)
    meta: dict = field(default_factory=dict)

    def check(self):
        if self.shape not in SHAPES:
            raise InvariantViolation(f"unknown scene shape {self.shape!r}")
        if not self.prov:
            raise InvariantViolation(f"{self.shape} scene node without provenance")
        for name in _POSITIVE[self.shape]:
            v = self.params.get(name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                raise InvariantViolation(f"{self.shape} {self.prov}: parameter {name} must be positive, got {v}")
        if not all(math.isfinite(c) for c in (*self.position, *self.orientation)):
            raise InvariantViolation(f"{self.shape} {self.prov}: non-finite placement")


@dataclass
class ConcreteScene:
    nodes: list = field(default_factory=list)
    source: str = ""

    def check(self):
        for n in self.nodes:
            n.check()


def _tuple(x):
    return tuple(float(v) for v in x)


def node_to_json(node: SceneNode) -> str:
    rec = asdict(node)
    for key in ("position", "orientation", "color"):
        rec[key] = _tuple(rec[key])
    rec["transparency"] = float(rec["transparency"])
    return json.dumps(rec, separators=(",", ":"), sort_keys=True, allow_nan=False)


def write_scene(scene: ConcreteScene) -> str:
    header = {"format": SCENE_FORMAT, "version": SCENE_VERSION, "source": scene.source}
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines += [node_to_json(n) for n in scene.nodes]
    return "\n".join(lines) + "\n"


def read_scene(text: str) -> ConcreteScene:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CvfError("scene file is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CvfError(f"scene header is not JSON: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != SCENE_FORMAT:
        raise CvfError("not a scene file (missing cvf-scene header)")
    if header.get("version") != SCENE_VERSION:
        raise CvfError(f"unsupported scene version {header.get('version')!r}")
    scene = ConcreteScene(source=header.get("source", ""))
    for n, line in enumerate(lines[1:], 2):
        try:
            rec = json.loads(line)
            node = SceneNode(
                shape=rec["shape"], params=rec["params"], position=_tuple(rec["position"]),
                prov=rec["prov"], orientation=_tuple(rec["orientation"]), color=_tuple(rec["color"]),
                transparency=float(rec["transparency"]), meta=rec.get("meta", {}),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CvfError(f"bad scene record on line {n}: {exc}") from None
        scene.nodes.append(node)
    return scene
