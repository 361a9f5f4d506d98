"""RK4 streamline tracing through a vector FieldGrid."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import LayoutError
from ..fields import FieldGrid

STAGNATION = 1e-12


def _direction(grid: FieldGrid, p):
    """Unit field direction at ``p``; None outside the grid or where the field stalls."""
    if not grid.contains(p):
        return None
    v = grid.sample(p)
    speed = float(np.linalg.norm(v))
    if speed < STAGNATION:
        return None
    return v / speed


def trace(grid: FieldGrid, seed, step: float, max_length: float) -> list[tuple[float, float, float]]:
    """Advect one seed. The field is normalised so ``step`` is arc length in meters."""
    p = np.asarray(seed, dtype=float)
    points = [tuple(float(c) for c in p)]
    length = 0.0
    # slack absorbs rounding in the accumulated length so no sliver step is taken
    slack = 1e-9 * step
    while max_length - length > slack:
        h = min(step, max_length - length)
        k1 = _direction(grid, p)
        if k1 is None:
            break
        k2 = _direction(grid, p + 0.5 * h * k1)
        if k2 is None:
            break
        k3 = _direction(grid, p + 0.5 * h * k2)
        if k3 is None:
            break
        k4 = _direction(grid, p + h * k3)
        if k4 is None:
            break
        nxt = p + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not grid.contains(nxt):
            break
        p = nxt
        length += h
        points.append(tuple(float(c) for c in p))
    return points


def integrate_streamlines(grid: FieldGrid, seeds: Sequence, step: float, max_length: float) -> list[list]:
    if not grid.is_vector:
        raise LayoutError("streamlines need a vector field, got a scalar field")
    if not step > 0:
        raise LayoutError(f"streamline step must be positive, got {step}")
    if not max_length > 0:
        raise LayoutError(f"streamline max_length must be positive, got {max_length}")
    lines = []
    for seed in seeds:
        if not grid.contains(seed):
            raise LayoutError(f"seed {tuple(seed)} is outside the field grid")
        lines.append(trace(grid, seed, step, max_length))
    return lines
