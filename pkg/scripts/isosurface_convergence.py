"""Area of the unit-sphere isosurface of x^2+y^2+z^2 against grid resolution.

    python scripts/isosurface_convergence.py
"""
import math

import numpy as np

from cityvizforge.fields import FieldGrid
from cityvizforge.layout.isosurface import compute_isosurface


def radial(n, lo=-2.0, hi=2.0):
    h = (hi - lo) / (n - 1)
    ax = lo + np.arange(n) * h
    z, y, x = np.meshgrid(ax, ax, ax, indexing="ij")
    return FieldGrid((lo, lo, lo), (h, h, h), (n, n, n), x * x + y * y + z * z)


def main():
    print(f"{'nodes':>6} {'triangles':>9} {'area':>9} {'rel err':>8}")
    for n in (9, 13, 17, 25, 33, 49):
        ((_, mesh),) = compute_isosurface(radial(n), [1.0])
        a = mesh.area()
        print(f"{n:>6} {len(mesh.triangles):>9} {a:9.4f} {abs(a - 4 * math.pi) / (4 * math.pi):8.2%}")


if __name__ == "__main__":
    main()
