"""Triple counts and per-stage timings as the synthetic city grows.

    python scripts/scale_report.py [--sizes 10 50 100 200] [--config combined]
"""
import argparse
import tempfile
import time
from pathlib import Path

from cityvizforge import pipeline
from cityvizforge.fixtures import make_fixtures


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 50, 100, 200])
    ap.add_argument("--config", default="combined", help="fixture config name without .cfg")
    args = ap.parse_args()
    print(f"{'buildings':>9} {'triples':>8} {'convert':>8} {'ingest':>7} {'apply':>7} {'layout':>7} {'emit':>7} {'total':>7}")
    for n in args.sizes:
        d = Path(tempfile.mkdtemp(prefix=f"cvf-scale{n}-"))
        make_fixtures(d, n_buildings=n)
        pipeline._model.cache_clear()
        pipeline._geometry.cache_clear()
        stages, triples = {}, 0

        def report(r):
            nonlocal triples
            key = r.stage.split()[0]
            stages[key] = stages.get(key, 0.0) + r.seconds
            if key == "convert":
                triples = int(r.detail.split()[0])

        t0 = time.perf_counter()
        pipeline.run_pipeline(pipeline.load_config(d / f"{args.config}.cfg"), report)
        total = time.perf_counter() - t0
        cols = " ".join(f"{stages.get(k, 0.0):7.2f}" for k in ("ingest", "apply", "layout", "emit"))
        print(f"{n:>9} {triples:>8} {stages['convert']:8.2f} {cols} {total:7.2f}")


if __name__ == "__main__":
    main()
