"""Regenerate the arrowhead growth, arrowhead density and Poisson tables.

Usage: python3 scripts/reproduce.py [--scale 0.1] [--rows N] [--outdir results]
"""

import argparse
from pathlib import Path

from densepre.bench_cli import main

TABLES = ("arrowhead_growth", "arrowhead_density", "poisson_square")


def run(scale, rows, outdir, repeats):
    outdir.mkdir(parents=True, exist_ok=True)
    codes = {}
    for table in TABLES:
        argv = ["reproduce", table, "--scale", str(scale), "--repeats", str(repeats),
                "--out", str(outdir / f"{table}.csv")]
        if rows is not None:
            argv += ["--rows", str(rows)]
        codes[table] = main(argv)
        print(f"{table}: exit {codes[table]} -> {outdir / (table + '.csv')}")
    return max(codes.values())


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scale", type=float, default=0.1)
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--outdir", type=Path, default=Path("results"))
    a = p.parse_args()
    raise SystemExit(run(a.scale, a.rows, a.outdir, a.repeats))
