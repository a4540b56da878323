"""Naive versus factored conjugate timings on orthant box lattices of growing size."""
import argparse
import csv
import sys
import time
from dataclasses import dataclass

import numpy as np

from conecal.analysis import catalog
from conecal.cones import orthant
from conecal.conjugate import fast_conjugate_orthant, monotone_conjugate
from conecal.core import build_grid, worker_count


@dataclass
class BenchConfig:
    repeat: int = 3
    # (dimension, points per axis)
    sizes: tuple = ((1, 501), (1, 2001), (2, 16), (2, 32), (2, 64), (2, 96), (3, 8), (3, 16))


def best_of(fn, k):
    best = np.inf
    for _ in range(k):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def run(cfg: BenchConfig):
    fast_conjugate_orthant(catalog("quad", orthant(1)).on(build_grid(orthant(1), 1.0, 0.5)))
    for d, k in cfg.sizes:
        g = build_grid(orthant(d), 1.0, 1.0 / (k - 1))
        f = catalog("quad", orthant(d)).on(g)
        tn = best_of(lambda: monotone_conjugate(f, g), cfg.repeat)
        tf = best_of(lambda: fast_conjugate_orthant(f), cfg.repeat)
        diff = float(np.max(np.abs(monotone_conjugate(f, g).values - fast_conjugate_orthant(f).values)))
        yield [d, k, len(g), repr(tn), repr(tf), repr(tn / tf), repr(diff), worker_count()]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="-")
    p.add_argument("--repeat", type=int, default=BenchConfig.repeat)
    args = p.parse_args(argv)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["dim", "per_axis", "nodes", "naive_s", "fast_s", "speedup", "max_abs_diff", "threads"])
    for row in run(BenchConfig(repeat=args.repeat)):
        w.writerow(row)
        fh.flush()
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
