"""Gap-versus-spacing trends for the positive catalog and the shifted quadratic.

Writes one CSV row per (cone, function, level): plot max_gap against h on
log-log axes to see which inputs converge and which stall.
"""
import argparse
import csv
import sys
from dataclasses import dataclass, field

from conecal.analysis import catalog, gamma_catalog, verify_fenchel_moreau
from conecal.cones import parse_cone
from conecal.core import build_grid


@dataclass
class StudyConfig:
    cones: list = field(default_factory=lambda: ["orthant:1", "orthant:2", "lorentz:2", "psd:2"])
    radius: float = 2.0
    orthant_h: float = 0.04
    other_h: float = 0.5
    levels: int = 3
    seed: int = 0
    counterexample: bool = True


def rows(cfg: StudyConfig):
    for spec in cfg.cones:
        cone = parse_cone(spec)
        h = cfg.orthant_h if cone.kind == "orthant" else cfg.other_h
        fns = list(gamma_catalog(cone))
        if cfg.counterexample:
            fns.append(catalog("shifted-quad", cone, "1"))
        grid = build_grid(cone, cfg.radius, h)
        for fn in fns:
            v = verify_fenchel_moreau(fn.on(grid), cfg.levels, seed=cfg.seed)
            for lv in v.levels:
                yield [cone.spec, fn.name, repr(lv.h), lv.nodes, repr(lv.max_gap),
                       repr(lv.threshold), v.status]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="-")
    p.add_argument("--levels", type=int, default=StudyConfig.levels)
    p.add_argument("--cones", nargs="+", default=None)
    args = p.parse_args(argv)
    cfg = StudyConfig(levels=args.levels)
    if args.cones:
        cfg.cones = args.cones
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["cone", "function", "h", "nodes", "max_gap", "threshold", "status"])
    for row in rows(cfg):
        w.writerow(row)
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
