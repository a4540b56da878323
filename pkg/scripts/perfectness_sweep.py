"""Perfectness audits over a range of cone sizes; one JSON summary per cone."""
import argparse
import json
import time
from dataclasses import dataclass, field

from conecal.cones import parse_cone
from conecal.faces import perfectness_audit


@dataclass
class SweepConfig:
    cones: list = field(default_factory=lambda: ["orthant:2", "orthant:4", "psd:2", "psd:3",
                                                  "psd:4", "lorentz:2", "lorentz:4", "lorentz:6"])
    samples: int = 1000
    rotations: int = 20
    seed: int = 0


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--samples", type=int, default=SweepConfig.samples)
    p.add_argument("--rotations", type=int, default=SweepConfig.rotations)
    p.add_argument("--cones", nargs="+", default=None)
    args = p.parse_args(argv)
    cfg = SweepConfig(samples=args.samples, rotations=args.rotations)
    if args.cones:
        cfg.cones = args.cones
    for spec in cfg.cones:
        t0 = time.perf_counter()
        rep = perfectness_audit(parse_cone(spec), cfg.samples, cfg.seed, rotations=cfg.rotations)
        bad = [f.face for f in rep.faces if not f.passed]
        print(json.dumps({"cone": spec, "passed": rep.passed, "faces": len(rep.faces),
                          "failed_faces": bad, "seconds": round(time.perf_counter() - t0, 2)}))


if __name__ == "__main__":
    main()
