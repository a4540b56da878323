"""``conecal`` command-line front end.

Exit codes: 0 success, 2 when an audit or verification does not certify its
claim, 1 for malformed specs, unreadable files or exceeded node budgets.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .analysis import parse_function, verify_fenchel_moreau
from .cones import parse_cone, self_duality_audit
from .conjugate import (
    DUAL_RADIUS_FACTOR, GridFn, ImproperFunctionError, fast_conjugate_orthant,
    monotone_conjugate, read_gridfn, write_gridfn,
)
from .core import NodeBudgetError, build_grid, worker_count
from .faces import DEFAULT_ROTATIONS, audit_face, parse_face, perfectness_audit

COMMANDS = ("verify", "conjugate", "project", "faces", "audit-cone", "bench")


class SpecError(ValueError):
    pass


@dataclass
class RunSpec:
    command: str
    cone: Optional[str] = None
    fn: Optional[str] = None
    radius: Optional[float] = None
    spacing: Optional[float] = None
    dual_radius: Optional[float] = None
    levels: int = 1
    seed: int = 0
    out: Optional[str] = None
    format: str = "json"
    points: Optional[str] = None
    face: Optional[str] = None
    samples: int = 1000
    rotations: int = DEFAULT_ROTATIONS
    trend_out: Optional[str] = None
    repeat: int = 3

    def validate(self):
        if self.command not in COMMANDS:
            raise SpecError(f"unknown command {self.command!r}")
        for name in ("radius", "spacing", "dual_radius"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise SpecError(f"--{name.replace('_', '-')} must be positive, got {v!r}")
        for name in ("levels", "samples", "repeat"):
            if getattr(self, name) < 1:
                raise SpecError(f"--{name} must be >= 1, got {getattr(self, name)!r}")
        if self.rotations < 0:
            raise SpecError("--rotations must be >= 0")
        if self.seed < 0:
            raise SpecError("--seed must be >= 0")
        if self.format not in ("json", "csv"):
            raise SpecError(f"--format must be json or csv, got {self.format!r}")
        for name in ("points",):
            path = getattr(self, name)
            if path is not None and not os.path.isfile(path):
                raise SpecError(f"--{name}: no such file {path!r}")


def _positive_real(text: str) -> float:
    try:
        v = float(Fraction(text.strip())) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a real number: {text!r}") from None
    return v


class _Parser(argparse.ArgumentParser):
    # usage errors are spec errors: exit 1, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="conecal", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"conecal {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fn=True, grid=True):
        sp.add_argument("--cone", help="orthant:d, psd:n or lorentz:d")
        if fn:
            sp.add_argument("--fn", help="catalog:<name>[:<params>] or a GridFn CSV path")
        if grid:
            sp.add_argument("--radius", type=_positive_real)
            sp.add_argument("--h", dest="spacing", type=_positive_real,
                            help="grid spacing; fractions like 1/63 are accepted")
            sp.add_argument("--dual-radius", type=_positive_real)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output path (default stdout)")

    sp = sub.add_parser("verify", help="verify f = f** under grid refinement")
    common(sp)
    sp.add_argument("--levels", type=int, default=1)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--trend-out", help="also write the (h, max_gap) trend as CSV")

    sp = sub.add_parser("conjugate", help="write the monotone conjugate as a GridFn CSV")
    common(sp)

    sp = sub.add_parser("project", help="project a points CSV onto the cone")
    common(sp, fn=False, grid=False)
    sp.add_argument("--points", required=True)

    sp = sub.add_parser("faces", help="perfectness audit, or one face with --face")
    common(sp, fn=False, grid=False)
    sp.add_argument("--face", help="orthant-face:d:S, psd-block:n:m[:rotfile], lorentz-ray:d:gfile")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--rotations", type=int, default=DEFAULT_ROTATIONS)

    sp = sub.add_parser("audit-cone", help="sampled self-duality audit")
    common(sp, fn=False, grid=False)
    sp.add_argument("--samples", type=int, default=10_000)

    sp = sub.add_parser("bench", help="naive vs fast conjugate timings (orthant)")
    common(sp)
    sp.add_argument("--repeat", type=int, default=3)
    sp.add_argument("--format", choices=("json", "csv"), default="csv")
    return p


def spec_from_args(ns: argparse.Namespace) -> RunSpec:
    fields = {k: v for k, v in vars(ns).items() if k in RunSpec.__dataclass_fields__ and v is not None}
    spec = RunSpec(**fields)
    spec.validate()
    return spec


# -- output helpers ---------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dump_json(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def _emit(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _provenance(spec: RunSpec) -> dict:
    echo = {k: v for k, v in asdict(spec).items() if v is not None}
    echo.pop("out", None)
    echo.pop("trend_out", None)
    return {"tool": "conecal", "version": __version__, "spec": echo}


# -- inputs -----------------------------------------------------------------------------


def _cone(spec: RunSpec, required=True):
    if spec.cone is None:
        if required:
            raise SpecError("--cone is required")
        return None
    return parse_cone(spec.cone)


def load_function(spec: RunSpec) -> GridFn:
    """A catalog function sampled on the lattice, or a GridFn CSV file."""
    if spec.fn is None:
        raise SpecError("--fn is required")
    cone = _cone(spec, required=not os.path.isfile(spec.fn))
    if os.path.isfile(spec.fn):
        f = read_gridfn(spec.fn)
        if cone is not None and f.grid.cone != cone:
            raise SpecError(f"--cone {spec.cone} disagrees with {spec.fn} ({f.grid.cone.spec})")
        return f
    if not spec.fn.startswith("catalog:"):
        raise SpecError(f"--fn {spec.fn!r} is neither a catalog spec nor an existing file")
    if spec.radius is None or spec.spacing is None:
        raise SpecError("catalog functions need --radius and --h")
    fn = parse_function(spec.fn, cone)
    return fn.on(build_grid(cone, spec.radius, spec.spacing))


def read_points(path: str, dim: int) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for k, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                vals = [float(v) for v in parts]
            except ValueError:
                raise SpecError(f"{path}:{k}: not a number in {line!r}") from None
            if len(vals) != dim:
                raise SpecError(f"{path}:{k}: expected {dim} coordinates, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise SpecError(f"{path}: no points")
    return np.array(rows)


# -- commands ---------------------------------------------------------------------------


def cmd_verify(spec: RunSpec) -> int:
    t0 = time.perf_counter()
    f = load_function(spec)
    verdict = verify_fenchel_moreau(f, spec.levels, spec.dual_radius, seed=spec.seed)
    elapsed = time.perf_counter() - t0
    trend = [(h, g) for h, g in verdict.refinement_trend]
    if spec.trend_out:
        _emit(_csv_text(["h", "max_gap"], [[repr(h), repr(g)] for h, g in trend]), spec.trend_out)
    if spec.format == "csv":
        _emit(_csv_text(["h", "max_gap", "threshold", "status"],
                        [[repr(lv.h), repr(lv.max_gap), repr(lv.threshold), verdict.status]
                         for lv in verdict.levels]), spec.out)
    else:
        grid = f.grid
        report = dict(_provenance(spec))
        report.update({
            "command": "verify",
            "function": f.name,
            "grid": {"cone": grid.cone.spec, "nodes": len(grid), "digest": grid.digest(),
                     "radius": grid.radius, "h": grid.spacing},
            "dual_radius": spec.dual_radius or DUAL_RADIUS_FACTOR * grid.radius,
            "level_digests": [lv.report.fstar.grid.digest() for lv in verdict.levels],
            "verdict": verdict.to_dict(),
            "timings": {"total_s": elapsed,
                        "levels": [lv.report.timings for lv in verdict.levels]},
        })
        _emit(dump_json(report), spec.out)
    return 0 if verdict.identity_holds else 2


def cmd_conjugate(spec: RunSpec) -> int:
    f = load_function(spec)
    grid = f.grid
    if grid.radius is None or grid.spacing is None:
        raise SpecError("conjugate needs a lattice grid (radius and h in the file header)")
    rd = spec.dual_radius or DUAL_RADIUS_FACTOR * grid.radius
    dual = build_grid(grid.cone, rd, grid.spacing)
    if grid.is_box and dual.is_box:
        fs = fast_conjugate_orthant(f, dual)
    else:
        fs = monotone_conjugate(f, dual)
    if spec.out is None:
        write_gridfn(fs, sys.stdout)
    else:
        write_gridfn(fs, spec.out)
    return 0


def cmd_project(spec: RunSpec) -> int:
    cone = _cone(spec)
    pts = read_points(spec.points, cone.dim)
    proj = np.atleast_2d(cone.project(pts))
    _emit(_csv_text([f"c{i + 1}" for i in range(cone.dim)],
                    [[repr(float(v)) for v in row] for row in proj]), spec.out)
    return 0


def cmd_faces(spec: RunSpec) -> int:
    t0 = time.perf_counter()
    report = dict(_provenance(spec))
    if spec.face is not None:
        face = parse_face(spec.face)
        cone = _cone(spec, required=False)
        if cone is not None and cone != face.parent:
            raise SpecError(f"--cone {spec.cone} disagrees with face {spec.face}")
        audit = audit_face(face, spec.samples, spec.seed)
        report.update({"command": "faces", "cone": face.parent.spec,
                       "face": dict(vars(audit), passed=audit.passed), "passed": audit.passed})
        ok = audit.passed
    else:
        cone = _cone(spec)
        res = perfectness_audit(cone, spec.samples, spec.seed, rotations=spec.rotations)
        report.update({"command": "faces"})
        report.update(res.to_dict())
        ok = res.passed
    report["timings"] = {"total_s": time.perf_counter() - t0}
    _emit(dump_json(report), spec.out)
    return 0 if ok else 2


def cmd_audit_cone(spec: RunSpec) -> int:
    t0 = time.perf_counter()
    cone = _cone(spec)
    res = self_duality_audit(cone, spec.samples, spec.seed)
    report = dict(_provenance(spec))
    report.update({"command": "audit-cone", "report": dict(vars(res), passed=res.passed),
                   "timings": {"total_s": time.perf_counter() - t0}})
    _emit(dump_json(report), spec.out)
    return 0 if res.passed else 2


def _best_time(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cmd_bench(spec: RunSpec) -> int:
    f = load_function(spec)
    grid = f.grid
    if grid.cone.kind != "orthant" or not grid.is_box:
        raise SpecError("bench needs an orthant box lattice")
    rd = spec.dual_radius or DUAL_RADIUS_FACTOR * grid.radius
    dual = build_grid(grid.cone, rd, grid.spacing)
    fast_conjugate_orthant(f, dual)  # compile outside the timed region
    t_naive, naive = _best_time(lambda: monotone_conjugate(f, dual), spec.repeat)
    t_fast, fast = _best_time(lambda: fast_conjugate_orthant(f, dual), spec.repeat)
    diff = float(np.max(np.abs(naive.values - fast.values)))
    row = {
        "cone": grid.cone.spec, "function": f.name, "shape": "x".join(map(str, grid.shape)),
        "nodes": len(grid), "dual_nodes": len(dual), "naive_s": t_naive, "fast_s": t_fast,
        "speedup": t_naive / t_fast if t_fast > 0 else math.inf, "max_abs_diff": diff,
        "threads": worker_count(),
    }
    if spec.format == "json":
        report = dict(_provenance(spec))
        report.update({"command": "bench", "grid_digest": grid.digest(),
                       "max_abs_diff": diff, "nodes": len(grid), "dual_nodes": len(dual),
                       "timings": {k: row[k] for k in ("naive_s", "fast_s", "speedup")}})
        _emit(dump_json(report), spec.out)
    else:
        _emit(_csv_text(list(row), [[v if not isinstance(v, float) else repr(v)
                                     for v in row.values()]]), spec.out)
    return 0


HANDLERS = {
    "verify": cmd_verify, "conjugate": cmd_conjugate, "project": cmd_project,
    "faces": cmd_faces, "audit-cone": cmd_audit_cone, "bench": cmd_bench,
}


def run(spec: RunSpec) -> int:
    try:
        spec.validate()
        return HANDLERS[spec.command](spec)
    except (SpecError, NodeBudgetError, ImproperFunctionError, ValueError, OSError) as exc:
        print(f"conecal {spec.command}: error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        spec = spec_from_args(ns)
    except SpecError as exc:
        print(f"conecal {ns.command}: error: {exc}", file=sys.stderr)
        return 1
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
