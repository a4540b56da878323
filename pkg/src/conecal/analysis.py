"""Hypothesis audits, biconjugation verification runs and normal-cone witnesses."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cones import MEMBER_TOL, Cone
from .conjugate import (
    DUAL_RADIUS_FACTOR, PROBE_FACTOR, ConjugateReport, GridFn, biconjugate,
)
from .core import Grid, build_grid, rng_for, smat
from .faces import Face
from .linalg import jacobi_eigh

AUDIT_TOL = 1e-9
GAP_THRESHOLD_FACTOR = 5.0


# -- catalog ------------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogFunction:
    """A named function family instance.

    ``evaluate(points)`` returns ``(values, dom)``. ``gamma`` is True when the
    function is known to be proper, convex, lsc and nondecreasing on the cone,
    False when known not to be, None when unknown. ``conjugate`` (optional)
    evaluates the exact untruncated monotone conjugate, returning
    ``(values, finite)``.
    """

    name: str
    cone: Cone
    evaluate: Callable = field(repr=False)
    gamma: Optional[bool]
    conjugate: Optional[Callable] = field(default=None, repr=False)

    def __call__(self, points):
        return self.evaluate(np.atleast_2d(np.asarray(points, dtype=float)))

    def on(self, grid: Grid) -> GridFn:
        if grid.cone != self.cone:
            raise ValueError(f"{self.name} was built for {self.cone}, grid is over {grid.cone}")
        return GridFn.from_function(grid, self.evaluate, self.name)


def _all(p):
    return np.ones(len(p), dtype=bool)


def _parse_vector(text: str, dim: int) -> np.ndarray:
    text = text.strip().strip("()[]{}")
    parts = [p for p in re.split(r"[,\s]+", text) if p]
    if not parts:
        raise ValueError("empty parameter vector")
    v = np.array([float(p) for p in parts])
    if len(v) == 1:
        return np.full(dim, v[0])
    if len(v) != dim:
        raise ValueError(f"expected {dim} coordinates, got {len(v)}")
    return v


def catalog(name: str, cone: Cone, params: Optional[str] = None) -> CatalogFunction:
    """Build a catalog function on ``cone``.

    Families: ``quad`` (|x|^2), ``lin`` (<a, x>, params a), ``shifted-quad``
    (|x - x0|^2, params x0), ``indicator`` (0 on a point set, default the
    origin; points separated by ';'), ``trace`` (psd only), ``maxcoord``
    (orthant only), ``logdet-barrier`` (psd only, -log det on the interior),
    ``polynomial`` (sum_k c_k |x|^k, params c0,c1,...). A single number given
    as a vector parameter is broadcast to every coordinate.
    """
    d = cone.dim
    if name == "quad":
        def conj(y):
            p = np.atleast_2d(cone.project(y))
            return np.sum(p * p, axis=1) / 4.0, _all(y)
        return CatalogFunction("quad", cone, lambda p: (np.sum(p * p, axis=1), _all(p)),
                               True, conj)
    if name == "lin":
        if params is None:
            raise ValueError("lin needs a slope, e.g. lin:1,1")
        a = _parse_vector(params, d)

        def conj(y):
            fin = np.atleast_1d(cone.contains(a - np.atleast_2d(y)))
            return np.zeros(len(fin)), fin
        return CatalogFunction(f"lin:{params}", cone, lambda p: (p @ a, _all(p)),
                               bool(cone.contains(a)), conj)
    if name == "shifted-quad":
        x0 = _parse_vector(params if params is not None else "1", d)
        return CatalogFunction(
            f"shifted-quad:{params if params is not None else '1'}", cone,
            lambda p: (np.sum((p - x0) ** 2, axis=1), _all(p)),
            # |x - x0|^2 = |x|^2 + 2<x, -x0> + |x0|^2 is nondecreasing iff -x0 is a member
            bool(cone.contains(-x0)))
    if name == "indicator":
        spec = (params or "0").strip()
        if spec.strip("{}() ") in ("0", "origin", ""):
            pts = np.zeros((1, d))
        else:
            pts = np.array([_parse_vector(s, d) for s in spec.strip("{}").split(";")])

        def ev(p):
            hit = np.zeros(len(p), dtype=bool)
            for q in pts:
                hit |= np.all(np.abs(p - q) <= 1e-9, axis=1)
            return np.zeros(len(p)), hit

        is_origin = len(pts) == 1 and not pts.any()

        def conj(y):
            y = np.atleast_2d(y)
            return np.max(y @ pts.T, axis=1), _all(y)
        return CatalogFunction(f"indicator:{spec}", cone, ev,
                               True if is_origin else None, conj)
    if name == "trace":
        if cone.kind != "psd":
            raise ValueError("trace is defined on psd cones only")
        n = cone.n
        eye = np.concatenate([np.ones(n), np.zeros(d - n)])

        def conj(y):
            fin = np.atleast_1d(cone.contains(eye - np.atleast_2d(y)))
            return np.zeros(len(fin)), fin
        return CatalogFunction("trace", cone, lambda p: (p[:, :n].sum(axis=1), _all(p)),
                               True, conj)
    if name == "maxcoord":
        if cone.kind != "orthant":
            raise ValueError("maxcoord is defined on orthant cones only")
        return CatalogFunction("maxcoord", cone, lambda p: (p.max(axis=1), _all(p)), True)
    if name == "logdet-barrier":
        if cone.kind != "psd":
            raise ValueError("logdet-barrier is defined on psd cones only")

        def ev(p):
            w = jacobi_eigh(smat(p))[0]
            inside = w[:, 0] > 1e-12
            vals = np.zeros(len(p))
            vals[inside] = -np.sum(np.log(w[inside]), axis=1)
            return vals, inside
        # convex and lsc, but decreasing along the cone order
        return CatalogFunction("logdet-barrier", cone, ev, False)
    if name == "polynomial":
        if params is None:
            raise ValueError("polynomial needs coefficients, e.g. polynomial:0,0.5,0.5")
        coeffs = np.array([float(c) for c in params.strip("()[]").split(",")])

        def ev(p):
            r = np.linalg.norm(p, axis=1)
            return np.polynomial.polynomial.polyval(r, coeffs), _all(p)
        # nondecreasing convex g of |x| is nondecreasing on any self-dual cone
        gamma = True if np.all(coeffs[1:] >= 0) else None
        return CatalogFunction(f"polynomial:{params}", cone, ev, gamma)
    raise ValueError(f"unknown catalog function {name!r}")


def parse_function(spec: str, cone: Cone) -> CatalogFunction:
    """Parse ``catalog:<name>[:<params>]`` (the ``catalog:`` prefix is optional)."""
    s = spec.strip()
    if s.startswith("catalog:"):
        s = s[len("catalog:"):]
    name, _, params = s.partition(":")
    return catalog(name, cone, params or None)


def gamma_catalog(cone: Cone) -> list:
    """Every catalog instance certified nondecreasing-convex on ``cone``, as used
    by the positive verification suite."""
    d = cone.dim
    if cone.kind == "orthant":
        slope = [1.0 if i % 2 == 0 else 0.5 for i in range(d)]
    elif cone.kind == "psd":
        # identity plus one off-diagonal coordinate: positive definite
        slope = [1.0] * cone.n + [0.5] + [0.0] * (d - cone.n - 1)
        slope = slope[:d]
    else:
        slope = [1.0, 0.5] + [0.0] * (d - 2)
    items = [catalog("quad", cone), catalog("indicator", cone),
             catalog("polynomial", cone, "0,0.5,0.75"),
             catalog("lin", cone, ",".join(f"{a:g}" for a in slope))]
    if cone.kind == "orthant":
        items.append(catalog("maxcoord", cone))
    if cone.kind == "psd":
        items.append(catalog("trace", cone))
    return [f for f in items if f.gamma]


# -- audits -------------------------------------------------------------------------


@dataclass
class GammaAudit:
    convexity_violations: int
    monotonicity_violations: int
    proper: bool
    worst_convexity_gap: float
    worst_monotonicity_gap: float
    convexity_pairs: int = 0
    monotonicity_pairs: int = 0
    # a finite grid cannot witness lower semicontinuity
    lsc_checked: bool = False

    @property
    def certified(self) -> bool:
        return self.proper and self.convexity_violations == 0 and self.monotonicity_violations == 0


def _lattice_keys(grid: Grid):
    if grid.spacing is None:
        raise ValueError("gamma audit needs a lattice grid")
    q = grid.nodes / grid.spacing
    keys = np.rint(q)
    if np.max(np.abs(q - keys)) > 1e-6:
        raise ValueError("grid nodes are not on a lattice of the stated spacing")
    return keys.astype(np.int64)


def gamma_audit(f: GridFn, n_pairs: int, seed: int, tol: float = AUDIT_TOL) -> GammaAudit:
    """Sampled convexity and monotonicity checks on grid nodes.

    Convexity uses random node pairs whose midpoint is a node, plus all
    adjacent-triple midpoints along lattice axes. Monotonicity uses random
    ordered node pairs plus every axis-neighbour pair that is ordered.
    """
    grid = f.grid
    cone = grid.cone
    keys = _lattice_keys(grid)
    lookup = {tuple(k): i for i, k in enumerate(keys.tolist())}
    rng = rng_for(seed)
    n = len(grid)
    vals = np.where(f.dom, f.values, np.inf)

    # convexity -----------------------------------------------------------------
    ia = rng.integers(0, n, 8 * n_pairs)
    ib = rng.integers(0, n, 8 * n_pairs)
    s = keys[ia] + keys[ib]
    even = np.all(s % 2 == 0, axis=1) & (ia != ib)
    trip = []
    for a, b, k in zip(ia[even], ib[even], (s[even] // 2).tolist()):
        m = lookup.get(tuple(k))
        if m is not None:
            trip.append((a, b, m))
            if len(trip) >= n_pairs:
                break
    d = grid.dim
    for i, k in enumerate(keys.tolist()):
        for ax in range(d):
            k[ax] += 1
            hi = lookup.get(tuple(k))
            k[ax] -= 2
            lo = lookup.get(tuple(k))
            k[ax] += 1
            if hi is not None and lo is not None:
                trip.append((lo, hi, i))
    trip = np.array(trip, dtype=np.int64).reshape(-1, 3)
    a, b, m = trip[:, 0], trip[:, 1], trip[:, 2]
    both = f.dom[a] & f.dom[b]
    with np.errstate(invalid="ignore"):
        cgap = np.where(both, vals[m] - 0.5 * (vals[a] + vals[b]), -np.inf)
    conv_bad = cgap > tol
    worst_c = float(cgap.max()) if len(cgap) and np.isfinite(cgap.max()) else 0.0
    if np.isinf(worst_c):
        worst_c = math.inf

    # monotonicity: x >= y must give f(x) >= f(y) ------------------------------------
    ix = rng.integers(0, n, 4 * n_pairs)
    iy = rng.integers(0, n, 4 * n_pairs)
    ordered = np.atleast_1d(cone.order_leq(grid.nodes[iy], grid.nodes[ix], MEMBER_TOL)) & (ix != iy)
    px, py = list(ix[ordered][:n_pairs]), list(iy[ordered][:n_pairs])
    for i, k in enumerate(keys.tolist()):
        for ax in range(d):
            k[ax] += 1
            j = lookup.get(tuple(k))
            k[ax] -= 1
            if j is not None:
                px.append(j)
                py.append(i)
    px, py = np.array(px, dtype=np.int64), np.array(py, dtype=np.int64)
    if len(px):
        keep = np.atleast_1d(cone.order_leq(grid.nodes[py], grid.nodes[px], MEMBER_TOL))
        px, py = px[keep], py[keep]
    # +inf at x never violates; finite at x with +inf at y always does
    with np.errstate(invalid="ignore"):
        mgap = np.where(f.dom[px], np.where(f.dom[py], vals[py] - vals[px], np.inf), -np.inf)
    mono_bad = mgap > tol
    worst_m = float(mgap.max()) if len(mgap) else 0.0

    return GammaAudit(int(conv_bad.sum()), int(mono_bad.sum()), f.proper,
                      max(worst_c, 0.0), max(worst_m, 0.0), len(trip), len(px))


# -- Fenchel-Moreau verification -------------------------------------------------------


@dataclass
class LevelResult:
    h: float
    nodes: int
    dual_nodes: int
    max_gap: float
    max_violation: float
    threshold: float
    divergent_nodes: int
    off_dom_nodes: int
    spurious_finite: int
    gamma: GammaAudit
    report: ConjugateReport = field(repr=False)


@dataclass
class FMVerdict:
    gamma: GammaAudit
    report: ConjugateReport
    identity_holds: bool
    refinement_trend: list
    status: str
    levels: list = field(repr=False)

    def worst_node(self) -> tuple:
        """(coordinates, gap) of the largest ``f - f**`` at the finest level."""
        g = self.report.gaps
        if not np.any(np.isfinite(g)):
            return None, 0.0
        i = int(np.nanargmax(g))
        return [float(v) for v in self.report.f.grid.nodes[i]], float(g[i])

    def to_dict(self) -> dict:
        node, gap = self.worst_node()
        return {
            "identity_holds": self.identity_holds,
            "worst_node": node,
            "worst_gap": gap,
            "status": self.status,
            "gamma": dict(vars(self.gamma), certified=self.gamma.certified),
            "refinement_trend": [{"h": h, "max_gap": g} for h, g in self.refinement_trend],
            "levels": [{
                "h": lv.h, "nodes": lv.nodes, "dual_nodes": lv.dual_nodes,
                "max_gap_on_dom": lv.max_gap, "max_violation": lv.max_violation,
                "gap_threshold": lv.threshold, "divergent_nodes": lv.divergent_nodes,
                "off_dom_nodes": lv.off_dom_nodes, "spurious_finite": lv.spurious_finite,
            } for lv in self.levels],
        }


def gap_threshold(h: float, dual_radius: float) -> float:
    return GAP_THRESHOLD_FACTOR * h * dual_radius


def _run_level(f: GridFn, dual_grid: Grid, n_pairs: int, seed: int, method: str,
               probe_grid: Optional[Grid] = None) -> LevelResult:
    gam = gamma_audit(f, n_pairs, seed)
    rep = biconjugate(f, dual_grid, method=method, probe_grid=probe_grid)
    off = ~f.dom
    spurious = int(np.sum(off & ~rep.divergent))
    radius = dual_grid.radius if dual_grid.radius is not None else float(
        np.linalg.norm(dual_grid.nodes, axis=1).max())
    h = f.grid.spacing
    return LevelResult(h, len(f.grid), len(dual_grid), rep.max_gap_on_dom, rep.max_violation,
                       gap_threshold(h, radius), int(rep.divergent.sum()), int(off.sum()),
                       spurious, gam, rep)


def _judge(levels: list) -> tuple:
    gam = levels[-1].gamma
    certified = all(lv.gamma.certified for lv in levels)
    gaps = [lv.max_gap for lv in levels]
    shrinking = all(b <= a + AUDIT_TOL for a, b in zip(gaps, gaps[1:]))
    final = levels[-1]
    ok = (certified and shrinking and final.max_gap <= final.threshold
          and final.spurious_finite == 0 and final.max_violation <= AUDIT_TOL)
    if ok:
        status = "identity-verified"
    elif certified:
        # the continuum identity holds for certified inputs; a failure here
        # points at resolution, not at the identity
        status = "inconclusive-discretization"
    else:
        status = "hypothesis-failed"
    return gam, ok, status


def verify_fenchel_moreau(f: GridFn, refinement_levels: int, dual_radius: Optional[float] = None,
                          n_pairs: int = 2000, seed: int = 0, method: str = "auto") -> FMVerdict:
    """Audit the hypotheses and measure ``f - f**`` at spacings h, h/2, ...

    ``f`` must be a lattice grid function with a ``source`` when more than one
    level is requested. The identity is reported to hold when the function is
    certified, the gap on dom does not grow under refinement, the finest gap
    is within ``5 * h * dual_radius``, f** never exceeds f, and every node off
    dom f is flagged +inf-divergent.
    """
    if refinement_levels < 1:
        raise ValueError("refinement_levels must be >= 1")
    grid = f.grid
    if grid.radius is None or grid.spacing is None:
        raise ValueError("verification needs a lattice grid")
    if refinement_levels > 1 and f.source is None:
        raise ValueError("refinement needs a function with a source")
    rd = dual_radius if dual_radius is not None else DUAL_RADIUS_FACTOR * grid.radius
    levels = []
    for k in range(refinement_levels):
        h = grid.spacing / 2 ** k
        fk = f if k == 0 else f.restrict(build_grid(grid.cone, grid.radius, h))
        dual = build_grid(grid.cone, rd, h)
        levels.append(_run_level(fk, dual, n_pairs, seed + k, method))
    gam, ok, status = _judge(levels)
    return FMVerdict(gam, levels[-1].report, ok, [(lv.h, lv.max_gap) for lv in levels],
                     status, levels)


# -- boundary-supported domains ------------------------------------------------------------


@dataclass
class BoundaryProbe:
    ambient: FMVerdict
    reduced: FMVerdict
    max_mismatch: float
    mismatch_tolerance: float
    off_face_all_divergent: bool

    @property
    def holds(self) -> bool:
        return (self.ambient.identity_holds and self.reduced.identity_holds
                and self.max_mismatch <= self.mismatch_tolerance
                and self.off_face_all_divergent)

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "ambient": self.ambient.to_dict(),
            "reduced": self.reduced.to_dict(),
            "max_mismatch": self.max_mismatch,
            "mismatch_tolerance": self.mismatch_tolerance,
            "off_face_all_divergent": self.off_face_all_divergent,
        }


def face_function(face: Face, reduced_fn: Callable, name: str = "") -> Callable:
    """Lift ``reduced_fn`` (on reduced coordinates) to the ambient cone: finite
    exactly on face members."""
    def ev(p):
        on = np.atleast_1d(face.member(p))
        vals = np.zeros(len(p))
        if on.any():
            vals[on] = reduced_fn(face.to_reduced(p[on]))
        return vals, on
    return ev


def _reduced_pitch(t: np.ndarray, h: float) -> float:
    """Lattice pitch of reduced coordinates: ``h`` when they sit on the h-lattice,
    else (rays) the smallest positive coordinate."""
    if np.all(np.abs(t / h - np.rint(t / h)) <= 1e-6):
        return h
    pos = t[t > 1e-12]
    if t.shape[1] == 1 and len(pos):
        p = float(pos.min())
        if np.all(np.abs(t / p - np.rint(t / p)) <= 1e-6):
            return p
    raise ValueError("face nodes do not form a lattice in reduced coordinates")


def _reduced_grid(face: Face, grid: Grid) -> tuple:
    on = np.atleast_1d(face.member(grid.nodes))
    idx = np.nonzero(on)[0]
    t = face.to_reduced(grid.nodes[idx])
    return Grid(face.reduced_cone, t, grid.radius, _reduced_pitch(t, grid.spacing), None), idx


def boundary_domain_probe(c: Cone, face: Face, f_on_face: GridFn, refinement_levels: int = 3,
                          dual_radius: Optional[float] = None, n_pairs: int = 2000,
                          seed: int = 0) -> BoundaryProbe:
    """Verify the identity for a function whose domain lies in a proper face.

    The ambient run treats ``f`` as a function on ``c`` (its domain has empty
    interior there). The reduced run restricts everything to the span of the
    face, in reduced coordinates, where the face is a full cone. The ambient
    f** restricted to face nodes must match the reduced biconjugate within
    twice the single-run gap threshold, and every off-face node must be
    flagged +inf-divergent.
    """
    if f_on_face.grid.cone != c or face.parent != c:
        raise ValueError("face, function and cone disagree")
    if face.kind == "zero":
        raise ValueError("zero face: the function is finite only at the origin, trivially verified")
    if np.any(f_on_face.dom & ~np.atleast_1d(face.member(f_on_face.grid.nodes))):
        raise ValueError("function must be +inf off the face")
    ambient = verify_fenchel_moreau(f_on_face, refinement_levels, dual_radius, n_pairs, seed)
    grid = f_on_face.grid
    rd = dual_radius if dual_radius is not None else DUAL_RADIUS_FACTOR * grid.radius

    red_levels = []
    mismatch = 0.0
    tol = 0.0
    for k, lv in enumerate(ambient.levels):
        amb = lv.report
        pg, pidx = _reduced_grid(face, amb.f.grid)
        dg, _ = _reduced_grid(face, amb.fstar.grid)
        probe_full = build_grid(c, PROBE_FACTOR * rd, lv.h)
        qg, _ = _reduced_grid(face, probe_full)
        red_f = GridFn(pg, amb.f.values[pidx], amb.f.dom[pidx], None, f"{f_on_face.name}|face")
        rlv = _run_level(red_f, dg, n_pairs, seed + 100 + k, "naive", probe_grid=qg)
        rlv.threshold = gap_threshold(lv.h, rd)
        red_levels.append(rlv)
        # compare on face nodes where f is finite
        on = amb.f.dom[pidx]
        diff = np.abs(amb.raw_fstarstar[pidx][on] - rlv.report.raw_fstarstar[on])
        mismatch = float(diff.max()) if len(diff) else 0.0
        tol = 2.0 * lv.threshold
    gam, ok, status = _judge(red_levels)
    reduced = FMVerdict(gam, red_levels[-1].report, ok,
                        [(lv.h, lv.max_gap) for lv in red_levels], status, red_levels)
    last = ambient.levels[-1].report
    off_face = ~np.atleast_1d(face.member(last.f.grid.nodes))
    return BoundaryProbe(ambient, reduced, mismatch, tol, bool(np.all(last.divergent[off_face])))


# -- outer normal cone witnesses --------------------------------------------------------------


class NoWitness(RuntimeError):
    """No normal-cone witness was produced."""


class ScalingHypothesisError(NoWitness):
    """Some multiple ``lam * y`` with ``lam > 1`` lies in the domain set."""


class WitnessSearchFailed(NoWitness):
    pass


WITNESS_TOL = 1e-7
WITNESS_MAX_ITERS = 10_000
WITNESS_RESTARTS = 5
WITNESS_STEP = 0.1


@dataclass
class NormalWitness:
    z: np.ndarray
    max_violation: float
    pairing: float
    iterations: int
    restart: int


def check_normal_witness(omega, y, z, c: Cone, tol: float = WITNESS_TOL) -> tuple:
    """(max_w <z, w - y>, z in C, <z, y>) over the whole of ``omega``."""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    return float(np.max((omega - y) @ z)), bool(c.contains(z)), float(z @ y)


def normal_cone_witness(omega, y, c: Cone, seed: int = 0, tol: float = WITNESS_TOL,
                        max_iters: int = WITNESS_MAX_ITERS,
                        restarts: int = WITNESS_RESTARTS) -> NormalWitness:
    """Find ``z`` in ``C`` with ``<z, w - y> <= tol`` for every ``w`` in ``omega``
    and ``<z, y> > 0``.

    Projected subgradient steps on the worst violator, ``z <- P_C(z - eta (w* - y))``
    with ``eta = 0.1/sqrt(iter)``, renormalized each step. The first run starts
    from ``P_C(y)``; later restarts from random cone members. Raises
    :class:`ScalingHypothesisError` if some ``lam * y`` (``lam > 1``) lies in
    ``omega`` and :class:`WitnessSearchFailed` when no run succeeds.
    """
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    y = np.asarray(y, dtype=float)
    if not np.any(np.all(np.abs(omega - y) <= 1e-9, axis=1)):
        raise ValueError("y must be one of the omega points")
    if not np.all(c.contains(omega)):
        raise ValueError("omega must lie in the cone")
    yy = float(y @ y)
    if yy > 0:
        lam = omega @ y / yy
        resid = np.linalg.norm(omega - lam[:, None] * y, axis=1)
        if np.any((resid <= 1e-9 * max(1.0, math.sqrt(yy))) & (lam > 1 + 1e-9)):
            raise ScalingHypothesisError("lam * y lies in omega for some lam > 1")
    rng = rng_for(seed)
    diffs = omega - y
    for r in range(restarts):
        z = np.atleast_1d(c.project(y)) if r == 0 else c.sample_member(rng)
        nz = np.linalg.norm(z)
        z = z / nz if nz > 0 else c.interior_point() / np.linalg.norm(c.interior_point())
        for it in range(1, max_iters + 1):
            scores = diffs @ z
            worst = int(np.argmax(scores))
            pairing = float(z @ y)
            if scores[worst] <= tol and pairing > 0 and c.contains(z):
                return NormalWitness(z, float(scores[worst]), pairing, it, r)
            step = diffs[worst] if scores[worst] > tol else -y
            z = np.atleast_1d(c.project(z - WITNESS_STEP / math.sqrt(it) * step))
            nz = np.linalg.norm(z)
            if nz == 0:
                break
            z = z / nz
    raise WitnessSearchFailed(f"no normal-cone witness after {restarts} restarts")


def lattice_points(cone: Cone, radius: float, spacing: float, keep: Callable) -> np.ndarray:
    """Nodes of ``build_grid(cone, radius, spacing)`` satisfying ``keep``."""
    g = build_grid(cone, radius, spacing)
    return g.nodes[np.asarray(keep(g.nodes), dtype=bool)]


__all__ = [
    "catalog", "parse_function", "gamma_catalog", "CatalogFunction", "GammaAudit",
    "gamma_audit", "FMVerdict", "verify_fenchel_moreau", "boundary_domain_probe",
    "BoundaryProbe", "face_function", "normal_cone_witness", "NoWitness",
    "ScalingHypothesisError", "WitnessSearchFailed", "check_normal_witness",
    "gap_threshold", "lattice_points",
]
