"""Discrete monotone conjugation on cone grids.

The conjugate of a grid function ``f`` at a dual node ``y`` is the maximum of
``<z, y> - f(z)`` over primal nodes ``z`` with finite ``f(z)``; the sup over
the cone is replaced by a sup over the truncated lattice. Applying the
transform twice gives the discrete biconjugate, a maximum of affine minorants
with cone slopes, so ``f** <= f`` holds on the grid by construction.
"""
from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .core import INF, ExtReal, Grid, PointFunction, build_grid, worker_count

VIOLATION_TOL = 1e-9
DUAL_RADIUS_FACTOR = 2.0
PROBE_FACTOR = 1.5
DIVERGENCE_GROWTH = 0.10
_CHUNK_ENTRIES = 4_000_000


class ImproperFunctionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridFn:
    """Extended-real function sampled on a grid.

    ``dom`` marks the nodes with finite values; elsewhere the function is +inf
    and ``values`` holds ``nan`` so that stray arithmetic cannot pass silently.
    ``source`` (optional) evaluates the same function on arbitrary points and
    lets callers rebuild it on refined grids.
    """

    grid: Grid
    values: np.ndarray
    dom: np.ndarray
    source: Optional[PointFunction] = field(default=None, repr=False)
    name: str = ""

    def __post_init__(self):
        dom = np.asarray(self.dom, dtype=bool).copy()
        vals = np.asarray(self.values, dtype=float).copy()
        if vals.shape != (len(self.grid),) or dom.shape != vals.shape:
            raise ValueError("values and dom must align with grid nodes")
        if not np.all(np.isfinite(vals[dom])):
            raise ValueError("values on dom must be finite (use dom=False for +inf)")
        vals[~dom] = np.nan
        vals.setflags(write=False)
        dom.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "dom", dom)

    @classmethod
    def from_function(cls, grid: Grid, fn: PointFunction, name: str = "") -> "GridFn":
        vals, dom = fn(grid.nodes)
        return cls(grid, np.where(dom, vals, np.nan), dom, fn, name)

    @classmethod
    def from_ext(cls, grid: Grid, values: Sequence[ExtReal], name: str = "") -> "GridFn":
        dom = np.array([not v.is_inf for v in values])
        vals = np.array([v.value if not v.is_inf else np.nan for v in values])
        return cls(grid, vals, dom, None, name)

    def __len__(self):
        return len(self.grid)

    @property
    def proper(self) -> bool:
        return bool(self.dom.any())

    def __getitem__(self, i) -> ExtReal:
        return ExtReal(self.values[i]) if self.dom[i] else INF

    def ext_values(self) -> list:
        return [self[i] for i in range(len(self))]

    def restrict(self, grid: Grid) -> "GridFn":
        if self.source is None:
            raise ValueError("function has no source to evaluate on another grid")
        return GridFn.from_function(grid, self.source, self.name)


@dataclass(frozen=True)
class AffineMinorant:
    """``x -> <slope, x> + offset`` with a cone slope."""

    slope: np.ndarray
    offset: float
    cone: Optional[object] = None

    def __post_init__(self):
        slope = np.asarray(self.slope, dtype=float)
        object.__setattr__(self, "slope", slope)
        if self.cone is not None and not self.cone.contains(slope):
            raise ValueError("minorant slope must lie in the cone")

    def __call__(self, x) -> float:
        return float(np.dot(self.slope, np.asarray(x, dtype=float))) + self.offset


@dataclass
class ConjugateReport:
    f: GridFn
    fstar: GridFn
    fstarstar: GridFn
    max_gap_on_dom: float
    max_violation: float
    divergent: np.ndarray
    fstar_argmax: np.ndarray
    fstarstar_argmax: np.ndarray
    raw_fstarstar: np.ndarray
    timings: dict = field(default_factory=dict)

    @property
    def gaps(self) -> np.ndarray:
        """``f - f**`` on dom nodes, ``nan`` elsewhere."""
        g = np.full(len(self.f), np.nan)
        g[self.f.dom] = self.f.values[self.f.dom] - self.raw_fstarstar[self.f.dom]
        return g

    @property
    def divergent_nodes(self) -> list:
        return np.nonzero(self.divergent)[0].tolist()

    def summary(self) -> dict:
        return {
            "max_gap_on_dom": self.max_gap_on_dom,
            "max_violation": self.max_violation,
            "divergent_nodes": len(self.divergent_nodes),
            "off_dom_nodes": int((~self.f.dom).sum()),
        }


def _check_pair(f: GridFn, dual_grid: Grid):
    if not f.proper:
        raise ImproperFunctionError("function is identically +inf")
    if f.grid.cone != dual_grid.cone:
        raise ValueError(f"cone mismatch: {f.grid.cone} vs {dual_grid.cone}")


def _max_affine(src: np.ndarray, offsets: np.ndarray, dst: np.ndarray):
    """For each row y of ``dst``: max_j <src_j, y> - offsets_j and its first argmax."""
    n_dst = len(dst)
    out = np.empty(n_dst)
    arg = np.empty(n_dst, dtype=np.int64)
    step = max(1, _CHUNK_ENTRIES // max(1, len(src)))
    starts = list(range(0, n_dst, step))

    def work(s):
        block = dst[s:s + step] @ src.T
        block -= offsets
        a = np.argmax(block, axis=1)
        arg[s:s + step] = a
        out[s:s + step] = block[np.arange(len(a)), a]

    workers = min(worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(work, starts))
    else:
        for s in starts:
            work(s)
    return out, arg


def monotone_conjugate_with_argmax(f: GridFn, dual_grid: Grid):
    _check_pair(f, dual_grid)
    idx = np.nonzero(f.dom)[0]
    vals, arg = _max_affine(f.grid.nodes[idx], f.values[idx], dual_grid.nodes)
    return GridFn(dual_grid, vals, np.ones(len(dual_grid), bool), None,
                  f"({f.name})*"), idx[arg]


def monotone_conjugate(f: GridFn, dual_grid: Grid) -> GridFn:
    """Naive discrete monotone conjugate: one max over all primal nodes per dual node.

    Ties go to the smallest primal node index.
    """
    return monotone_conjugate_with_argmax(f, dual_grid)[0]


# -- fast transform on box lattices -------------------------------------------


@numba.njit(cache=True)
def _legendre_lines(x, g, s, out, arg):
    """Per line: out[l, k] = max_j x[j]*s[k] - g[l, j], skipping g = +inf.

    Lower hull of the points (x_j, g_j), then a single left-to-right walk over
    ascending slopes; the maximizer index never moves backwards.
    """
    n_lines, n = g.shape
    m = s.shape[0]
    hx = np.empty(n)
    hg = np.empty(n)
    hi = np.empty(n, dtype=np.int64)
    for line in range(n_lines):
        h = 0
        for j in range(n):
            gj = g[line, j]
            if gj == np.inf:
                continue
            # pop while the last hull point is not strictly below the chord
            while h >= 2:
                cross = (hx[h - 1] - hx[h - 2]) * (gj - hg[h - 2]) - (hg[h - 1] - hg[h - 2]) * (x[j] - hx[h - 2])
                if cross <= 0.0:
                    h -= 1
                else:
                    break
            hx[h] = x[j]
            hg[h] = gj
            hi[h] = j
            h += 1
        if h == 0:
            for k in range(m):
                out[line, k] = -np.inf
                arg[line, k] = -1
            continue
        p = 0
        for k in range(m):
            sk = s[k]
            best = hx[p] * sk - hg[p]
            while p + 1 < h:
                cand = hx[p + 1] * sk - hg[p + 1]
                if cand > best:
                    p += 1
                    best = cand
                else:
                    break
            out[line, k] = best
            arg[line, k] = hi[p]


def _check_box(grid: Grid):
    if grid.cone.kind != "orthant":
        raise ValueError("fast transform needs an orthant grid")
    if not grid.is_box:
        raise ValueError("fast transform needs a full box lattice")


def fast_conjugate_orthant_with_argmax(f: GridFn, dual_grid: Optional[Grid] = None):
    """Factored transform; returns (f*, flat argmax, per-axis argmax arrays)."""
    dual_grid = f.grid if dual_grid is None else dual_grid
    _check_box(f.grid)
    _check_box(dual_grid)
    _check_pair(f, dual_grid)
    xs = f.grid.axis_coords()
    ss = dual_grid.axis_coords()
    d = len(xs)
    # g holds -phi of the previous pass; +inf marks nodes with no candidate
    g = np.where(f.dom, f.values, np.inf).reshape(f.grid.shape)
    args = []
    phi = None
    for axis in range(d):
        moved = np.moveaxis(g, axis, -1)
        lead = moved.shape[:-1]
        lines = np.ascontiguousarray(moved.reshape(-1, moved.shape[-1]))
        out = np.empty((lines.shape[0], len(ss[axis])))
        arg = np.empty((lines.shape[0], len(ss[axis])), dtype=np.int64)
        _legendre_lines(xs[axis], lines, ss[axis], out, arg)
        if np.any(np.diff(arg, axis=1) < 0):
            raise AssertionError("argmax sequence decreased along a line")
        phi = np.moveaxis(out.reshape(lead + (len(ss[axis]),)), -1, axis)
        args.append(np.moveaxis(arg.reshape(lead + (len(ss[axis]),)), -1, axis))
        g = -phi
    values = phi.reshape(-1)
    # backtrack the per-axis maximizers into flat primal indices
    dual_idx = np.indices(dual_grid.shape).reshape(d, -1)
    primal_idx = [None] * d
    for axis in reversed(range(d)):
        key = tuple(dual_idx[i] for i in range(axis + 1)) + tuple(primal_idx[axis + 1:])
        primal_idx[axis] = args[axis][key]
    flat = np.ravel_multi_index(tuple(primal_idx), f.grid.shape)
    fstar = GridFn(dual_grid, values, np.ones(len(dual_grid), bool), None, f"({f.name})*")
    return fstar, flat, args


def fast_conjugate_orthant(f: GridFn, dual_grid: Optional[Grid] = None) -> GridFn:
    """Monotone conjugate on orthant box lattices by d one-dimensional passes.

    The sup over a product lattice factors into per-axis discrete Legendre
    transforms; each uses the lower hull and a monotone pointer walk, linear in
    the line length. The dual grid defaults to the primal grid and may be any
    orthant box lattice.
    """
    return fast_conjugate_orthant_with_argmax(f, dual_grid)[0]


def _conjugate(f: GridFn, dual_grid: Grid, method: str):
    if method == "auto":
        method = "fast" if (f.grid.cone.kind == "orthant" and f.grid.is_box
                            and dual_grid.is_box) else "naive"
    if method == "fast":
        fs, arg, _ = fast_conjugate_orthant_with_argmax(f, dual_grid)
        return fs, arg
    if method == "naive":
        return monotone_conjugate_with_argmax(f, dual_grid)
    raise ValueError(f"unknown method {method!r}")


def default_dual_grid(grid: Grid, factor: float = DUAL_RADIUS_FACTOR) -> Grid:
    if grid.radius is None or grid.spacing is None:
        raise ValueError("default dual grid needs a lattice primal grid")
    return build_grid(grid.cone, factor * grid.radius, grid.spacing)


def biconjugate(f: GridFn, dual_grid: Optional[Grid] = None, method: str = "auto",
                probe_grid: Optional[Grid] = None, probe: bool = True) -> ConjugateReport:
    """f* on ``dual_grid``, then f** back on the primal grid.

    Off-dom nodes (f = +inf there) are probed for divergence: f** is recomputed
    with a dual grid of 1.5x the radius, and nodes whose value grows by more
    than 10% (of |f**|, or of ``h`` times the radius increase when that is
    smaller) are reported as +inf-divergent. With
    ``probe=False`` or when no probe grid can be built, nothing is flagged.
    """
    timings = {}
    if dual_grid is None:
        dual_grid = default_dual_grid(f.grid)
    t0 = time.perf_counter()
    fstar, star_arg = _conjugate(f, dual_grid, method)
    t1 = time.perf_counter()
    fss, ss_arg = _conjugate(fstar, f.grid, method)
    t2 = time.perf_counter()
    timings["conjugate_s"] = t1 - t0
    timings["biconjugate_s"] = t2 - t1

    raw = fss.values.copy()
    diff = raw[f.dom] - f.values[f.dom]
    max_violation = max(0.0, float(diff.max()))
    max_gap = float((-diff).max()) + 0.0  # no -0.0 in reports

    divergent = np.zeros(len(f), dtype=bool)
    off = ~f.dom
    if probe and off.any():
        if probe_grid is None and dual_grid.radius is not None and dual_grid.spacing is not None:
            probe_grid = build_grid(dual_grid.cone, PROBE_FACTOR * dual_grid.radius,
                                    dual_grid.spacing)
        if probe_grid is not None:
            t3 = time.perf_counter()
            fstar_big, _ = _conjugate(f, probe_grid, method)
            fss_big, _ = _conjugate(fstar_big, f.grid, method)
            growth = fss_big.values - raw
            # 10% of |f**|, or of the growth a divergence at rate h would show
            scale = np.abs(raw)
            if (f.grid.spacing is not None and probe_grid.radius is not None
                    and dual_grid.radius is not None):
                scale = np.minimum(scale, f.grid.spacing * (probe_grid.radius - dual_grid.radius))
            divergent = off & (growth > DIVERGENCE_GROWTH * scale + 1e-12)
            timings["probe_s"] = time.perf_counter() - t3

    shown = np.where(divergent, np.nan, raw)
    fstarstar = GridFn(f.grid, shown, ~divergent, None, f"({f.name})**")
    return ConjugateReport(f, fstar, fstarstar, max_gap, max_violation, divergent,
                           star_arg, ss_arg, raw, timings)


def minorants_from_conjugate(fstar: GridFn) -> list:
    """Affine minorants ``L(x) = <y, x> - f*(y)``, one per dual node."""
    cone = fstar.grid.cone
    return [AffineMinorant(y, -float(v), cone)
            for y, v in zip(fstar.grid.nodes, fstar.values)]


def envelope_from_minorants(minorants: Sequence[AffineMinorant], x) -> ExtReal:
    """Pointwise maximum of affine minorants at ``x``."""
    if len(minorants) == 0:
        raise ValueError("need at least one minorant")
    x = np.asarray(x, dtype=float)
    slopes = np.array([m.slope for m in minorants])
    offsets = np.array([m.offset for m in minorants])
    if slopes.shape[1] != x.shape[0]:
        raise ValueError("dimension mismatch")
    return ExtReal(float(np.max(slopes @ x + offsets)))


def fenchel_young_gap(f: GridFn, fstar: GridFn, x_index: int, u_index: int) -> float:
    """``f(x) + f*(u) - <x, u>``; nonnegative, zero iff u is a discrete subgradient at x."""
    if not f.dom[x_index]:
        raise ValueError("f(x) is +inf")
    x = f.grid.nodes[x_index]
    u = fstar.grid.nodes[u_index]
    return float(f.values[x_index] + fstar.values[u_index] - np.dot(x, u))


def fenchel_young_gaps(f: GridFn, fstar: GridFn, x_idx, u_idx) -> np.ndarray:
    x_idx = np.asarray(x_idx)
    u_idx = np.asarray(u_idx)
    if not np.all(f.dom[x_idx]):
        raise ValueError("f(x) is +inf at some sampled x")
    xs = f.grid.nodes[x_idx]
    us = fstar.grid.nodes[u_idx]
    return f.values[x_idx] + fstar.values[u_idx] - np.einsum("ij,ij->i", xs, us)


@dataclass
class SubgradientReport:
    probes: int
    violations: int
    fy_failures: int
    worst_membership: float
    slopes: np.ndarray = field(repr=False)


SUBGRADIENT_TOL = 1e-6


def _neighbor_index(grid: Grid):
    if grid.spacing is None:
        raise ValueError("subgradient probes need a lattice grid")
    h = grid.spacing
    keys = np.rint(grid.nodes / h).astype(np.int64)
    lookup = {tuple(k): i for i, k in enumerate(keys.tolist())}
    d = grid.dim
    plus = np.full((len(grid), d), -1, dtype=np.int64)
    minus = np.full((len(grid), d), -1, dtype=np.int64)
    for i, k in enumerate(keys.tolist()):
        for a in range(d):
            k[a] += 1
            plus[i, a] = lookup.get(tuple(k), -1)
            k[a] -= 2
            minus[i, a] = lookup.get(tuple(k), -1)
            k[a] += 1
    return plus, minus


def subgradient_in_cone_check(f: GridFn, n_probes: int, seed: int,
                              dual_grid: Optional[Grid] = None,
                              tol: float = SUBGRADIENT_TOL) -> SubgradientReport:
    """Check that discrete subgradients of ``f`` lie in the cone.

    Probes are nodes whose lattice neighbours along every axis (both
    directions) lie in dom f. At each probe the slope is the centred
    difference quotient of ``f``, counted as a violation when it leaves the
    cone by more than ``tol``. The dual-grid
    maximizer of ``<x, y> - f*(y)`` must additionally certify Fenchel-Young
    equality at the probe (``fy_failures`` counts where it does not).
    """
    from .core import rng_for

    grid = f.grid
    cone = grid.cone
    plus, minus = _neighbor_index(grid)
    ok = f.dom.copy()
    ok &= np.all(plus >= 0, axis=1) & np.all(minus >= 0, axis=1)
    safe_p = np.where(plus >= 0, plus, 0)
    safe_m = np.where(minus >= 0, minus, 0)
    ok &= np.all(f.dom[safe_p], axis=1) & np.all(f.dom[safe_m], axis=1)
    cand = np.nonzero(ok)[0]
    if len(cand) == 0:
        raise ValueError("no probe node has all its lattice neighbours in dom f")
    rng = rng_for(seed)
    probes = np.sort(rng.choice(cand, size=min(n_probes, len(cand)), replace=False))
    h = grid.spacing
    fp = f.values[safe_p[probes]]
    fm = f.values[safe_m[probes]]
    slopes = (fp - fm) / (2 * h)

    if dual_grid is None:
        dual_grid = default_dual_grid(grid)
    rep = biconjugate(f, dual_grid, probe=False)
    u_idx = rep.fstarstar_argmax[probes]
    fy = fenchel_young_gaps(f, rep.fstar, probes, u_idx)
    fy_failures = int(np.sum(np.abs(fy) > tol))

    if cone.kind == "psd":
        margin = cone.min_eig(slopes)
    elif cone.kind == "orthant":
        margin = slopes.min(axis=1)
    else:
        margin = slopes[:, 0] - np.linalg.norm(slopes[:, 1:], axis=1)
    margin = np.atleast_1d(margin)
    return SubgradientReport(len(probes), int(np.sum(margin < -tol)), fy_failures,
                             float(margin.min()), slopes)


# -- GridFn CSV files ------------------------------------------------------------


def write_gridfn(f: GridFn, path_or_file) -> None:
    """Header ``# cone=<spec> radius=<r> h=<h>``, then ``c1,...,cd,value`` rows
    with ``inf`` for +inf."""
    lines = [f.grid.header()]
    for node, v, ok in zip(f.grid.nodes, f.values, f.dom):
        coords = ",".join(repr(float(c)) for c in node)
        lines.append(f"{coords},{repr(float(v)) if ok else 'inf'}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


_HEADER = re.compile(r"^#\s*cone=(\S+)\s+radius=(\S+)\s+h=(\S+)\s*$")


def read_gridfn(path) -> GridFn:
    from .cones import parse_cone

    with open(path) as fh:
        header = fh.readline().strip()
        m = _HEADER.match(header)
        if not m:
            raise ValueError(f"{path}: bad header {header!r}; expected '# cone=<spec> radius=<r> h=<h>'")
        cone = parse_cone(m.group(1))
        radius = None if m.group(2) == "none" else float(m.group(2))
        h = None if m.group(3) == "none" else float(m.group(3))
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    data = []
    for k, row in enumerate(rows, start=2):
        parts = row.split(",")
        if len(parts) != cone.dim + 1:
            raise ValueError(f"{path}:{k}: expected {cone.dim + 1} fields, got {len(parts)}")
        try:
            data.append([float(p) for p in parts])
        except ValueError as exc:
            raise ValueError(f"{path}:{k}: {exc}") from None
    arr = np.array(data, dtype=float).reshape(-1, cone.dim + 1)
    nodes, vals = arr[:, :-1], arr[:, -1]
    if not np.all(np.isfinite(nodes)):
        raise ValueError(f"{path}: node coordinates must be finite")
    if np.any(np.isnan(vals)) or np.any(vals == -np.inf):
        raise ValueError(f"{path}: values must be finite or inf")
    if not np.all(cone.contains(nodes)):
        raise ValueError(f"{path}: every node must lie in {cone.spec}")
    shape = None
    if cone.kind == "orthant" and radius is not None and h is not None:
        probe = build_grid(cone, radius, h)
        if len(probe) == len(nodes) and np.allclose(probe.nodes, nodes, atol=1e-12, rtol=0):
            shape = probe.shape
    grid = Grid(cone, nodes, radius, h, shape)
    dom = np.isfinite(vals)
    return GridFn(grid, np.where(dom, vals, np.nan), dom, None, str(path))


__all__ = [
    "GridFn", "AffineMinorant", "ConjugateReport", "monotone_conjugate",
    "fast_conjugate_orthant", "biconjugate", "envelope_from_minorants",
    "minorants_from_conjugate", "fenchel_young_gap", "subgradient_in_cone_check",
    "default_dual_grid", "write_gridfn", "read_gridfn",
]
