"""Value types shared by every module: extended reals, points, lattice grids."""
from __future__ import annotations

import functools
import hashlib
import math
import os
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

if TYPE_CHECKING:
    from .cones import Cone

NODE_BUDGET = 2_000_000
# lattice candidates enumerated before filtering by membership
ENUMERATION_BUDGET = 16 * NODE_BUDGET
GRID_TOL = 1e-9

SQRT2 = math.sqrt(2.0)


class ExtendedArithmeticError(ArithmeticError):
    """Raised for operations with no value in (-inf, +inf], such as inf - inf."""


class NodeBudgetError(ValueError):
    pass


@functools.total_ordering
class ExtReal:
    """A value in (-inf, +inf].

    +inf is a tagged state (``value is None``), never an IEEE float, so that
    ``inf - inf`` raises instead of quietly producing ``nan``.
    """

    __slots__ = ("_value",)

    def __init__(self, value: Optional[float]):
        if value is not None:
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"ExtReal needs a finite float or None, got {value}")
        self._value = value

    @classmethod
    def inf(cls) -> "ExtReal":
        return INF

    @property
    def is_inf(self) -> bool:
        return self._value is None

    @property
    def value(self) -> float:
        if self._value is None:
            raise ExtendedArithmeticError("+inf has no finite value")
        return self._value

    def _coerce(self, other) -> "ExtReal":
        if isinstance(other, ExtReal):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return ExtReal(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_inf or other.is_inf:
            return INF
        return ExtReal(self._value + other._value)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if other.is_inf:
            # inf - inf is undefined; finite - inf would be -inf
            raise ExtendedArithmeticError(f"{self} - inf is not representable")
        if self.is_inf:
            return INF
        return ExtReal(self._value - other._value)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other.__sub__(self)

    def __neg__(self):
        if self.is_inf:
            raise ExtendedArithmeticError("-inf is not representable")
        return ExtReal(-self._value)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._value == other._value

    def __lt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_inf:
            return False
        if other.is_inf:
            return True
        return self._value < other._value

    def __hash__(self):
        return hash(self._value)

    def __float__(self):
        return math.inf if self.is_inf else self._value

    def __repr__(self):
        return "ExtReal(inf)" if self.is_inf else f"ExtReal({self._value!r})"

    def __str__(self):
        return "inf" if self.is_inf else repr(self._value)


INF = ExtReal(None)


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"a point must be a 1-D coordinate vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("point coordinates must be finite")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {a.shape[0]}")
    return a


def inner(a, b) -> float:
    """Euclidean inner product of coordinate vectors.

    Elementwise products commute exactly and are summed in coordinate order,
    so ``inner(a, b) == inner(b, a)`` bit for bit.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def svec(mat) -> np.ndarray:
    """Isometric vectorization of symmetric matrices (batched over leading axes).

    Diagonal entries first, then the strictly-upper entries (row-major) scaled
    by sqrt(2); dot products of svecs equal Frobenius products.
    """
    m = np.asarray(mat, dtype=float)
    n = m.shape[-1]
    iu = np.triu_indices(n, 1)
    diag = np.diagonal(m, axis1=-2, axis2=-1)
    off = m[..., iu[0], iu[1]] * SQRT2
    return np.concatenate([diag, off], axis=-1)


def smat(v) -> np.ndarray:
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float)
    n = psd_order(v.shape[-1])
    out = np.zeros(v.shape[:-1] + (n, n))
    idx = np.arange(n)
    out[..., idx, idx] = v[..., :n]
    iu = np.triu_indices(n, 1)
    off = v[..., n:] / SQRT2
    out[..., iu[0], iu[1]] = off
    out[..., iu[1], iu[0]] = off
    return out


def psd_order(dim: int) -> int:
    n = int(round((math.sqrt(8 * dim + 1) - 1) / 2))
    if n * (n + 1) // 2 != dim:
        raise ValueError(f"{dim} is not a triangular number n(n+1)/2")
    return n


def rng_for(seed: int) -> np.random.Generator:
    """Generator for a 64-bit seed; same seed, same stream."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def worker_count() -> int:
    raw = os.environ.get("CONECAL_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("CONECAL_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True, eq=False)
class Grid:
    """Finite node set inside a cone.

    Lattice grids carry ``radius`` and ``spacing``; orthant box lattices also
    carry ``shape`` (nodes in C order). Grids built from arbitrary point sets
    leave those as ``None``.
    """

    cone: "Cone"
    nodes: np.ndarray
    radius: Optional[float] = None
    spacing: Optional[float] = None
    shape: Optional[tuple] = None
    _lookup: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != self.cone.dim:
            raise ValueError(f"nodes must have shape (N, {self.cone.dim}), got {nodes.shape}")
        if len(nodes) == 0:
            raise ValueError("grid has no nodes")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def is_box(self) -> bool:
        return self.shape is not None

    def axis_coords(self) -> list:
        """Per-axis coordinates of a box lattice."""
        if self.shape is None:
            raise ValueError("not a box lattice")
        return [np.arange(k) * self.spacing for k in self.shape]

    def _key(self, x) -> tuple:
        scale = self.spacing if self.spacing else GRID_TOL
        return tuple(np.rint(np.asarray(x, dtype=float) / scale).astype(np.int64).tolist())

    def index_of(self, x) -> Optional[int]:
        if not self._lookup:
            scale = self.spacing if self.spacing else GRID_TOL
            keys = np.rint(self.nodes / scale).astype(np.int64)
            self._lookup.update({tuple(k): i for i, k in enumerate(keys.tolist())})
        i = self._lookup.get(self._key(x))
        if i is None or not np.allclose(self.nodes[i], x, atol=1e-9, rtol=0):
            return None
        return i

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.cone.spec.encode())
        h.update(self.nodes.tobytes())
        return h.hexdigest()[:16]

    def header(self) -> str:
        r = "none" if self.radius is None else repr(self.radius)
        s = "none" if self.spacing is None else repr(self.spacing)
        return f"# cone={self.cone.spec} radius={r} h={s}"


def _axis_count(radius: float, spacing: float) -> int:
    q = radius / spacing
    k = int(math.floor(q + 1e-9))
    return k


def build_grid(cone: "Cone", radius: float, spacing: float,
               budget: int = NODE_BUDGET) -> Grid:
    """All lattice points of pitch ``spacing`` in the truncation region that lie in ``cone``.

    The region is the box [0, radius]^d for the orthant and the Euclidean ball
    of ``radius`` for Lorentz and PSD cones (vectorized norm for PSD). Nodes
    come out in lexicographic order of their integer lattice coordinates.
    """
    if not (radius > 0 and spacing > 0):
        raise ValueError("radius and spacing must be positive")
    if spacing > radius * (1 + 1e-12):
        raise ValueError("spacing must not exceed radius")
    k = _axis_count(radius, spacing)
    d = cone.dim
    if cone.kind == "orthant":
        count = (k + 1) ** d
        if count > budget:
            raise NodeBudgetError(
                f"{count} nodes exceed the budget of {budget}; use a coarser spacing")
        axes = [np.arange(k + 1, dtype=float) * spacing] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        return Grid(cone, nodes, float(radius), float(spacing), (k + 1,) * d)

    # nonnegative ranges for the axes that are nonnegative on the whole cone
    if cone.kind == "lorentz":
        nonneg = [0]
    else:
        nonneg = list(range(cone.n))
    ranges = [np.arange(0 if i in nonneg else -k, k + 1) for i in range(d)]
    box = math.prod(len(r) for r in ranges)
    if box > ENUMERATION_BUDGET:
        raise NodeBudgetError(
            f"{box} lattice candidates exceed the enumeration budget; use a coarser spacing")
    chunks = []
    total = 0
    tail = ranges[1:]
    tail_mesh = np.meshgrid(*tail, indexing="ij") if tail else []
    tail_pts = (np.stack([m.ravel() for m in tail_mesh], axis=1)
                if tail else np.zeros((1, 0), dtype=np.int64))
    r2 = (radius / spacing) ** 2 * (1 + 1e-12) + 1e-9
    tail_sq = np.sum(tail_pts.astype(float) ** 2, axis=1)
    for i0 in ranges[0]:
        keep = tail_sq + float(i0) ** 2 <= r2
        if not np.any(keep):
            continue
        ints = np.concatenate(
            [np.full((int(keep.sum()), 1), i0), tail_pts[keep]], axis=1)
        pts = ints * spacing
        pts = pts[cone.contains(pts, GRID_TOL)]
        total += len(pts)
        if total > budget:
            raise NodeBudgetError(
                f"more than {budget} nodes; use a coarser spacing or smaller radius")
        chunks.append(pts)
    nodes = np.concatenate(chunks, axis=0)
    return Grid(cone, nodes, float(radius), float(spacing), None)


def grid_from_points(cone: "Cone", points, tol: float = GRID_TOL,
                     spacing: Optional[float] = None) -> Grid:
    """Grid over an explicit point set; every point must be a cone member."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not np.all(cone.contains(pts, tol)):
        raise ValueError("every grid node must be a member of the cone")
    return Grid(cone, pts, None, spacing, None)


PointFunction = Callable[[np.ndarray], "tuple[np.ndarray, np.ndarray]"]
