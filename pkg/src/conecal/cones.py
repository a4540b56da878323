"""The three self-dual cones: nonnegative orthant, PSD matrices, Lorentz cone.

Points are coordinate vectors; PSD points use the isometric ``svec`` layout
from :mod:`conecal.core`. Lorentz points put the distinguished axis first,
``x = (x0, x1, ..., xd)`` with membership ``|x[1:]| <= x0``.

Every method accepts a single point of shape (D,) or a batch of shape (N, D).
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .core import inner, rng_for, smat, svec
from .linalg import jacobi_eigh

MEMBER_TOL = 1e-9
KINDS = ("orthant", "psd", "lorentz")


def _batch(x, dim):
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.ndim != 2 or a.shape[1] != dim:
        raise ValueError(f"dimension mismatch: cone has dimension {dim}, got shape {np.shape(x)}")
    return a, single


def _out(a, single):
    return a[0] if single else a


@dataclass(frozen=True)
class Cone:
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("cone size must be a positive integer")

    @property
    def dim(self) -> int:
        if self.kind == "psd":
            return self.n * (self.n + 1) // 2
        if self.kind == "lorentz":
            return self.n + 1
        return self.n

    @property
    def spec(self) -> str:
        return f"{self.kind}:{self.n}"

    def __str__(self):
        return self.spec

    # -- membership -------------------------------------------------------

    def min_eig(self, x):
        """Smallest eigenvalue of devectorized PSD points."""
        a, single = _batch(x, self.dim)
        w = jacobi_eigh(smat(a))[0][:, 0]
        return _out(w, single)

    def contains(self, x, tol: float = MEMBER_TOL):
        if tol < 0:
            raise ValueError("tol must be nonnegative")
        a, single = _batch(x, self.dim)
        if self.kind == "orthant":
            res = np.all(a >= -tol, axis=1)
        elif self.kind == "psd":
            res = jacobi_eigh(smat(a))[0][:, 0] >= -tol
        else:
            res = (a[:, 0] >= -tol) & (np.linalg.norm(a[:, 1:], axis=1) <= a[:, 0] + tol)
        return _out(res, single)

    def interior_contains(self, x, tol: float = MEMBER_TOL):
        a, single = _batch(x, self.dim)
        if self.kind == "orthant":
            res = np.all(a > tol, axis=1)
        elif self.kind == "psd":
            res = jacobi_eigh(smat(a))[0][:, 0] > tol
        else:
            res = (a[:, 0] > tol) & (np.linalg.norm(a[:, 1:], axis=1) < a[:, 0] - tol)
        return _out(res, single)

    def order_leq(self, x, y, tol: float = MEMBER_TOL):
        """``x <= y`` in the cone order, i.e. ``y - x`` is a member."""
        return self.contains(np.asarray(y, dtype=float) - np.asarray(x, dtype=float), tol)

    # -- projection -------------------------------------------------------

    def project(self, x):
        """Euclidean projection onto the cone."""
        a, single = _batch(x, self.dim)
        if self.kind == "orthant":
            res = np.maximum(a, 0.0)
        elif self.kind == "psd":
            w, v = jacobi_eigh(smat(a))
            w = np.maximum(w, 0.0)
            res = svec(np.einsum("bij,bj,bkj->bik", v, w, v))
        else:
            x0 = a[:, 0]
            tail = a[:, 1:]
            s = np.linalg.norm(tail, axis=1)
            res = np.zeros_like(a)
            inside = s <= x0
            res[inside] = a[inside]
            mid = ~inside & (x0 > -s)
            alpha = (x0[mid] + s[mid]) / 2.0
            res[mid, 0] = alpha
            res[mid, 1:] = alpha[:, None] * tail[mid] / s[mid, None]
        return _out(res, single)

    # -- duality ----------------------------------------------------------

    def dual_witness(self, x):
        """A member ``y`` with ``<x, y> < 0`` for a non-member ``x``.

        orthant: the unit axis of the most negative coordinate; psd: ``v v^T``
        for an eigenvector of the smallest eigenvalue; lorentz: the reflected
        boundary vector ``(1, -x[1:]/|x[1:]|)``.
        """
        a, single = _batch(x, self.dim)
        res = np.zeros_like(a)
        if self.kind == "orthant":
            res[np.arange(len(a)), np.argmin(a, axis=1)] = 1.0
        elif self.kind == "psd":
            w, v = jacobi_eigh(smat(a))
            u = v[:, :, 0]
            res = svec(np.einsum("bi,bj->bij", u, u))
        else:
            tail = a[:, 1:]
            s = np.linalg.norm(tail, axis=1)
            res[:, 0] = 1.0
            nz = s > 0
            res[nz, 1:] = -tail[nz] / s[nz, None]
        return _out(res, single)

    # -- sampling ---------------------------------------------------------

    def sample_member(self, rng, size=None):
        """Projection of a Gaussian point, shrunk into the unit ball."""
        rng = _as_rng(rng)
        k = 1 if size is None else size
        g = rng.standard_normal((k, self.dim))
        p = np.atleast_2d(self.project(g))
        p = p / np.maximum(1.0, np.linalg.norm(p, axis=1))[:, None]
        return p[0] if size is None else p

    def sample_boundary(self, rng, size=None):
        """Members on the topological boundary (nonzero whenever possible)."""
        rng = _as_rng(rng)
        k = 1 if size is None else size
        if self.kind == "orthant":
            p = np.abs(rng.standard_normal((k, self.dim)))
            zero = rng.random((k, self.dim)) < 0.5
            # at least one zero coordinate per row
            zero[np.arange(k), rng.integers(0, self.dim, k)] = True
            p[zero] = 0.0
        elif self.kind == "psd":
            g = rng.standard_normal((k, self.n, self.n))
            w, v = jacobi_eigh(g @ np.swapaxes(g, 1, 2))
            zero = rng.random((k, self.n)) < 0.5
            zero[np.arange(k), rng.integers(0, self.n, k)] = True
            w = np.where(zero, 0.0, w)
            p = svec(np.einsum("bij,bj,bkj->bik", v, w, v))
        else:
            tail = rng.standard_normal((k, self.n))
            s = np.linalg.norm(tail, axis=1)
            p = np.concatenate([s[:, None], tail], axis=1)
        p = p / np.maximum(1.0, np.linalg.norm(p, axis=1))[:, None]
        return p[0] if size is None else p

    def interior_point(self):
        """A canonical interior point: ones, the identity, or the unit axis."""
        if self.kind == "orthant":
            return np.ones(self.dim)
        if self.kind == "psd":
            return svec(np.eye(self.n))
        e = np.zeros(self.dim)
        e[0] = 1.0
        return e


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return rng_for(rng)


def orthant(d: int) -> Cone:
    return Cone("orthant", d)


def psd(n: int) -> Cone:
    return Cone("psd", n)


def lorentz(d: int) -> Cone:
    return Cone("lorentz", d)


_SPEC = re.compile(r"^(orthant|psd|lorentz):(\d+)$")


def parse_cone(spec: str) -> Cone:
    m = _SPEC.match(spec.strip())
    if not m or int(m.group(2)) < 1:
        raise ValueError(f"bad cone spec {spec!r}; expected orthant:d, psd:n or lorentz:d")
    return Cone(m.group(1), int(m.group(2)))


@dataclass
class SelfDualityReport:
    cone: str
    n_samples: int
    min_inner: float
    violations: int
    nonmembers_tested: int
    witness_failures: int
    max_witness_inner: float

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.witness_failures == 0


def self_duality_audit(c: Cone, n_samples: int, seed: int,
                       threshold: float = -1e-9) -> SelfDualityReport:
    """Sample the identity ``C = dual(C)`` in both directions.

    Forward: ``n_samples`` pairs of members must pair nonnegatively (up to
    ``threshold``). Converse: random non-members must each be exposed by the
    analytic witness with a strictly negative pairing.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = rng_for(seed)
    xs = c.sample_member(rng, n_samples)
    ys = c.sample_member(rng, n_samples)
    pair = np.einsum("ij,ij->i", xs, ys)
    min_inner = float(pair.min())
    violations = int(np.sum(pair < threshold))

    cand = rng.standard_normal((max(n_samples // 10, 10), c.dim))
    outside = cand[~c.contains(cand, MEMBER_TOL)]
    witnesses = np.atleast_2d(c.dual_witness(outside)) if len(outside) else np.zeros((0, c.dim))
    w_inner = np.einsum("ij,ij->i", outside, witnesses) if len(outside) else np.zeros(0)
    bad = ~c.contains(witnesses, MEMBER_TOL) | (w_inner >= 0.0) if len(outside) else np.zeros(0, bool)
    return SelfDualityReport(
        cone=c.spec,
        n_samples=n_samples,
        min_inner=min_inner,
        violations=violations,
        nonmembers_tested=int(len(outside)),
        witness_failures=int(np.sum(bad)),
        max_witness_inner=float(w_inner.max()) if len(outside) else float("nan"),
    )


__all__ = ["Cone", "orthant", "psd", "lorentz", "parse_cone", "self_duality_audit",
           "SelfDualityReport", "MEMBER_TOL", "inner"]
