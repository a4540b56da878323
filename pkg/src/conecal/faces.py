"""Faces of the three cones, separating vectors and perfectness audits.

A face is stored by kind and parameters rather than as a point set:

* ``whole_cone`` and ``zero`` exist for every cone;
* ``orthant_face`` -- coordinates outside a support set ``S`` vanish;
* ``psd_block`` -- in a rotated basis ``Q`` the matrix is ``diag(y0, 0)`` with
  ``y0`` an m x m PSD block;
* ``lorentz_ray`` -- nonnegative multiples of one boundary generator.

Each face also carries an orthonormal basis of its span. Coordinates in that
basis (``to_reduced``) identify the face with a smaller cone of the same
family: ``orthant(|S|)``, ``psd(m)`` or ``orthant(1)`` for a ray.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cones import MEMBER_TOL, Cone, orthant, psd, self_duality_audit
from .core import rng_for, smat, svec
from .linalg import jacobi_eigh

RANK_REL_TOL = 1e-7
# order slack when filtering sampled 0 <= x <= y pairs
AXIOM_FILTER_TOL = 1e-12
# membership slack for points passing that filter: an order slack eps allows
# O(sqrt(eps)) distance from the face on curved or rank-deficient boundaries
AXIOM_MEMBER_TOL = 1e-5
DEFAULT_ROTATIONS = 20


@dataclass(frozen=True, eq=False)
class Face:
    parent: Cone
    kind: str
    span_basis: np.ndarray
    support: tuple = ()
    m: int = 0
    rotation: Optional[np.ndarray] = field(default=None, repr=False)
    generator: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.span_basis.shape[1]

    @property
    def reduced_cone(self) -> Optional[Cone]:
        if self.kind == "zero":
            return None
        if self.kind == "whole_cone":
            return self.parent
        if self.kind == "orthant_face":
            return orthant(len(self.support))
        if self.kind == "psd_block":
            return psd(self.m)
        return orthant(1)

    def describe(self) -> str:
        if self.kind == "orthant_face":
            return f"orthant-face:{self.parent.n}:{','.join(map(str, self.support))}"
        if self.kind == "psd_block":
            return f"psd-block:{self.parent.n}:{self.m}"
        if self.kind == "lorentz_ray":
            return f"lorentz-ray:{self.parent.n}:" + ",".join(f"{g:.6g}" for g in self.generator)
        return f"{self.kind}:{self.parent.spec}"

    def to_reduced(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.span_basis

    def from_reduced(self, t) -> np.ndarray:
        return np.asarray(t, dtype=float) @ self.span_basis.T

    def span_residual(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.from_reduced(self.to_reduced(x)), axis=-1)

    def member(self, x, tol: float = MEMBER_TOL):
        """Membership with absolute slack ``tol`` scaled by max(1, |x|) for the span test."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        scale = np.maximum(1.0, np.linalg.norm(xb, axis=1))
        if self.kind == "zero":
            res = np.linalg.norm(xb, axis=1) <= tol
        elif self.kind == "whole_cone":
            res = np.atleast_1d(self.parent.contains(xb, tol))
        else:
            res = np.atleast_1d(self.parent.contains(xb, tol))
            res &= self.span_residual(xb) <= tol * scale
            res &= np.atleast_1d(self.reduced_cone.contains(self.to_reduced(xb), tol))
        return res[0] if single else res

    def sample_member(self, rng, size: int) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros((size, self.parent.dim))
        t = self.reduced_cone.sample_member(rng, size)
        return self.from_reduced(t)

    def relative_interior_point(self) -> Optional[np.ndarray]:
        if self.kind == "zero":
            return None
        return self.from_reduced(self.reduced_cone.interior_point())


# -- constructors ---------------------------------------------------------------


def whole_face(c: Cone) -> Face:
    return Face(c, "whole_cone", np.eye(c.dim))


def zero_face(c: Cone) -> Face:
    return Face(c, "zero", np.zeros((c.dim, 0)))


def orthant_face(d: int, support: Sequence[int]) -> Face:
    s = tuple(sorted(set(int(i) for i in support)))
    if any(i < 0 or i >= d for i in s):
        raise ValueError(f"support {s} out of range for orthant:{d}")
    c = orthant(d)
    if len(s) == d:
        return whole_face(c)
    if not s:
        return zero_face(c)
    return Face(c, "orthant_face", np.eye(d)[:, list(s)], support=s)


def _sym_basis(m: int) -> np.ndarray:
    """svec-orthonormal basis of S^m, ordered like svec coordinates."""
    return smat(np.eye(m * (m + 1) // 2))


def psd_block_face(n: int, m: int, rotation=None) -> Face:
    """Face of ``psd(n)``: matrices ``Q diag(y0, 0) Q^T`` with ``y0`` in ``psd(m)``."""
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    q = np.eye(n) if rotation is None else np.asarray(rotation, dtype=float)
    if q.shape != (n, n) or not np.allclose(q.T @ q, np.eye(n), atol=1e-9, rtol=0):
        raise ValueError("rotation must be an orthonormal n x n matrix")
    c = psd(n)
    if m == 0:
        return zero_face(c)
    qm = q[:, :m]
    blocks = _sym_basis(m)
    basis = svec(qm @ blocks @ qm.T).T
    kind = "whole_cone" if m == n else "psd_block"
    return Face(c, kind, basis, m=m, rotation=q)


def lorentz_ray_face(d: int, generator, tol: float = 1e-9) -> Face:
    """The ray through a nonzero boundary point of ``lorentz(d)``."""
    g = np.asarray(generator, dtype=float)
    if g.shape != (d + 1,):
        raise ValueError(f"generator must have {d + 1} coordinates")
    tail = np.linalg.norm(g[1:])
    if not (g[0] > tol and abs(tail - g[0]) <= tol * max(1.0, g[0])):
        raise ValueError("generator must be a nonzero boundary point, |g[1:]| = g[0] > 0")
    u = g / np.linalg.norm(g)
    return Face(Cone("lorentz", d), "lorentz_ray", u[:, None], generator=u)


def generated_face(c: Cone, omega_samples, tol: float = MEMBER_TOL) -> Face:
    """Smallest face of ``c`` containing every sample."""
    pts = np.atleast_2d(np.asarray(omega_samples, dtype=float))
    if len(pts) == 0:
        raise ValueError("need at least one sample")
    if not np.all(c.contains(pts, tol)):
        raise ValueError("every sample must lie in the cone")
    if c.kind == "orthant":
        support = np.nonzero(np.any(pts > tol, axis=0))[0]
        return orthant_face(c.n, support)
    if c.kind == "psd":
        total = smat(pts.sum(axis=0))
        w, v = jacobi_eigh(total)
        thresh = RANK_REL_TOL * max(w[-1], 1.0)
        m = int(np.sum(w > thresh))
        # descending eigenvalues: the first m columns span the range
        q = v[:, ::-1]
        return psd_block_face(c.n, m, q)
    nz = pts[np.linalg.norm(pts, axis=1) > tol]
    if len(nz) == 0:
        return zero_face(c)
    if np.any(c.interior_contains(nz, tol)):
        return whole_face(c)
    dirs = nz / np.linalg.norm(nz, axis=1)[:, None]
    if np.any(np.linalg.norm(dirs - dirs[0], axis=1) > 1e-7):
        return whole_face(c)
    return lorentz_ray_face(c.n, dirs[0], tol=1e-7)


# -- separation -----------------------------------------------------------------


def separating_vector(f: Face, x) -> np.ndarray:
    """A cone member ``v`` with ``<v, y> = 0`` on the face and ``<v, x> > 0``."""
    x = np.asarray(x, dtype=float)
    c = f.parent
    if not c.contains(x):
        raise ValueError("x must lie in the parent cone")
    if f.member(x):
        raise ValueError("x lies in the face; no separating vector exists")
    if f.kind == "zero":
        return x.copy()
    if f.kind == "orthant_face":
        v = np.zeros(c.dim)
        outside = [i for i in range(c.dim) if i not in f.support and x[i] > MEMBER_TOL]
        v[outside] = 1.0
        return v
    if f.kind == "psd_block":
        q = f.rotation
        tail = q[:, f.m:]
        return svec(tail @ tail.T)
    if f.kind == "lorentz_ray":
        g = f.generator
        v = np.concatenate([[g[0]], -g[1:]])
        return v / np.linalg.norm(v)
    raise ValueError(f"no separating vector for kind {f.kind}")


# -- audits -----------------------------------------------------------------------


@dataclass
class AxiomReport:
    face: str
    pairs_checked: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def face_axiom_check(f: Face, n_samples: int, seed: int, per_sample: int = 8) -> AxiomReport:
    """Count ``x`` with ``0 <= x <= y``, ``y`` in the face, but ``x`` outside it.

    For each sampled ``y`` half of the candidates are projections onto the
    parent cone of ``s*y + noise`` at several noise scales (these expose sets
    that are not faces); the other half are perturbed inside the span and
    projected onto the reduced cone (these exercise the membership predicate
    near ``y``). Candidates failing the order filter are discarded.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    c = f.parent
    rng = rng_for(seed)
    if f.kind == "zero":
        return AxiomReport(f.describe(), 0, 0)
    ys = f.sample_member(rng, n_samples)
    ys = np.repeat(ys, per_sample, axis=0)
    k = len(ys)
    s = rng.uniform(0.0, 1.0, k)
    scale = 10.0 ** rng.uniform(-3, 0, k)
    norms = np.linalg.norm(ys, axis=1)
    cand = s[:, None] * ys + (scale * norms)[:, None] * rng.standard_normal((k, c.dim))
    xs = c.project(cand)
    inside = np.arange(k) % 2 == 1
    if inside.any():
        rc = f.reduced_cone
        ty = f.to_reduced(ys[inside])
        noise = (scale[inside] * norms[inside])[:, None] * rng.standard_normal(ty.shape)
        xs[inside] = f.from_reduced(rc.project(s[inside, None] * ty + noise))
    keep = c.contains(xs, AXIOM_FILTER_TOL) & c.contains(ys - xs, AXIOM_FILTER_TOL)
    bad = ~f.member(xs[keep], AXIOM_MEMBER_TOL) if keep.any() else np.zeros(0, bool)
    return AxiomReport(f.describe(), int(keep.sum()), int(np.sum(bad)))


def boundary_check(f: Face, n_samples: int, seed: int) -> int:
    """Sampled members of a proper face that land in the parent's interior."""
    if f.kind in ("whole_cone", "zero"):
        return 0
    xs = f.sample_member(rng_for(seed), n_samples)
    return int(np.sum(f.parent.interior_contains(xs)))


@dataclass
class ReducedDualityReport:
    min_inner: float
    violations: int
    nonmembers_tested: int
    witness_failures: int


def reduced_self_duality(f: Face, n_samples: int, seed: int) -> ReducedDualityReport:
    """Self-duality of the face inside its own span, in reduced coordinates.

    Forward: pairs of face members pair nonnegatively. Converse: reduced
    points that are not face members (membership judged by the ambient face
    predicate) are exposed by a face member with negative pairing.
    """
    if f.kind == "zero":
        return ReducedDualityReport(0.0, 0, 0, 0)
    rc = f.reduced_cone
    rng = rng_for(seed)
    a = f.to_reduced(f.sample_member(rng, n_samples))
    b = f.to_reduced(f.sample_member(rng, n_samples))
    pair = np.einsum("ij,ij->i", a, b)
    t = rng.standard_normal((max(n_samples // 10, 10), rc.dim))
    outside = t[~f.member(f.from_reduced(t))]
    failures = 0
    if len(outside):
        w = np.atleast_2d(rc.dual_witness(outside))
        ok = f.member(f.from_reduced(w)) & (np.einsum("ij,ij->i", outside, w) < 0)
        failures = int(np.sum(~ok))
    return ReducedDualityReport(float(pair.min()), int(np.sum(pair < -1e-9)),
                                int(len(outside)), failures)


def reduced_membership_agreement(f: Face, n_samples: int, seed: int) -> int:
    """Disagreements between the face predicate and the reduced cone test."""
    if f.kind == "zero":
        return 0
    rc = f.reduced_cone
    t = rng_for(seed).standard_normal((n_samples, rc.dim))
    return int(np.sum(f.member(f.from_reduced(t)) != rc.contains(t)))


def random_rotation(n: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def enumerate_faces(c: Cone, seed: int, rotations: int = DEFAULT_ROTATIONS,
                    rays: int = DEFAULT_ROTATIONS, max_exhaustive: int = 6) -> list:
    """Representative faces: every coordinate face of small orthants, block
    faces over random rotations for PSD, sampled boundary rays for Lorentz."""
    rng = rng_for(seed)
    faces = [whole_face(c), zero_face(c)]
    if c.kind == "orthant":
        if c.n <= max_exhaustive:
            subsets = [s for k in range(1, c.n) for s in itertools.combinations(range(c.n), k)]
        else:
            subsets = [tuple(np.nonzero(rng.random(c.n) < 0.5)[0]) for _ in range(rotations)]
            subsets = [s for s in subsets if 0 < len(s) < c.n]
        faces += [orthant_face(c.n, s) for s in subsets]
    elif c.kind == "psd":
        for m in range(1, c.n):
            for _ in range(rotations):
                faces.append(psd_block_face(c.n, m, random_rotation(c.n, rng)))
    else:
        gens = c.sample_boundary(rng, rays)
        faces += [lorentz_ray_face(c.n, g / np.linalg.norm(g), tol=1e-9) for g in gens]
    return faces


@dataclass
class FaceAudit:
    face: str
    axiom_violations: int
    interior_hits: int
    duality_violations: int
    witness_failures: int
    relative_interior: Optional[list]
    relative_interior_ok: bool

    @property
    def passed(self) -> bool:
        return (self.axiom_violations == 0 and self.interior_hits == 0
                and self.duality_violations == 0 and self.witness_failures == 0
                and self.relative_interior_ok)


@dataclass
class PerfectnessReport:
    cone: str
    cone_self_dual: bool
    faces: list

    @property
    def passed(self) -> bool:
        return self.cone_self_dual and all(f.passed for f in self.faces)

    def to_dict(self) -> dict:
        return {
            "cone": self.cone,
            "cone_self_dual": self.cone_self_dual,
            "faces_audited": len(self.faces),
            "passed": self.passed,
            "faces": [dict(vars(f), passed=f.passed) for f in self.faces],
        }


def audit_face(f: Face, n_samples: int, seed: int) -> FaceAudit:
    axiom = face_axiom_check(f, n_samples, seed)
    hits = boundary_check(f, n_samples, seed + 1)
    dual = reduced_self_duality(f, n_samples, seed + 2)
    rip = f.relative_interior_point()
    if rip is None:
        # the zero face is its own span; its interior there is {0}
        ri_ok, ri = True, None
    else:
        ri_ok = bool(f.reduced_cone.interior_contains(f.to_reduced(rip))) and bool(f.member(rip))
        ri = [float(v) for v in rip]
    return FaceAudit(f.describe(), axiom.violations, hits, dual.violations,
                     dual.witness_failures, ri, ri_ok)


def perfectness_audit(c: Cone, n_face_samples: int, seed: int,
                      rotations: int = DEFAULT_ROTATIONS) -> PerfectnessReport:
    """Audit self-duality of ``c`` and, for each representative face, the face
    axiom, boundary placement, self-duality in its span and a relative-interior
    point."""
    sd = self_duality_audit(c, max(n_face_samples, 100), seed)
    faces = enumerate_faces(c, seed, rotations=rotations, rays=rotations)
    audits = [audit_face(f, n_face_samples, seed + 17 * i) for i, f in enumerate(faces)]
    return PerfectnessReport(c.spec, sd.passed, audits)


def _read_rows(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append([float(v) for v in line.split(",")])
    return np.array(rows, dtype=float)


def parse_face(spec: str) -> Face:
    """``orthant-face:d:S`` (S comma-separated), ``psd-block:n:m[:rotfile]`` or
    ``lorentz-ray:d:gfile``; files are CSV (rotation: n rows of n entries;
    generator: one row)."""
    parts = spec.strip().split(":")
    kind = parts[0]
    try:
        if kind == "orthant-face" and len(parts) == 3:
            d = int(parts[1])
            support = [int(s) for s in parts[2].split(",") if s.strip()]
            return orthant_face(d, support)
        if kind == "psd-block" and len(parts) in (3, 4):
            n, m = int(parts[1]), int(parts[2])
            rot = _read_rows(parts[3]) if len(parts) == 4 else None
            return psd_block_face(n, m, rot)
        if kind == "lorentz-ray" and len(parts) == 3:
            d = int(parts[1])
            g = _read_rows(parts[2]).reshape(-1)
            return lorentz_ray_face(d, g)
    except (OSError, ValueError) as exc:
        raise ValueError(f"bad face spec {spec!r}: {exc}") from None
    raise ValueError(f"bad face spec {spec!r}; expected orthant-face:d:S, "
                     "psd-block:n:m[:rotfile] or lorentz-ray:d:gfile")
