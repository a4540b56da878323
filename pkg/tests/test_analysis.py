import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conecal.analysis import (
    NoWitness, ScalingHypothesisError, WitnessSearchFailed, boundary_domain_probe, catalog,
    check_normal_witness, face_function, gamma_audit, gamma_catalog, gap_threshold,
    lattice_points, normal_cone_witness, parse_function, verify_fenchel_moreau,
)
from conecal.cones import lorentz, orthant, psd
from conecal.conjugate import GridFn
from conecal.core import build_grid, svec
from conecal.faces import lorentz_ray_face, orthant_face, psd_block_face


def on(cone, name, params=None, radius=2.0, h=0.04):
    return catalog(name, cone, params).on(build_grid(cone, radius, h))


class TestCatalog:
    def test_parse(self):
        f = parse_function("catalog:shifted-quad:1", orthant(1))
        assert f.name == "shifted-quad:1" and f.gamma is False
        assert parse_function("quad", psd(2)).gamma

    @pytest.mark.parametrize("spec", ["catalog:nope", "catalog:lin", "catalog:trace", "catalog:lin:1,2,3"])
    def test_bad_specs(self, spec):
        with pytest.raises(ValueError):
            parse_function(spec, orthant(2))

    def test_gamma_flags(self):
        assert catalog("shifted-quad", orthant(2), "-1").gamma
        assert not catalog("lin", orthant(2), "1,-1").gamma
        assert catalog("logdet-barrier", psd(2)).gamma is False

    @pytest.mark.parametrize("cone", [orthant(2), lorentz(2), psd(2)], ids=lambda c: c.spec)
    def test_closed_form_conjugates(self, cone):
        # catalog closed forms against the discrete conjugate on a wide grid
        g = build_grid(cone, 2.0, 0.5)
        from conecal.conjugate import monotone_conjugate
        for name, params in (("quad", None), ("indicator", None)):
            fn = catalog(name, cone, params)
            big = fn.on(build_grid(cone, 4.0, 0.5))
            vals, fin = fn.conjugate(g.nodes)
            disc = monotone_conjugate(big, g).values
            assert np.all(fin)
            # discrete sup never exceeds the exact one
            assert np.all(disc <= vals + 1e-12)

    def test_logdet_domain(self):
        f = on(psd(2), "logdet-barrier", radius=1.0, h=0.25)
        assert f.dom.sum() < len(f.grid)
        i = f.grid.index_of(svec(np.eye(2) * 0.5))
        assert f.values[i] == pytest.approx(-2 * math.log(0.5))


class TestGammaAudit:
    def test_quadratic_passes(self):
        rep = gamma_audit(on(orthant(1), "quad"), 1000, 0)
        assert rep.certified and rep.convexity_violations == 0 and rep.monotonicity_violations == 0
        assert not rep.lsc_checked

    def test_shifted_quadratic_not_monotone(self):
        rep = gamma_audit(on(orthant(1), "shifted-quad", "1"), 1000, 0)
        assert rep.monotonicity_violations > 0
        assert rep.convexity_violations == 0

    def test_decreasing_linear(self):
        g = build_grid(orthant(1), 2.0, 0.04)
        f = GridFn.from_function(g, lambda p: (-p[:, 0], np.ones(len(p), bool)))
        rep = gamma_audit(f, 1000, 0)
        assert rep.monotonicity_violations > 0 and rep.convexity_violations == 0

    def test_nonconvex(self):
        g = build_grid(orthant(1), 2.0, 0.04)
        f = GridFn.from_function(g, lambda p: (np.sqrt(p[:, 0]), np.ones(len(p), bool)))
        assert gamma_audit(f, 1000, 0).convexity_violations > 0

    def test_infinite_midpoint_violates(self):
        g = build_grid(orthant(1), 1.0, 0.5)
        f = GridFn(g, [0.0, np.nan, 0.0], [True, False, True])
        assert gamma_audit(f, 10, 0).convexity_violations > 0

    @pytest.mark.parametrize("cone", [orthant(1), orthant(2), lorentz(2), psd(2)], ids=lambda c: c.spec)
    def test_positive_catalog_certified(self, cone):
        h = 0.04 if cone.kind == "orthant" else 0.5
        for fn in gamma_catalog(cone):
            assert gamma_audit(fn.on(build_grid(cone, 2.0, h)), 2000, 0).certified, fn.name

    def test_rejects_off_lattice_grid(self):
        from conecal.core import Grid
        g = Grid(orthant(1), np.array([[0.0], [0.3]]), 1.0, 0.25)
        with pytest.raises(ValueError, match="lattice"):
            gamma_audit(GridFn(g, [0.0, 0.0], [True, True]), 10, 0)


class TestVerify:
    def test_quadratic_identity(self):
        v = verify_fenchel_moreau(on(orthant(1), "quad"), 3)
        assert v.identity_holds and v.status == "identity-verified"
        gaps = [g for _, g in v.refinement_trend]
        assert [h for h, _ in v.refinement_trend] == [0.04, 0.02, 0.01]
        assert gaps[-1] <= 1e-2
        assert all(b <= a + 1e-9 for a, b in zip(gaps, gaps[1:]))

    def test_counterexample(self):
        v = verify_fenchel_moreau(on(orthant(1), "shifted-quad", "1"), 3)
        assert not v.identity_holds and v.status == "hypothesis-failed"
        node, gap = v.worst_node()
        assert node == [0.0]
        for _, g in v.refinement_trend:
            assert abs(g - 1.0) <= 0.05

    def test_trace_on_psd(self):
        v = verify_fenchel_moreau(on(psd(2), "trace", h=0.5), 2)
        assert v.identity_holds
        assert v.report.max_gap_on_dom <= gap_threshold(0.25, 4.0)

    def test_coarse_dual_grid_is_inconclusive(self):
        # slopes of |x|^2 reach 4 on the box; a dual radius of 0.5 under-covers them
        v = verify_fenchel_moreau(on(orthant(1), "quad"), 1, dual_radius=0.5)
        assert v.status == "inconclusive-discretization"
        assert not v.identity_holds

    def test_to_dict(self):
        d = verify_fenchel_moreau(on(orthant(1), "quad", h=0.1), 2).to_dict()
        assert set(d) >= {"identity_holds", "status", "gamma", "refinement_trend", "levels"}
        assert d["gamma"]["lsc_checked"] is False

    def test_requires_source_for_refinement(self):
        f = on(orthant(1), "quad", h=0.5)
        bare = GridFn(f.grid, f.values, f.dom)
        with pytest.raises(ValueError):
            verify_fenchel_moreau(bare, 2)
        assert verify_fenchel_moreau(bare, 1).identity_holds

    @settings(max_examples=15)
    @given(st.lists(st.floats(0, 2), min_size=1, max_size=4))
    def test_soundness(self, coeffs):
        # certified inputs verify; failures never claim the identity
        f = catalog("polynomial", orthant(1), ",".join(repr(c) for c in coeffs))
        v = verify_fenchel_moreau(f.on(build_grid(orthant(1), 1.0, 0.05)), 2, dual_radius=64.0)
        assert v.gamma.certified
        assert v.status in ("identity-verified", "inconclusive-discretization")
        if v.identity_holds:
            gaps = [g for _, g in v.refinement_trend]
            assert gaps[-1] <= gaps[0] + 1e-9


def _probe_case(cone, face, reduced, h):
    g = build_grid(cone, 2.0, h)
    return boundary_domain_probe(cone, face, GridFn.from_function(g, face_function(face, reduced), "f"), 3)


class TestBoundaryProbe:
    def test_psd_block(self):
        r = _probe_case(psd(2), psd_block_face(2, 1), lambda t: t[:, 0] ** 2, 0.5)
        assert r.holds
        assert r.max_mismatch <= r.mismatch_tolerance

    def test_lorentz_ray(self):
        r = _probe_case(lorentz(2), lorentz_ray_face(2, [1, 1, 0]), lambda t: t[:, 0] / math.sqrt(2), 0.5)
        assert r.holds

    def test_orthant_face(self):
        r = _probe_case(orthant(2), orthant_face(2, [0]), lambda t: t[:, 0] ** 2, 0.04)
        assert r.holds and r.off_face_all_divergent
        amb = r.ambient.report
        off = amb.f.grid.nodes[:, 1] > 0
        assert np.all(amb.divergent[off])

    def test_function_must_live_on_face(self):
        g = build_grid(orthant(2), 1.0, 0.5)
        with pytest.raises(ValueError):
            boundary_domain_probe(orthant(2), orthant_face(2, [0]), catalog("quad", orthant(2)).on(g))


class TestNormalWitness:
    def test_orthant_simplex(self):
        c = orthant(2)
        omega = lattice_points(c, 1.0, 0.05, lambda p: p.sum(axis=1) <= 1 + 1e-9)
        w = normal_cone_witness(omega, [1.0, 0.0], c, seed=0)
        worst, member, pairing = check_normal_witness(omega, [1.0, 0.0], w.z, c)
        assert worst <= 1e-7 and member and pairing > 0

    def test_known_witness_passes(self):
        c = orthant(2)
        omega = lattice_points(c, 1.0, 0.05, lambda p: p.sum(axis=1) <= 1 + 1e-9)
        z = np.array([1.0, 1.0]) / math.sqrt(2)
        worst, member, pairing = check_normal_witness(omega, [1.0, 0.0], z, c)
        assert worst <= 1e-12 and member and pairing > 0

    def test_lorentz_cap(self):
        c = lorentz(1)
        omega = lattice_points(c, 2.0, 0.05, lambda p: p[:, 0] <= 1 + 1e-9)
        w = normal_cone_witness(omega, [1.0, 1.0], c, seed=0)
        worst, member, pairing = check_normal_witness(omega, [1.0, 1.0], w.z, c)
        assert worst <= 1e-7 and member and pairing > 0
        np.testing.assert_allclose(w.z / np.linalg.norm(w.z), np.array([1, 1]) / math.sqrt(2), atol=1e-3)

    def test_interior_point_has_no_witness(self):
        c = orthant(2)
        omega = lattice_points(c, 1.0, 0.05, lambda p: p.sum(axis=1) <= 1 + 1e-9)
        with pytest.raises(NoWitness):
            normal_cone_witness(omega, [0.25, 0.25], c, seed=0)
        with pytest.raises(ScalingHypothesisError):
            normal_cone_witness(omega, [0.25, 0.25], c, seed=0)

    def test_search_failure_reported(self):
        # y not a scaled-down point, yet enclosed: no witness with positive pairing
        c = orthant(2)
        omega = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.2, 0.6]])
        with pytest.raises(WitnessSearchFailed):
            normal_cone_witness(omega, [0.2, 0.6], c, seed=0, max_iters=200)

    def test_y_must_be_in_omega(self):
        with pytest.raises(ValueError):
            normal_cone_witness([[0.0, 0.0]], [1.0, 0.0], orthant(2))
