import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from conecal.cones import lorentz, orthant, psd
from conecal.core import (
    INF, ExtendedArithmeticError, ExtReal, NodeBudgetError, build_grid, grid_from_points,
    inner, rng_for, smat, svec,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


class TestExtReal:
    def test_finite_arithmetic(self):
        assert ExtReal(1.5) + ExtReal(2.0) == ExtReal(3.5)
        assert ExtReal(1.0) - 3 == ExtReal(-2.0)

    def test_inf_absorbs_addition(self):
        assert (ExtReal(2.0) + INF).is_inf
        assert (INF + 5).is_inf
        assert (INF - 1.0).is_inf

    def test_inf_minus_inf_raises(self):
        with pytest.raises(ExtendedArithmeticError):
            INF - INF

    def test_negative_infinity_unrepresentable(self):
        with pytest.raises(ExtendedArithmeticError):
            ExtReal(1.0) - INF
        with pytest.raises(ExtendedArithmeticError):
            -INF
        with pytest.raises(ValueError):
            ExtReal(-math.inf)
        with pytest.raises(ValueError):
            ExtReal(math.nan)

    @given(finite)
    def test_inf_is_above_every_finite(self, v):
        assert ExtReal(v) < INF
        assert INF > v
        assert not INF < ExtReal(v)

    @given(finite, finite)
    def test_order_matches_floats(self, a, b):
        assert (ExtReal(a) < ExtReal(b)) == (a < b)
        assert (ExtReal(a) <= b) == (a <= b)

    def test_float_conversion(self):
        assert float(INF) == math.inf
        assert float(ExtReal(2.0)) == 2.0
        assert str(INF) == "inf"


class TestInner:
    def test_orthogonal_axes(self):
        assert inner([1, 0], [0, 1]) == 0

    def test_dot_product(self):
        assert inner([1, 2], [3, 4]) == 11

    def test_svec_identity(self):
        v = svec(np.eye(2))
        assert inner(v, v) == pytest.approx(2.0, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            inner([1, 2], [1, 2, 3])

    @given(hnp.arrays(np.float64, 7, elements=finite), hnp.arrays(np.float64, 7, elements=finite))
    def test_bitwise_symmetric(self, a, b):
        assert inner(a, b) == inner(b, a)

    # magnitudes below ~1e-154 square to zero in double precision
    @given(hnp.arrays(np.float64, 5, elements=st.just(0.0) | st.floats(1e-100, 1e3) | st.floats(-1e3, -1e-100)))
    def test_positive_definite(self, a):
        v = inner(a, a)
        assert v >= 0
        assert (v == 0) == (not np.any(a))


def test_svec_is_an_isometry():
    rng = rng_for(3)
    for n in (2, 3, 4):
        for _ in range(100):
            x = rng.standard_normal((n, n))
            y = rng.standard_normal((n, n))
            x, y = x + x.T, y + y.T
            assert abs(inner(svec(x), svec(y)) - np.trace(x @ y)) <= 1e-12 * max(1, np.abs(x).sum() * np.abs(y).sum())


def test_smat_inverts_svec():
    rng = rng_for(1)
    a = rng.standard_normal((10, 4, 4))
    a = a + np.swapaxes(a, 1, 2)
    np.testing.assert_allclose(smat(svec(a)), a, atol=1e-15)


def test_svec_layout():
    m = np.array([[1.0, 2.0], [2.0, 3.0]])
    np.testing.assert_allclose(svec(m), [1.0, 3.0, 2.0 * math.sqrt(2)])


class TestGrid:
    def test_orthant_1d(self):
        g = build_grid(orthant(1), 1.0, 0.5)
        np.testing.assert_allclose(g.nodes[:, 0], [0.0, 0.5, 1.0])

    def test_lorentz_membership_filter(self):
        g = build_grid(lorentz(1), 1.0, 0.5)
        assert g.index_of([0.5, 0.5]) is not None
        assert g.index_of([0.0, 0.5]) is None

    def test_orthant_2x2(self):
        g = build_grid(orthant(2), 1.0, 1.0)
        assert sorted(map(tuple, g.nodes.tolist())) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    @pytest.mark.parametrize("cone", [orthant(2), lorentz(2), psd(2)])
    def test_nodes_are_members_and_origin_present(self, cone):
        g = build_grid(cone, 1.0, 0.25)
        assert np.all(cone.contains(g.nodes))
        assert g.index_of(np.zeros(cone.dim)) is not None

    @pytest.mark.parametrize("cone", [orthant(3), lorentz(2), psd(2)])
    def test_deterministic(self, cone):
        a = build_grid(cone, 1.0, 0.25)
        b = build_grid(cone, 1.0, 0.25)
        assert np.array_equal(a.nodes, b.nodes)
        assert a.digest() == b.digest()

    def test_ball_truncation(self):
        g = build_grid(psd(2), 1.0, 0.25)
        assert np.linalg.norm(g.nodes, axis=1).max() <= 1.0 + 1e-9

    def test_budget(self):
        with pytest.raises(NodeBudgetError):
            build_grid(orthant(3), 1.0, 0.001)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            build_grid(orthant(1), -1.0, 0.1)
        with pytest.raises(ValueError):
            build_grid(orthant(1), 1.0, 2.0)

    def test_header(self):
        assert build_grid(orthant(2), 1.0, 0.5).header() == "# cone=orthant:2 radius=1.0 h=0.5"

    def test_points_must_be_members(self):
        with pytest.raises(ValueError):
            grid_from_points(orthant(2), [[1.0, -1.0]])


def test_rng_streams_repeat():
    assert np.array_equal(rng_for(7).random(5), rng_for(7).random(5))
    assert not np.array_equal(rng_for(7).random(5), rng_for(8).random(5))
