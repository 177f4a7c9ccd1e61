import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parabolic_ssc.grid import (GridMismatch, SpaceTimeGrid, SpatialGrid, inner_product_Q, lp_norm,
                                prolong, restrict, spatial_lp_norm)


def unit_grid(nodes=33, nt=32):
    return SpaceTimeGrid.uniform(nodes, nt)


def test_zero_field_has_zero_norm():
    g = unit_grid()
    for p in (1, 2, 5, np.inf):
        assert lp_norm(g, g.zeros(), p) == 0.0


@pytest.mark.parametrize("p", [1, 2, 3.5, 10])
def test_unit_constant_norm_up_to_boundary_strip(p):
    # fields live on interior nodes, so a constant misses one strip of width h
    g = unit_grid()
    h = g.space.h[0]
    val = lp_norm(g, np.ones(g.shape), p)
    assert val == pytest.approx((1 - h) ** (1 / p), rel=1e-13)
    assert abs(val - 1) <= h


def test_unit_constant_sup_norm():
    g = unit_grid()
    assert lp_norm(g, np.ones(g.shape), np.inf) == 1.0


def test_linear_field_l2_norm():
    errs = []
    for nodes in (17, 33, 65):
        g = SpaceTimeGrid.uniform(nodes, 4)
        f = g.sample(lambda x, t: x[:, 0])
        errs.append(abs(lp_norm(g, f, 2) - 1 / np.sqrt(3)))
        assert errs[-1] <= g.space.h[0]
    assert errs[0] > errs[1] > errs[2]


def test_inner_product_examples():
    g = unit_grid()
    f = g.sample(lambda x, t: x[:, 0] * np.cos(t))
    assert inner_product_Q(g, f, g.zeros()) == 0.0
    assert inner_product_Q(g, f, f) == pytest.approx(lp_norm(g, f, 2) ** 2, rel=1e-15)
    half = inner_product_Q(g, g.sample(lambda x, t: x[:, 0]), np.ones(g.shape))
    assert abs(half - 0.5) <= g.space.h[0]


def test_level_zero_carries_no_weight():
    g = unit_grid(9, 4)
    f = g.zeros()
    f[0] = 7.0
    assert lp_norm(g, f, 2) == 0.0
    assert lp_norm(g, f, np.inf) == 0.0
    assert g.measure == pytest.approx((1 - g.space.h[0]) * 1.0)


def test_dimension_mismatch_raises():
    g = unit_grid(9, 4)
    with pytest.raises(GridMismatch):
        lp_norm(g, np.zeros((4, 7)))
    with pytest.raises(GridMismatch):
        inner_product_Q(g, g.zeros(), np.zeros((5, 6)))
    with pytest.raises(ValueError):
        lp_norm(g, g.zeros(), 0.5)


def test_two_dimensional_grid_shapes():
    g = SpaceTimeGrid.uniform((9, 5), 3, T=2.0, lengths=(2.0, 1.0))
    assert g.space.interior_shape == (7, 3)
    assert g.shape == (4, 21)
    assert g.space.h == pytest.approx([0.25, 0.25])
    assert g.time.dt == pytest.approx(2 / 3)
    assert g.space.coords.shape == (21, 2)


def test_prolong_then_restrict_is_identity():
    g = SpaceTimeGrid.uniform((5, 9), 4)
    fine = g.refine()
    f = np.random.default_rng(0).standard_normal(g.shape)
    assert np.array_equal(restrict(fine, g, prolong(g, fine, f)), f)


def test_prolong_reproduces_multilinear_fields():
    g = SpaceTimeGrid.uniform((5, 5), 2)
    fine = g.refine(time=False)
    lin = lambda x, t: 1 + 2 * x[:, 0] - x[:, 1] + 3 * x[:, 0] * x[:, 1]  # noqa: E731
    # vanishes nowhere on the boundary, so compare away from it
    fine_vals = prolong(g, fine, g.sample(lin))
    exact = fine.sample(lin)
    interior = np.all((fine.space.coords > 0.25) & (fine.space.coords < 0.75), axis=1)
    assert np.allclose(fine_vals[:, interior], exact[:, interior])


def test_non_nested_transfer_rejected():
    a, b = SpaceTimeGrid.uniform(9, 4), SpaceTimeGrid.uniform(12, 8)
    with pytest.raises(GridMismatch):
        prolong(a, b, a.zeros())
    with pytest.raises(GridMismatch):
        restrict(SpaceTimeGrid.uniform(17, 6), a, SpaceTimeGrid.uniform(17, 6).zeros())


def test_spatial_norm():
    g = unit_grid(5, 2)
    assert spatial_lp_norm(g, np.ones(3), np.inf) == 1.0
    assert spatial_lp_norm(g, np.ones(3), 2) == pytest.approx(np.sqrt(0.75))


def test_grid_rejects_too_few_nodes():
    with pytest.raises(ValueError):
        SpatialGrid((2,))


fields = st.integers(min_value=0, max_value=2**31 - 1)


@settings(max_examples=40, deadline=None)
@given(seed=fields, c=st.floats(-1e3, 1e3, allow_nan=False), p=st.sampled_from([1.0, 2.0, 3.0, 7.5, np.inf]))
def test_norm_homogeneity(seed, c, p):
    g = SpaceTimeGrid.uniform(9, 5)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    assert lp_norm(g, c * f, p) == pytest.approx(abs(c) * lp_norm(g, f, p), rel=1e-12, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(seed=fields)
def test_cauchy_schwarz_and_symmetry(seed):
    g = SpaceTimeGrid.uniform((5, 6), 3)
    rng = np.random.default_rng(seed)
    f, h = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    assert inner_product_Q(g, f, h) == pytest.approx(inner_product_Q(g, h, f), rel=1e-14)
    assert abs(inner_product_Q(g, f, h)) <= lp_norm(g, f, 2) * lp_norm(g, h, 2) + 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=fields, a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_inner_product_bilinear(seed, a, b):
    g = SpaceTimeGrid.uniform(7, 4)
    rng = np.random.default_rng(seed)
    f1, f2, h = (rng.standard_normal(g.shape) for _ in range(3))
    lhs = inner_product_Q(g, a * f1 + b * f2, h)
    rhs = a * inner_product_Q(g, f1, h) + b * inner_product_Q(g, f2, h)
    assert lhs == pytest.approx(rhs, abs=1e-10)
