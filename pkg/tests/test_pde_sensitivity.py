import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from parabolic_ssc import testbeds
from parabolic_ssc.grid import SpaceTimeGrid, lp_norm
from parabolic_ssc.pde_forward import solve_state
from parabolic_ssc.pde_sensitivity import (check_lemma23_bounds, solve_linearized, solve_linearized_batch,
                                           solve_second)
from parabolic_ssc.problem import CubicOdd, LinearRate, ProblemSpec, UpperOnly, Zero


def spec1(nl):
    return ProblemSpec(diffusion=np.eye(1), nonlinearity=nl, nu=1.0, constraint=UpperOnly(10.0),
                       y0=lambda x: np.sin(np.pi * x[:, 0]))


G = SpaceTimeGrid.uniform(17, 16)


def test_zero_direction():
    st_ = solve_state(spec1(CubicOdd()), G, G.zeros())
    assert np.array_equal(solve_linearized(spec1(CubicOdd()), G, st_, G.zeros()).z, G.zeros())


def test_affine_map_gives_exact_difference():
    spec = spec1(Zero())
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal(G.shape), rng.standard_normal(G.shape)
    v[0] = 0
    st_ = solve_state(spec, G, u)
    z = solve_linearized(spec, G, st_, v).z
    assert np.allclose(z, solve_state(spec, G, u + v).y - st_.y, atol=1e-12)


def test_first_and_second_order_remainders():
    tb = testbeds.cubic_1d(17, 16)
    spec, g = tb.spec, tb.grid
    rng = np.random.default_rng(2)
    u, v = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    v[0] = 0
    st_ = solve_state(spec, g, u)
    z = solve_linearized(spec, g, st_, v)
    w = solve_second(spec, g, st_, z, z).w
    ss = np.array([1e-1, 1e-2, 1e-3])
    r1, r2 = [], []
    for s in ss:
        ys = solve_state(spec, g, u + s * v).y
        r1.append(np.abs(ys - st_.y - s * z.z).max())
        r2.append(np.abs(ys - st_.y - s * z.z - 0.5 * s**2 * w).max())
    assert np.polyfit(np.log(ss), np.log(r1), 1)[0] >= 1.9
    assert np.polyfit(np.log(ss), np.log(r2), 1)[0] >= 2.9


def test_second_order_vanishes_for_affine_nonlinearities():
    for nl in (Zero(), LinearRate(2.0)):
        spec = spec1(nl)
        st_ = solve_state(spec, G, G.zeros())
        v = np.random.default_rng(3).standard_normal(G.shape)
        z = solve_linearized(spec, G, st_, v)
        assert np.array_equal(solve_second(spec, G, st_, z, z).w, G.zeros())


def test_second_order_symmetric():
    spec = spec1(CubicOdd())
    st_ = solve_state(spec, G, G.zeros())
    rng = np.random.default_rng(4)
    z1 = solve_linearized(spec, G, st_, rng.standard_normal(G.shape))
    z2 = solve_linearized(spec, G, st_, rng.standard_normal(G.shape))
    assert np.array_equal(solve_second(spec, G, st_, z1, z2).w, solve_second(spec, G, st_, z2, z1).w)


def test_batch_matches_single_solves():
    spec = spec1(CubicOdd())
    st_ = solve_state(spec, G, G.zeros())
    V = np.random.default_rng(5).standard_normal(G.shape + (4,))
    Z = solve_linearized_batch(G, st_, V)
    for r in range(4):
        assert np.allclose(Z[..., r], solve_linearized(spec, G, st_, V[..., r]).z, atol=1e-14)


def test_sensitivity_bounds_report():
    spec = spec1(CubicOdd())
    st_ = solve_state(spec, G, G.zeros())
    rep = check_lemma23_bounds(spec, G, st_, trials=20, seed=0)
    assert rep["stable"]
    assert np.isfinite(rep["max_L10_L2"]) and np.isfinite(rep["max_Linf_Lp"])


def test_constant_direction_against_dense_oracle():
    g = SpaceTimeGrid.uniform(5, 5)
    spec = ProblemSpec(diffusion=np.eye(1), nu=1.0, constraint=UpperOnly(1.0))
    st_ = solve_state(spec, g, g.zeros())
    v = np.ones(g.shape)
    v[0] = 0
    z = solve_linearized(spec, g, st_, v).z
    dense = oracles.unflat(oracles.control_to_state(5, 5) @ oracles.flat(v), 3)
    assert np.allclose(z, dense, atol=1e-14)
    assert lp_norm(g, z, 10) / lp_norm(g, v, 2) == pytest.approx(lp_norm(g, dense, 10) / lp_norm(g, v, 2))


def test_homogeneity():
    spec = spec1(CubicOdd())
    st_ = solve_state(spec, G, G.zeros())
    v = np.random.default_rng(6).standard_normal(G.shape)
    z1 = solve_linearized(spec, G, st_, v).z
    z2 = solve_linearized(spec, G, st_, 2 * v).z
    assert np.allclose(z2, 2 * z1, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_linearity_and_bilinearity(seed, a, b):
    g = SpaceTimeGrid.uniform(9, 6)
    spec = spec1(CubicOdd())
    st_ = solve_state(spec, g, g.zeros())
    rng = np.random.default_rng(seed)
    v1, v2, v3 = (rng.standard_normal(g.shape) for _ in range(3))
    z = lambda v: solve_linearized(spec, g, st_, v)  # noqa: E731
    combo = z(a * v1 + b * v2).z
    assert np.allclose(combo, a * z(v1).z + b * z(v2).z, atol=1e-11)
    w = lambda p, q: solve_second(spec, g, st_, z(p), z(q)).w  # noqa: E731
    assert np.allclose(w(a * v1 + b * v2, v3), a * w(v1, v3) + b * w(v2, v3), atol=1e-10)
