import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from parabolic_ssc import testbeds
from parabolic_ssc.calculus import (eval_J, grad_J, grad_lagrangian, gradient_check, hess_bilinear,
                                    hess_quadform, hessian_continuity_probe, lagrangian)
from parabolic_ssc.grid import SpaceTimeGrid, inner_product_Q, lp_norm
from parabolic_ssc.pde_adjoint import MeasurePair
from parabolic_ssc.pde_forward import solve_state
from parabolic_ssc.problem import (CubicOdd, LinearRate, ProblemSpec, QuadraticCost, UpperOnly, Zero,
                                   ZeroCost)


def make(nl=None, cost=None, nu=1.0, gamma=1.0, y0=0.0):
    return ProblemSpec(diffusion=np.eye(1), nonlinearity=nl or Zero(), cost=cost or ZeroCost(), nu=nu,
                       constraint=UpperOnly(gamma), y0=y0)


G = SpaceTimeGrid.uniform(17, 16)
G5 = SpaceTimeGrid.uniform(5, 5)


def test_zero_cost_zero_control():
    assert eval_J(make(), G, G.zeros()) == 0.0


def test_tikhonov_only_value():
    val = eval_J(make(nu=2.0), G, np.ones(G.shape))
    assert val == pytest.approx(G.measure)
    assert abs(val - 1.0) <= G.space.h[0]


def _dense_tracking(u, y_d, nu):
    S = oracles.control_to_state(5, 5)
    w = oracles.weights(5, 5)
    y = S @ oracles.flat(u)
    r = y - oracles.flat(y_d)
    return 0.5 * w * r @ r + 0.5 * nu * w * oracles.flat(u) @ oracles.flat(u), S, r


def test_tracking_cost_against_dense_oracle():
    yd = lambda x, t: np.sin(np.pi * x[:, 0]) * t  # noqa: E731
    spec = make(cost=QuadraticCost(yd), nu=0.3)
    u = np.random.default_rng(0).standard_normal(G5.shape)
    u[0] = 0
    val, _, _ = _dense_tracking(u, G5.sample(yd), 0.3)
    assert eval_J(spec, G5, u) == pytest.approx(val, rel=1e-13)


def test_gradient_against_dense_normal_equations():
    yd = lambda x, t: np.cos(np.pi * x[:, 0]) + t  # noqa: E731
    spec = make(cost=QuadraticCost(yd), nu=0.3)
    u = np.random.default_rng(1).standard_normal(G5.shape)
    u[0] = 0
    _, S, r = _dense_tracking(u, G5.sample(yd), 0.3)
    dense = S.T @ r + 0.3 * oracles.flat(u)
    assert np.allclose(oracles.flat(grad_J(spec, G5, u).g), dense, atol=1e-12)


def test_gradient_is_nu_u_when_adjoint_vanishes():
    spec = make(CubicOdd())
    u = np.random.default_rng(2).standard_normal(G.shape)
    g = grad_J(spec, G, u).g
    assert np.allclose(g[1:], u[1:])
    assert np.all(g[0] == 0)


@pytest.mark.parametrize("name", ["cubic_1d", "state_active_1d", "lq_interior_1d"])
def test_fd_gradients(name):
    tb = testbeds.REGISTRY[name](17, 16)
    u = tb.grid.sample(lambda x, t: np.sin(3 * x[:, 0] + 2 * t))
    mq = np.full(tb.grid.shape, 0.05)
    mq[0] = 0
    mu = MeasurePair(mq, np.full(tb.grid.space.m, 0.1))
    assert gradient_check(tb.spec, tb.grid, u, None, 10, 1e-4, 0)["max_relative_error"] <= 1e-5
    assert gradient_check(tb.spec, tb.grid, u, mu, 10, 1e-4, 0)["max_relative_error"] <= 1e-5


def test_lagrangian_reductions():
    spec = make(CubicOdd(), QuadraticCost(0.3), gamma=0.5)
    u = np.random.default_rng(3).standard_normal(G.shape)
    assert lagrangian(spec, G, u, MeasurePair.zeros(G)) == eval_J(spec, G, u)
    assert np.array_equal(grad_lagrangian(spec, G, u, MeasurePair.zeros(G)).g, grad_J(spec, G, u).g)


def test_lagrangian_pairing_examples():
    spec = make(gamma=0.5)
    u = G.zeros()  # y = 0 everywhere
    mq = G.zeros()
    mq[3, 4] = 1.0
    assert lagrangian(spec, G, u, MeasurePair(mq, np.zeros(G.space.m))) == pytest.approx(-0.5)
    # a state sitting exactly at gamma on the support contributes nothing
    spec_at = make(gamma=0.5, y0=0.5)
    y = solve_state(spec_at, G, G.zeros()).y
    mo = np.zeros(G.space.m)
    mo[np.argmin(np.abs(y[-1] - 0.5))] = 1.0
    assert lagrangian(spec_at, G, G.zeros(), MeasurePair(G.zeros(), mo)) == pytest.approx(
        eval_J(spec_at, G, G.zeros()) + y[-1].max() - 0.5)


def test_gradient_superposition_in_measure():
    spec = make(CubicOdd(), QuadraticCost(0.2))
    u = np.random.default_rng(4).standard_normal(G.shape)
    rng = np.random.default_rng(5)
    m1 = MeasurePair(np.vstack([np.zeros(G.space.m), np.abs(rng.standard_normal((16, G.space.m)))]),
                     np.abs(rng.standard_normal(G.space.m)))
    m2 = m1.scaled(0.3)
    g0 = grad_lagrangian(spec, G, u).g
    d1 = grad_lagrangian(spec, G, u, m1).g - g0
    d2 = grad_lagrangian(spec, G, u, m2).g - g0
    d12 = grad_lagrangian(spec, G, u, m1 + m2).g - g0
    assert np.allclose(d12, d1 + d2, atol=1e-12)


def test_quadform_trivial_cases():
    spec = make(LinearRate(1.0))
    v = np.random.default_rng(6).standard_normal(G.shape)
    assert hess_quadform(spec, G, G.zeros(), None, G.zeros()).value == 0.0
    q = hess_quadform(spec, G, G.zeros(), None, v)
    assert q.value == pytest.approx(lp_norm(G, v, 2) ** 2, rel=1e-13)
    assert q.ratio == pytest.approx(1.0)


def _cubic_point():
    tb = testbeds.cubic_1d(17, 16)
    rng = np.random.default_rng(7)
    u = tb.grid.sample(lambda x, t: np.sin(2 * np.pi * x[:, 0]) * (1 + t))
    v = rng.standard_normal(tb.grid.shape)
    v[0] = 0
    mq = np.full(tb.grid.shape, 0.02)
    mq[0] = 0
    return tb.spec, tb.grid, u, v, MeasurePair(mq, np.full(tb.grid.space.m, 0.05))


def test_second_difference_oracle():
    spec, g, u, v, mu = _cubic_point()
    q = hess_quadform(spec, g, u, mu, v).value
    L = lambda w: lagrangian(spec, g, w, mu)  # noqa: E731
    # small curvature of the cubic keeps truncation tiny; use large steps to stay above round-off
    ss = np.array([2.0, 1.0, 0.5])
    errs = [abs(q - (L(u + s * v) - 2 * L(u) + L(u - s * v)) / s**2) for s in ss]
    assert errs[0] > errs[1] > errs[2]
    assert np.polyfit(np.log(ss), np.log(errs), 1)[0] >= 1.9


def test_taylor_chain_third_order():
    spec, g, u, v, mu = _cubic_point()
    L0 = lagrangian(spec, g, u, mu)
    dL = inner_product_Q(g, grad_lagrangian(spec, g, u, mu).g, v)
    q = hess_quadform(spec, g, u, mu, v).value
    ss = np.array([1e-1, 3e-2, 1e-2])
    rem = [abs(lagrangian(spec, g, u + s * v, mu) - L0 - s * dL - 0.5 * s**2 * q) for s in ss]
    assert np.polyfit(np.log(ss), np.log(rem), 1)[0] >= 2.9


def test_polarisation_consistent_with_diagonal():
    spec, g, u, v, mu = _cubic_point()
    assert hess_bilinear(spec, g, u, mu, v, v) == pytest.approx(hess_quadform(spec, g, u, mu, v).value)
    w = np.roll(v, 3, axis=1)
    assert hess_bilinear(spec, g, u, mu, v, w) == pytest.approx(hess_bilinear(spec, g, u, mu, w, v))


@settings(max_examples=15, deadline=None)
@given(c=st.floats(-20, 20, allow_nan=False))
def test_quadform_homogeneity(c):
    spec, g, u, v, mu = _cubic_point()
    q1 = hess_quadform(spec, g, u, mu, v).value
    assert hess_quadform(spec, g, u, mu, c * v).value == pytest.approx(c * c * q1, rel=1e-10, abs=1e-14)


def test_continuity_probe_linear_preset_is_exact():
    tb = testbeds.lq_interior_1d(17, 16)
    rep = hessian_continuity_probe(tb.spec, tb.grid, tb.grid.zeros(), MeasurePair.zeros(tb.grid))
    assert max(rep["sup"]) <= 1e-13


def test_continuity_probe_trend_on_cubic():
    spec, g, u, _, mu = _cubic_point()
    rep = hessian_continuity_probe(spec, g, u, mu, (1e-1, 1e-2, 1e-3), 6, 1)
    assert rep["monotone"]
    assert rep["sup"][-1] < rep["sup"][0]
