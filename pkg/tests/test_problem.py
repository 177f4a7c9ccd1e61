import numpy as np
import pytest

from parabolic_ssc.grid import SpaceTimeGrid
from parabolic_ssc.problem import (Bilateral, CubicOdd, ExpWeighted, InvalidProblem, LinearRate,
                                   Nonlinearity, ProblemSpec, UpperOnly, Zero, admissible, require_valid,
                                   validate)


def canonical(**kw):
    base = dict(diffusion=np.eye(1), nu=1.0, alpha=0.0, beta=1.0, constraint=UpperOnly(1.0), y0=0.0)
    base.update(kw)
    return ProblemSpec(**base)


def tags(spec, grid=None):
    return [v.assumption for v in validate(spec, grid)]


def test_canonical_spec_is_valid():
    assert validate(canonical()) == []


def test_indefinite_diffusion_flagged():
    v = validate(canonical(diffusion=np.diag([1.0, -1.0]), alpha=-1.0))
    assert any(x.assumption == "A1" and "ellipticity" in x.message for x in v)
    assert str(v[0]).startswith("(A1)")


def test_unbounded_controls_need_one_dimension():
    v = validate(canonical(diffusion=np.eye(2), alpha=-np.inf))
    assert "A5" in [x.assumption for x in v]
    assert validate(canonical(alpha=-np.inf, beta=np.inf)) == []


@pytest.mark.parametrize("bad, tag", [
    (dict(nu=0.0), "P"),
    (dict(nu=-1.0), "P"),
    (dict(alpha=1.0, beta=1.0), "P"),
    (dict(constraint=UpperOnly(0.0)), "P"),
    (dict(constraint=Bilateral(0.1, 1.0)), "P"),
    (dict(nonlinearity=CubicOdd(-1.0)), "A3"),
    (dict(y0=2.0), "A4"),
    (dict(p=1.5), "A5"),
])
def test_each_violation_is_named(bad, tag):
    assert tag in tags(canonical(**bad))


def test_monotonicity_spot_check():
    # f = -y**3 is decreasing, so the floor 0 fails on sampled states
    bad = Nonlinearity(lambda x, t, y: -y**3, lambda x, t, y: -3 * y**2, lambda x, t, y: -6 * y, c_f=0.0)
    assert "A2" in tags(canonical(nonlinearity=bad)) or "A3" in tags(canonical(nonlinearity=bad))
    assert tags(canonical(nonlinearity=ExpWeighted(lambda x, t: -1.0 + 0 * x[:, 0]))) != []
    assert validate(canonical(nonlinearity=LinearRate(-2.0))) == []


def test_dimension_mismatch_with_grid():
    assert "A1" in tags(canonical(), SpaceTimeGrid.uniform((5, 5), 2))


def test_validate_is_idempotent_and_pure():
    spec = canonical(nu=-1.0, y0=3.0)
    first = validate(spec)
    assert validate(spec) == first
    assert spec.nu == -1.0


def test_require_valid_raises_with_all_messages():
    with pytest.raises(InvalidProblem) as exc:
        require_valid(canonical(nu=0.0, y0=5.0))
    assert "(P)" in str(exc.value) and "(A4)" in str(exc.value)


def test_admissible_examples():
    g = SpaceTimeGrid.uniform(9, 4)
    spec = canonical()
    tol = 1e-6
    assert admissible(spec, g, np.full(g.shape, 0.5), g.zeros(), tol)
    y = g.zeros()
    y[2, 3] = 1.0 + 2 * tol
    assert not admissible(spec, g, np.full(g.shape, 0.5), y, tol)
    bil = canonical(constraint=Bilateral(-0.5, 0.5))
    assert not admissible(bil, g, np.full(g.shape, 0.5), np.full(g.shape, -0.5 - 2 * tol), tol)


def test_admissible_monotone_in_tolerance():
    g = SpaceTimeGrid.uniform(9, 4)
    spec = canonical()
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = rng.uniform(-0.2, 1.2, g.shape)
        y = rng.uniform(0, 1.2, g.shape)
        if admissible(spec, g, u, y, 0.0):
            assert admissible(spec, g, u, y, 1e-3)


def test_exponent_defaults():
    assert canonical().exponent == 2.0
    assert canonical(diffusion=np.eye(2), alpha=-1.0).exponent == 3.0
    assert canonical(p=4.0).exponent == 4.0


def test_initial_state_forms():
    g = SpaceTimeGrid.uniform(5, 2)
    assert np.array_equal(canonical(y0=0.25).initial_state(g.space), np.full(3, 0.25))
    assert canonical(y0=lambda x: x[:, 0] * 0).initial_state(g.space).shape == (3,)
    with pytest.raises(ValueError):
        canonical(y0=np.zeros(4)).initial_state(g.space)


def test_preset_derivatives_match_finite_differences():
    x = np.array([[0.3], [0.7]])
    y = np.array([-0.4, 0.9])
    for f in (Zero(), LinearRate(1.5), CubicOdd(2.0), ExpWeighted(lambda x, t: 1 + x[:, 0])):
        s = 1e-6
        fd = (f.f(x, 0.1, y + s) - f.f(x, 0.1, y - s)) / (2 * s)
        assert np.allclose(fd, f.f_y(x, 0.1, y), atol=1e-7)
        fd2 = (f.f_y(x, 0.1, y + s) - f.f_y(x, 0.1, y - s)) / (2 * s)
        assert np.allclose(fd2, f.f_yy(x, 0.1, y), atol=1e-6)
