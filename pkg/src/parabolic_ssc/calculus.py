"""Reduced cost, Lagrangian and their first and second derivatives.

All formulas are exact derivatives of the discrete maps:

    J(u)        = sum_w [L(y_u) + nu/2 u^2]
    Lag(u, mu)  = J(u) + sum (y_u - gamma) dmu_Q + sum (y_u(T) - gamma) dmu_Omega
    dLag/du     = phi_{u,mu} + nu u                  (as a grid function)
    d2Lag/du2 v^2 = sum_w [(L_yy - f_yy phi) z_v^2 + nu v^2]

In bilateral mode the Jordan parts pair with their own offsets:
``mu+`` with ``y - gamma_max`` and ``mu-`` with ``gamma_min - y``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import pde_adjoint
from .grid import SpaceTimeGrid, inner_product_Q, lp_norm
from .pde_adjoint import Adjoint, MeasurePair
from .pde_forward import SolverOpts, State, solve_state
from .pde_sensitivity import solve_linearized_batch
from .problem import ProblemSpec


@dataclass
class GradientField:
    g: np.ndarray
    state: State
    adjoint: Adjoint


@dataclass
class QuadFormSample:
    v: np.ndarray
    value: float
    l2_norm_v: float
    lp_norm_v: float

    @property
    def ratio(self) -> float:
        return self.value / self.l2_norm_v**2 if self.l2_norm_v > 0 else 0.0


def running_cost(spec: ProblemSpec, grid: SpaceTimeGrid, y: np.ndarray) -> np.ndarray:
    x = grid.space.coords
    out = np.zeros(grid.shape)
    for k in range(1, grid.time.nt + 1):
        out[k] = spec.cost.L(x, grid.time.times[k], y[k])
    return out


def curvature_weight(spec: ProblemSpec, grid: SpaceTimeGrid, y: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Nodal coefficient ``L_yy(y) - f_yy(y) phi`` of the reduced quadratic form."""
    x = grid.space.coords
    out = np.zeros(grid.shape)
    for k in range(1, grid.time.nt + 1):
        t = grid.time.times[k]
        out[k] = spec.cost.L_yy(x, t, y[k]) - spec.nonlinearity.f_yy(x, t, y[k]) * phi[k]
    return out


def _cost_value(spec, grid, u, y) -> float:
    return float(np.sum(grid.weights * (running_cost(spec, grid, y) + 0.5 * spec.nu * u * u)))


def eval_J(spec: ProblemSpec, grid: SpaceTimeGrid, u, state: State | None = None,
           opts: SolverOpts | None = None) -> float:
    u = grid.check(u, "u")
    state = state or solve_state(spec, grid, u, opts)
    return _cost_value(spec, grid, u, state.y)


def constraint_pairing(spec: ProblemSpec, y: np.ndarray, mu: MeasurePair) -> float:
    """Measure terms of the Lagrangian for state values ``y``."""
    c = spec.constraint
    if not spec.bilateral:
        return mu.pair(y - c.upper)
    return mu.positive().pair(y - c.upper) + mu.negative().pair(c.lower - y)


def lagrangian(spec: ProblemSpec, grid: SpaceTimeGrid, u, mu: MeasurePair | None = None,
               state: State | None = None, opts: SolverOpts | None = None) -> float:
    u = grid.check(u, "u")
    state = state or solve_state(spec, grid, u, opts)
    value = _cost_value(spec, grid, u, state.y)
    if mu is not None:
        value += constraint_pairing(spec, state.y, mu.check(grid))
    return value


def grad_lagrangian(spec: ProblemSpec, grid: SpaceTimeGrid, u, mu: MeasurePair | None = None,
                    state: State | None = None, opts: SolverOpts | None = None) -> GradientField:
    u = grid.check(u, "u")
    state = state or solve_state(spec, grid, u, opts)
    adj = pde_adjoint.solve_adjoint(spec, grid, state, mu)
    g = adj.phi + spec.nu * u
    g[0] = 0.0
    return GradientField(g=g, state=state, adjoint=adj)


def grad_J(spec: ProblemSpec, grid: SpaceTimeGrid, u, state: State | None = None,
           opts: SolverOpts | None = None) -> GradientField:
    return grad_lagrangian(spec, grid, u, None, state, opts)


def quadforms(spec: ProblemSpec, grid: SpaceTimeGrid, state: State, phi: np.ndarray,
              V: np.ndarray) -> np.ndarray:
    """Quadratic form values for directions stacked on a trailing axis."""
    W = curvature_weight(spec, grid, state.y, phi)
    Z = solve_linearized_batch(grid, state, V)
    w = grid.weights[..., None]
    return np.sum(w * (W[..., None] * Z * Z + spec.nu * V * V), axis=(0, 1))


def hess_quadform(spec: ProblemSpec, grid: SpaceTimeGrid, u, mu: MeasurePair | None, v,
                  state: State | None = None, adjoint: Adjoint | None = None) -> QuadFormSample:
    u = grid.check(u, "u")
    v = grid.check(v, "v")
    state = state or solve_state(spec, grid, u)
    adjoint = adjoint or pde_adjoint.solve_adjoint(spec, grid, state, mu)
    value = float(quadforms(spec, grid, state, adjoint.phi, v[..., None])[0])
    return QuadFormSample(v=v, value=value, l2_norm_v=lp_norm(grid, v, 2),
                          lp_norm_v=lp_norm(grid, v, spec.exponent))


def hess_bilinear(spec: ProblemSpec, grid: SpaceTimeGrid, u, mu, v1, v2,
                  state: State | None = None, adjoint: Adjoint | None = None) -> float:
    """Off-diagonal second derivative by polarisation."""
    state = state or solve_state(spec, grid, u)
    adjoint = adjoint or pde_adjoint.solve_adjoint(spec, grid, state, mu)
    V = np.stack([v1 + v2, v1 - v2], axis=-1)
    q = quadforms(spec, grid, state, adjoint.phi, V)
    return float(0.25 * (q[0] - q[1]))


def _control_at_state_distance(spec, grid, u_bar, y_bar, d, rho):
    """Find s with ||y(P(u_bar + s d)) - y_bar||_inf = rho along a projected ray."""

    def control(s):
        u = np.clip(u_bar + s * d, spec.alpha, spec.beta)
        u[0] = u_bar[0]
        return u

    def gap(s):
        return lp_norm(grid, solve_state(spec, grid, control(s)).y - y_bar, np.inf) - rho

    hi = 1.0
    while gap(hi) < 0:
        hi *= 2.0
        if hi > 1e8:
            raise RuntimeError(f"cannot reach state distance {rho} along the probe ray")
    s = brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-12)
    return control(s)


def hessian_continuity_probe(spec: ProblemSpec, grid: SpaceTimeGrid, u_bar, mu_bar: MeasurePair,
                             perturbations=(1e-1, 1e-2, 1e-3), directions: int | np.ndarray = 8,
                             seed: int = 0, slack: float = 0.1) -> dict:
    """sup_v |q(u_bar) - q(u)| / ||v||^2 for controls at state distance rho from y_bar.

    ``directions`` is a count of random directions or an array stacked on a
    trailing axis.  The multiplier is held fixed at ``mu_bar``.
    """
    u_bar = grid.check(u_bar, "u_bar")
    rng = np.random.default_rng(seed)
    if isinstance(directions, (int, np.integer)):
        V = rng.standard_normal(grid.shape + (int(directions),))
        V[0] = 0.0
    else:
        V = np.asarray(directions, dtype=float)
    norms2 = np.sum(grid.weights[..., None] * V * V, axis=(0, 1))
    bar_state = solve_state(spec, grid, u_bar)
    bar_adj = pde_adjoint.solve_adjoint(spec, grid, bar_state, mu_bar)
    q_bar = quadforms(spec, grid, bar_state, bar_adj.phi, V)
    d = rng.standard_normal(grid.shape)
    d[0] = 0.0
    d /= lp_norm(grid, d, np.inf)
    sups = []
    for rho in perturbations:
        u = _control_at_state_distance(spec, grid, u_bar, bar_state.y, d, rho)
        st = solve_state(spec, grid, u)
        adj = pde_adjoint.solve_adjoint(spec, grid, st, mu_bar)
        q = quadforms(spec, grid, st, adj.phi, V)
        sups.append(float(np.max(np.abs(q - q_bar) / norms2)))
    monotone = all(b <= (1 + slack) * a for a, b in zip(sups, sups[1:]))
    return {"rho": list(perturbations), "sup": sups, "monotone": monotone, "slack": slack,
            "directions": int(V.shape[-1])}


def gradient_check(spec: ProblemSpec, grid: SpaceTimeGrid, u, mu: MeasurePair | None = None,
                   directions: int = 10, step: float = 1e-4, seed: int = 0) -> dict:
    """Central differences of the Lagrangian (J when mu is None) against the adjoint gradient.

    The relative error is |fd - ad| / max(|fd|, |ad|); directions vanish on level 0.
    """
    u = grid.check(u, "u")
    rng = np.random.default_rng(seed)
    grad = grad_lagrangian(spec, grid, u, mu).g
    rows = []
    for i in range(directions):
        v = rng.standard_normal(grid.shape)
        v[0] = 0.0
        ad = inner_product_Q(grid, grad, v)
        fd = (lagrangian(spec, grid, u + step * v, mu) - lagrangian(spec, grid, u - step * v, mu)) / (2 * step)
        scale = max(abs(fd), abs(ad))
        rel = abs(fd - ad) / scale if scale > 0 else 0.0
        rows.append({"direction": i, "adjoint": ad, "finite_difference": fd, "relative_error": rel})
    return {"step": step, "rows": rows, "max_relative_error": max(r["relative_error"] for r in rows)}
