"""First and second derivatives of the discrete control-to-state map.

Both equations are discretised with the step Jacobians ``M_k`` of the
converged forward solve, so ``z`` and ``w`` are the exact first and second
derivatives of the discrete map ``u -> y``:

    M_k z^k = z^{k-1} / dt + v^k
    M_k w^k = w^{k-1} / dt - f_yy(y^k) z1^k z2^k
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SpaceTimeGrid, lp_norm
from .pde_forward import State
from .problem import ProblemSpec


@dataclass
class LinearizedState:
    z: np.ndarray
    base_state: State


@dataclass
class SecondOrderState:
    w: np.ndarray


def _march(state: State, source: np.ndarray) -> np.ndarray:
    """Zero-initial-value march of ``M_k x^k = x^{k-1}/dt + source^k``.

    ``source`` may carry a trailing batch axis: shape ``(nt+1, m)`` or
    ``(nt+1, m, r)``.
    """
    dt = state.grid.time.dt
    out = np.zeros_like(source, dtype=float)
    for k in range(1, state.grid.time.nt + 1):
        out[k] = state.solve_step(k, out[k - 1] / dt + source[k])
    return out


def solve_linearized(spec: ProblemSpec, grid: SpaceTimeGrid, y: State, v) -> LinearizedState:
    v = grid.check(v, "v")
    return LinearizedState(z=_march(y, v), base_state=y)


def solve_linearized_batch(grid: SpaceTimeGrid, y: State, V: np.ndarray) -> np.ndarray:
    """Directions stacked on a trailing axis, shape ``(nt+1, m, r)``."""
    if V.shape[:2] != grid.shape:
        raise ValueError(f"batch has shape {V.shape}, grid expects {grid.shape} + (r,)")
    return _march(y, V)


def solve_second(spec: ProblemSpec, grid: SpaceTimeGrid, y: State,
                 z1: LinearizedState, z2: LinearizedState) -> SecondOrderState:
    if z1.base_state is not y or z2.base_state is not y:
        raise ValueError("z1 and z2 must be linearised about the given state")
    x = grid.space.coords
    rhs = np.zeros(grid.shape)
    for k in range(1, grid.time.nt + 1):
        t = grid.time.times[k]
        # z1 * z2 first so the result is exactly symmetric in (z1, z2)
        rhs[k] = -spec.nonlinearity.f_yy(x, t, y.y[k]) * (z1.z[k] * z2.z[k])
    return SecondOrderState(w=_march(y, rhs))


def check_lemma23_bounds(spec: ProblemSpec, grid: SpaceTimeGrid, y: State, trials: int = 20,
                         seed: int = 0) -> dict:
    """Empirical ratios ||z||_10 / ||v||_2 and ||z||_inf / ||v||_p over random unit directions."""
    rng = np.random.default_rng(seed)
    p = spec.exponent
    V = rng.standard_normal(grid.shape + (trials,))
    V[0] = 0.0
    for r in range(trials):
        V[..., r] /= lp_norm(grid, V[..., r], 2)
    Z = solve_linearized_batch(grid, y, V)
    r10 = np.array([lp_norm(grid, Z[..., r], 10) / lp_norm(grid, V[..., r], 2) for r in range(trials)])
    rinf = np.array([lp_norm(grid, Z[..., r], np.inf) / lp_norm(grid, V[..., r], p) for r in range(trials)])

    def spread(a):
        return float(a.max() / a.min()) if a.min() > 0 else np.inf

    finite = bool(np.all(np.isfinite(r10)) and np.all(np.isfinite(rinf)))
    return {
        "trials": trials,
        "p": p,
        "ratio_L10_L2": r10.tolist(),
        "ratio_Linf_Lp": rinf.tolist(),
        "max_L10_L2": float(r10.max()),
        "max_Linf_Lp": float(rinf.max()),
        "spread_L10_L2": spread(r10),
        "spread_Linf_Lp": spread(rinf),
        "stable": finite and spread(r10) < 1e3 and spread(rinf) < 1e3,
    }
