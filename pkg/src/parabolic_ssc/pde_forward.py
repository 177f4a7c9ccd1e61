"""Backward-Euler / Newton solver for the semilinear state equation.

Each step solves, at interior nodes,

    (y^k - y^{k-1}) / dt + A_h(t_k) y^k + f(x, t_k, y^k) = u^k

with ``A_h`` the centred finite-difference operator of
``-div(a grad y) + b . grad y`` under homogeneous Dirichlet conditions.
The step Jacobian ``M_k = I/dt + A_h(t_k) + diag(f_y(y^k))`` at the converged
iterate is shared by the linearised, second-order and adjoint solves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .grid import SpaceTimeGrid, SpatialGrid
from .problem import LinearRate, ProblemSpec, Zero


class NewtonDiverged(RuntimeError):
    def __init__(self, step: int, residual: float):
        self.step = step
        self.residual = residual
        super().__init__(f"Newton iteration failed at time step {step}, residual {residual:.3e}")


class LinearSolveFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverOpts:
    newton_tol: float = 1e-10
    max_newton: int = 50
    max_halvings: int = 30
    # one extra full Newton step after convergence, kept only if it lowers the residual
    polish: bool = True


def _second_difference(N: int, h: float) -> sp.csr_matrix:
    """-d^2/dx^2 on the N - 2 interior nodes."""
    k = N - 2
    return sp.diags([-np.ones(k - 1), 2 * np.ones(k), -np.ones(k - 1)], [-1, 0, 1], format="csr") / h**2


def _centred_difference(N: int, h: float) -> sp.csr_matrix:
    k = N - 2
    return sp.diags([-np.ones(k - 1), np.ones(k - 1)], [-1, 1], format="csr") / (2 * h)


def _axis_operator(space: SpatialGrid, ops: dict) -> sp.csr_matrix:
    """Kronecker product of per-axis operators; identity on missing axes."""
    mats = [ops.get(ax, sp.identity(space.nodes[ax] - 2, format="csr")) for ax in range(space.n)]
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def diffusion_matrix(space: SpatialGrid, a: np.ndarray) -> sp.csr_matrix:
    """Discrete ``-sum_ij a_ij d_i d_j``; mixed terms use the centred cross stencil."""
    a = 0.5 * (a + a.T)
    h = space.h
    A = sp.csr_matrix((space.m, space.m))
    for i in range(space.n):
        A = A + a[i, i] * _axis_operator(space, {i: _second_difference(space.nodes[i], h[i])})
        for j in range(i + 1, space.n):
            if a[i, j] != 0.0:
                cross = _axis_operator(
                    space,
                    {i: _centred_difference(space.nodes[i], h[i]), j: _centred_difference(space.nodes[j], h[j])},
                )
                A = A - 2.0 * a[i, j] * cross
    return A.tocsr()


def gradient_matrices(space: SpatialGrid) -> list[sp.csr_matrix]:
    return [_axis_operator(space, {i: _centred_difference(space.nodes[i], space.h[i])}) for i in range(space.n)]


class SpatialOperator:
    """``A_h(t)``; time dependent only through the convection field."""

    def __init__(self, spec: ProblemSpec, space: SpatialGrid):
        self.spec = spec
        self.space = space
        self.diffusion = diffusion_matrix(space, spec.diffusion)
        self.diffusion = (self.diffusion + sp.identity(space.m, format="csr") * 0.0).tocsr()
        self.diffusion.sort_indices()
        self._grads = gradient_matrices(space) if spec.convection is not None else None
        self._peclet_checked = False
        self._diag_pos = diagonal_positions(self.diffusion)

    @property
    def time_independent(self) -> bool:
        return self._grads is None

    def shifted(self, t: float, d) -> sp.csr_matrix:
        """``A_h(t) + diag(d)``."""
        if self._grads is None:
            return shift_diagonal(self.diffusion, d, self._diag_pos)
        return shift_diagonal(self.at(t), d)

    def at(self, t: float) -> sp.csr_matrix:
        if self._grads is None:
            return self.diffusion
        b = self.spec.drift(self.space.coords, t)
        if not self._peclet_checked:
            peclet = float(np.max(np.abs(b) * self.space.h) / (2 * self.spec.lambda_A))
            if peclet > 1:
                warnings.warn(f"cell Peclet number {peclet:.2f} > 1; centred convection may oscillate")
            self._peclet_checked = True
        out = self.diffusion
        for j, G in enumerate(self._grads):
            out = out + sp.diags(b[:, j]) @ G
        out = out.tocsr()
        out.sort_indices()
        return out


def diagonal_positions(A: sp.csr_matrix) -> np.ndarray:
    """Indices into ``A.data`` of the (structurally present) diagonal entries."""
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    pos = np.flatnonzero(A.indices == rows)
    if pos.size != A.shape[0]:
        raise ValueError("operator must store every diagonal entry")
    return pos


def shift_diagonal(A: sp.csr_matrix, d, pos: np.ndarray | None = None) -> sp.csr_matrix:
    """``A + diag(d)`` without sparse-matrix addition."""
    pos = diagonal_positions(A) if pos is None else pos
    M = A.copy()
    M.data[pos] += d
    return M


def _factor(M: sp.spmatrix):
    try:
        return splu(sp.csc_matrix(M))
    except RuntimeError as exc:
        raise LinearSolveFailure(str(exc)) from exc


@dataclass
class State:
    """Discrete state ``y`` (levels 0..nt) with per-step Newton diagnostics."""

    y: np.ndarray
    newton_iterations: np.ndarray
    max_residual: float
    spec: ProblemSpec = field(repr=False)
    grid: SpaceTimeGrid = field(repr=False)
    operator: SpatialOperator = field(repr=False)
    _lu: dict = field(default_factory=dict, repr=False)

    @property
    def steps_identical(self) -> bool:
        """All step Jacobians coincide (linear f with constant rate, no drift)."""
        return self.operator.time_independent and isinstance(self.spec.nonlinearity, (Zero, LinearRate))

    def step_matrix(self, k: int) -> sp.csr_matrix:
        """Jacobian ``M_k`` of step k (k >= 1) at the converged state."""
        grid = self.grid
        t = grid.time.times[k]
        fy = self.spec.nonlinearity.f_y(grid.space.coords, t, self.y[k])
        return self.operator.shifted(t, 1.0 / grid.time.dt + fy)

    def factor(self, k: int):
        key = 1 if self.steps_identical else k
        lu = self._lu.get(key)
        if lu is None:
            lu = self._lu[key] = _factor(self.step_matrix(key))
        return lu

    def solve_step(self, k: int, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
        lu = self.factor(k)
        return lu.solve(np.ascontiguousarray(rhs), trans="T" if transpose else "N")


def step_residual(spec, grid, op_t, t, y_prev, y, u_k):
    x = grid.space.coords
    return (y - y_prev) / grid.time.dt + op_t @ y + spec.nonlinearity.f(x, t, y) - u_k


def solve_state(spec: ProblemSpec, grid: SpaceTimeGrid, u, opts: SolverOpts | None = None,
                operator: SpatialOperator | None = None) -> State:
    """March the state equation from ``y0``; damped Newton per step."""
    opts = opts or SolverOpts()
    u = grid.check(u, "u")
    if not np.all(np.isfinite(u)):
        raise ValueError("control must be finite")
    dt = grid.time.dt
    if 1.0 / dt + min(spec.monotonicity_floor, 0.0) <= 0:
        raise LinearSolveFailure(f"time step {dt} too large for monotonicity floor {spec.monotonicity_floor}")
    op = operator or SpatialOperator(spec, grid.space)
    x = grid.space.coords
    nl = spec.nonlinearity
    y = np.empty(grid.shape)
    y[0] = spec.initial_state(grid.space)
    iters = np.zeros(grid.time.nt + 1, dtype=int)
    worst = 0.0
    linear = op.time_independent and isinstance(nl, (Zero, LinearRate))
    lu_cache = {}
    for k in range(1, grid.time.nt + 1):
        t = grid.time.times[k]
        A = op.at(t)
        yk = y[k - 1].copy()
        r = step_residual(spec, grid, A, t, y[k - 1], yk, u[k])
        rnorm = np.max(np.abs(r))
        it = 0
        while rnorm > opts.newton_tol:
            if it >= opts.max_newton:
                raise NewtonDiverged(k, rnorm)
            lu = lu_cache.get(0) if linear else None
            if lu is None:
                lu = _factor(op.shifted(t, 1.0 / dt + nl.f_y(x, t, yk)))
                if linear:
                    lu_cache[0] = lu
            delta = lu.solve(-r)
            s = 1.0
            for _ in range(opts.max_halvings + 1):
                trial = yk + s * delta
                r_trial = step_residual(spec, grid, A, t, y[k - 1], trial, u[k])
                rn_trial = np.max(np.abs(r_trial))
                if np.isfinite(rn_trial) and rn_trial < rnorm:
                    break
                s *= 0.5
            else:
                raise NewtonDiverged(k, rnorm)
            yk, r, rnorm = trial, r_trial, rn_trial
            it += 1
        if opts.polish and it > 0 and not isinstance(nl, (Zero, LinearRate)):
            trial = yk + _factor(op.shifted(t, 1.0 / dt + nl.f_y(x, t, yk))).solve(-r)
            r_trial = step_residual(spec, grid, A, t, y[k - 1], trial, u[k])
            rn_trial = np.max(np.abs(r_trial))
            if rn_trial < rnorm:
                yk, rnorm = trial, rn_trial
        y[k] = yk
        iters[k] = it
        worst = max(worst, float(rnorm))
    state = State(y=y, newton_iterations=iters, max_residual=worst, spec=spec, grid=grid, operator=op)
    if linear and 0 in lu_cache:
        state._lu[1] = lu_cache[0]
    return state


def state_residual(spec: ProblemSpec, grid: SpaceTimeGrid, u, y) -> float:
    """Max-norm residual of the discrete state equation (and initial condition)."""
    u = grid.check(u, "u")
    y = grid.check(y, "y")
    op = SpatialOperator(spec, grid.space)
    worst = float(np.max(np.abs(y[0] - spec.initial_state(grid.space)), initial=0.0))
    for k in range(1, grid.time.nt + 1):
        t = grid.time.times[k]
        r = step_residual(spec, grid, op.at(t), t, y[k - 1], y[k], u[k])
        worst = max(worst, float(np.max(np.abs(r))))
    return worst
