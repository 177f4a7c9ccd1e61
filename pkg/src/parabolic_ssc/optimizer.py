"""Moreau-Yosida path following for the state-constrained problem.

For each penalty ``lam`` the inner problem is

    min_{alpha <= u <= beta}  J(u) + lam/2 ||(y_u - gamma)_+||^2_{L2(Q)}
                                   + lam/2 ||(y_u(T) - gamma)_+||^2_{L2(Omega)}

(bilateral: both violations).  Its gradient is ``phi_lam + nu u`` where
``phi_lam`` is the adjoint driven by the multiplier estimate
``mass_Q = lam (y - gamma)_+ |cell| dt``, ``mass_Omega = lam (y(T) - gamma)_+ |cell|``,
so a stationary point of the penalised problem satisfies the projection
formula ``u = P(-phi/nu)`` exactly with that multiplier.

The inner solver alternates semismooth Newton steps on
``F(u) = u - P(-phi(u)/nu)`` with projected-gradient fallback steps
(Barzilai-Borwein trial step, Armijo backtracking).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .calculus import _cost_value, curvature_weight
from .grid import SpaceTimeGrid
from .pde_adjoint import Adjoint, MeasurePair, solve_adjoint
from .pde_forward import NewtonDiverged, SolverOpts, State, solve_state
from .problem import ProblemSpec, require_valid

log = logging.getLogger(__name__)


class PathStalled(RuntimeError):
    def __init__(self, message: str, triplet: "KktTriplet | None" = None):
        super().__init__(message)
        self.triplet = triplet


class LineSearchFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveOpts:
    lam0: float = 1.0
    sigma: float = 10.0
    max_stages: int = 8
    inner_tol: float = 1e-8
    max_inner: int = 500
    feas_tol: float = 1e-6
    eps_act: float = 1e-6
    armijo_c: float = 1e-4
    max_backtracks: int = 50
    method: str = "ssn"
    # largest penalty ratio between consecutive warm-started inner solves
    ramp: float = 2.0
    newton: SolverOpts = field(default_factory=SolverOpts)

    def __post_init__(self):
        for name in ("lam0", "inner_tol", "feas_tol", "eps_act", "armijo_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.sigma > 1:
            raise ValueError("sigma must exceed 1")
        if self.method not in ("ssn", "pg"):
            raise ValueError(f"unknown inner method {self.method!r}")
        if not self.ramp > 1:
            raise ValueError("ramp must exceed 1")
        if self.max_stages < 0 or self.max_inner < 1:
            raise ValueError("max_stages must be >= 0 and max_inner >= 1")


def project_control(w, alpha: float, beta: float) -> np.ndarray:
    if not alpha < beta:
        raise ValueError(f"need alpha < beta, got {alpha}, {beta}")
    return np.clip(w, alpha, beta)


def violations(spec: ProblemSpec, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positive parts of the upper and lower state-bound violations."""
    c = spec.constraint
    up = np.maximum(y - c.upper, 0.0)
    lo = np.maximum(c.lower - y, 0.0) if spec.bilateral else np.zeros_like(y)
    up[0] = lo[0] = 0.0
    return up, lo


def multiplier_estimate(spec: ProblemSpec, grid: SpaceTimeGrid, y: np.ndarray, lam: float) -> MeasurePair:
    up, lo = violations(spec, y)
    vol = grid.space.cell_volume
    dens = lam * (up - lo)
    return MeasurePair(dens * vol * grid.time.dt, dens[-1] * vol, signed=spec.bilateral)


def penalty_value(spec: ProblemSpec, grid: SpaceTimeGrid, y: np.ndarray, lam: float) -> float:
    up, lo = violations(spec, y)
    sq = up * up + lo * lo
    return 0.5 * lam * float(np.sum(grid.weights * sq) + grid.space.cell_volume * np.sum(sq[-1]))


@dataclass
class _Point:
    u: np.ndarray
    state: State
    mu: MeasurePair
    adjoint: Adjoint
    objective: float
    grad: np.ndarray
    stationarity: float


def _evaluate(spec, grid, u, lam, opts: SolveOpts) -> _Point:
    state = solve_state(spec, grid, u, opts.newton)
    mu = multiplier_estimate(spec, grid, state.y, lam)
    adj = solve_adjoint(spec, grid, state, mu)
    obj = _cost_value(spec, grid, u, state.y) + penalty_value(spec, grid, state.y, lam)
    grad = adj.phi + spec.nu * u
    grad[0] = 0.0
    stat = stationarity(spec, u, adj.phi)
    return _Point(u, state, mu, adj, obj, grad, stat)


def stationarity(spec: ProblemSpec, u: np.ndarray, phi: np.ndarray) -> float:
    """``||u - P(-phi/nu)||_inf`` over levels k >= 1."""
    target = project_control(-phi[1:] / spec.nu, spec.alpha, spec.beta)
    return float(np.max(np.abs(u[1:] - target), initial=0.0))


def space_time_operator(state: State) -> sp.csr_matrix:
    """Block lower-bidiagonal matrix D with ``D z = v`` for the linearised march (levels 1..nt)."""
    grid = state.grid
    nt, m = grid.time.nt, grid.space.m
    blocks = sp.block_diag([state.step_matrix(k) for k in range(1, nt + 1)], format="csr")
    sub = sp.kron(sp.diags([np.ones(nt - 1)], [-1]), sp.identity(m) / grid.time.dt, format="csr")
    return (blocks - sub).tocsr()


def _newton_direction(spec, grid, pt: _Point, lam: float) -> np.ndarray:
    """Generalised Newton direction for ``F(u) = u - P(-phi(u)/nu)``.

    Solves the coupled system in (du, z, psi) with z = D^{-1} du and
    psi = D^{-T} W z, W the curvature of the penalised Lagrangian.
    """
    nt, m = grid.time.nt, grid.space.m
    N = nt * m
    nu = spec.nu
    q = -pt.adjoint.phi[1:] / nu
    F = (pt.u[1:] - project_control(q, spec.alpha, spec.beta)).ravel()
    inactive = ((q > spec.alpha) & (q < spec.beta)).ravel().astype(float)
    active = 1.0 - inactive

    up, lo = violations(spec, pt.state.y)
    chi = ((up > 0) | (lo > 0))[1:].astype(float)
    c = np.ones((nt, m))
    c[-1] += 1.0 / grid.time.dt
    W = curvature_weight(spec, grid, pt.state.y, pt.adjoint.phi)[1:] + lam * chi * c

    D = space_time_operator(pt.state)
    I = sp.identity(N, format="csr")
    K = sp.bmat([
        [-I, D, None],
        [None, -sp.diags(W.ravel()), D.T],
        [sp.diags(nu * inactive + active), None, sp.diags(inactive)],
    ], format="csc")
    rhs = np.concatenate([np.zeros(N), np.zeros(N), -(nu * inactive + active) * F])
    sol = splu(K).solve(rhs)
    du = np.zeros(grid.shape)
    du[1:] = sol[:N].reshape(nt, m)
    return du


@dataclass
class PenalizedResult:
    u: np.ndarray
    state: State
    adjoint: Adjoint
    mu: MeasurePair
    lam: float
    iterations: int
    stationarity: float
    converged: bool
    status: str
    objective_history: list
    steps: dict


def _pg_step(spec, grid, pt: _Point, lam, opts: SolveOpts, s0: float) -> tuple[_Point, float]:
    """Projected gradient step along the projection arc with Armijo backtracking."""
    s = s0
    for _ in range(opts.max_backtracks):
        u_new = project_control(pt.u - s * pt.grad, spec.alpha, spec.beta)
        diff = u_new - pt.u
        dist2 = float(np.sum(grid.weights * diff * diff))
        if dist2 == 0.0:
            raise LineSearchFailure("projected gradient step is zero at positive stationarity")
        try:
            new = _evaluate(spec, grid, u_new, lam, opts)
        except NewtonDiverged:
            s *= 0.5
            continue
        if new.objective <= pt.objective - opts.armijo_c / s * dist2:
            return new, s
        s *= 0.5
    raise LineSearchFailure(f"Armijo backtracking failed after {opts.max_backtracks} halvings")


def _ssn_step(spec, grid, pt: _Point, lam, opts: SolveOpts) -> _Point | None:
    try:
        du = _newton_direction(spec, grid, pt, lam)
    except RuntimeError as exc:
        log.debug("Newton system failed: %s", exc)
        return None
    tol = 1e-12 * max(1.0, abs(pt.objective))
    for s in (1.0, 0.5, 0.25):
        u_new = project_control(pt.u + s * du, spec.alpha, spec.beta)
        try:
            new = _evaluate(spec, grid, u_new, lam, opts)
        except NewtonDiverged:
            continue
        if new.objective < pt.objective or (
            new.stationarity < pt.stationarity and new.objective <= pt.objective + tol
        ):
            return new
    return None


def solve_penalized(spec: ProblemSpec, grid: SpaceTimeGrid, lam: float, u_init=None,
                    opts: SolveOpts | None = None) -> PenalizedResult:
    opts = opts or SolveOpts()
    if not lam > 0:
        raise ValueError(f"penalty must be positive, got {lam}")
    u0 = np.zeros(grid.shape) if u_init is None else grid.check(u_init, "u_init").copy()
    pt = _evaluate(spec, grid, project_control(u0, spec.alpha, spec.beta), lam, opts)
    history = [pt.objective]
    steps = {"ssn": 0, "pg": 0}
    s_bb = 1.0 / spec.nu
    prev = None
    status = "max_iterations"
    it = 0
    while True:
        if pt.stationarity <= opts.inner_tol:
            status = "converged"
            break
        if it >= opts.max_inner:
            break
        it += 1
        new = _ssn_step(spec, grid, pt, lam, opts) if opts.method == "ssn" else None
        if new is not None:
            steps["ssn"] += 1
        else:
            if prev is not None:
                du = pt.u - prev.u
                dg = pt.grad - prev.grad
                curv = float(np.sum(du * dg))
                if curv > 0:
                    s_bb = float(np.clip(np.sum(du * du) / curv, 1e-10, 1e10))
            try:
                new, _ = _pg_step(spec, grid, pt, lam, opts, s_bb)
            except LineSearchFailure as exc:
                log.info("inner solve stopped: %s", exc)
                status = "line_search_failed"
                break
            steps["pg"] += 1
        prev, pt = pt, new
        history.append(pt.objective)
    return PenalizedResult(u=pt.u, state=pt.state, adjoint=pt.adjoint, mu=pt.mu, lam=lam,
                           iterations=it, stationarity=pt.stationarity,
                           converged=status == "converged", status=status,
                           objective_history=history, steps=steps)


@dataclass
class KktTriplet:
    u: np.ndarray
    state: State
    adjoint: Adjoint
    mu: MeasurePair
    history: list
    converged: bool = True

    @property
    def y(self) -> np.ndarray:
        return self.state.y

    @property
    def phi(self) -> np.ndarray:
        return self.adjoint.phi


def feasibility(spec: ProblemSpec, y: np.ndarray) -> float:
    up, lo = violations(spec, y)
    return float(max(up.max(initial=0.0), lo.max(initial=0.0)))


def _ramp(start: float | None, stop: float, ratio: float) -> list[float]:
    """Geometric penalty values from ``start`` (exclusive) to ``stop`` with bounded ratio."""
    if start is None or stop <= start:
        return [stop]
    n = int(np.ceil(np.log(stop / start) / np.log(ratio) - 1e-12))
    return [start * (stop / start) ** (i / n) for i in range(1, n)] + [stop]


def solve_ocp(spec: ProblemSpec, grid: SpaceTimeGrid, opts: SolveOpts | None = None,
              u_init=None) -> KktTriplet:
    """Penalty path with warm starts; raises PathStalled if feasibility stops improving."""
    opts = opts or SolveOpts()
    require_valid(spec, grid)
    u = project_control(np.zeros(grid.shape) if u_init is None else grid.check(u_init), spec.alpha, spec.beta)
    history = []
    result = None
    prev_lam = None
    for j in range(opts.max_stages):
        lam = opts.lam0 * opts.sigma**j
        iterations, ssn, pg = 0, 0, 0
        for sub in _ramp(prev_lam, lam, opts.ramp):
            result = solve_penalized(spec, grid, sub, u, opts)
            u = result.u
            iterations += result.iterations
            ssn += result.steps["ssn"]
            pg += result.steps["pg"]
        prev_lam = lam
        feas = feasibility(spec, result.state.y)
        history.append({
            "stage": j, "lam": lam, "iterations": iterations, "status": result.status,
            "ssn_steps": ssn, "pg_steps": pg,
            "stationarity": result.stationarity, "feasibility": feas,
            "total_variation": result.mu.total_variation,
            "terminal_mass": float(np.abs(result.mu.mass_Omega).sum()),
            "objective": result.objective_history[-1],
        })
        log.info("stage %d lam=%.1e feas=%.2e stat=%.2e", j, lam, feas, result.stationarity)
        if feas <= opts.feas_tol and result.stationarity <= opts.inner_tol:
            return KktTriplet(result.u, result.state, result.adjoint, result.mu, history, True)
        if j >= 2 and feas >= history[-2]["feasibility"] >= history[-3]["feasibility"] > 0:
            break
    triplet = None
    if result is not None:
        triplet = KktTriplet(result.u, result.state, result.adjoint, result.mu, history, False)
    raise PathStalled(f"penalty path did not reach feasibility {opts.feas_tol:g} "
                      f"and stationarity {opts.inner_tol:g} in {len(history)} stages", triplet)
