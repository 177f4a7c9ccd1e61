"""Backward adjoint solve with measure data.

Measures are nodal point masses: ``mass_Q[k, i]`` sits at ``(x_i, t_k)`` for
``k >= 1`` and ``mass_Omega[i]`` at ``(x_i, T)``.  The backward march uses
the literal transposes of the forward step Jacobians,

    M_k^T phi^k = L_y(y^k) + mass_Q^k / (|cell| dt) + phi^{k+1} / dt,
    phi^{nt+1}  = mass_Omega / |cell|,

which makes ``<phi, v>_Q = <L_y, z_v>_Q + sum z_v mass_Q + sum z_v(T) mass_Omega``
hold for every direction ``v`` up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SpaceTimeGrid, inner_product_Q, lp_norm, prolong
from .pde_forward import State, solve_state
from .pde_sensitivity import solve_linearized_batch
from .problem import ProblemSpec


class SignViolation(ValueError):
    pass


@dataclass(frozen=True)
class MeasurePair:
    """Discrete stand-in for (mu_Q, mu_Omega): point masses, not densities."""

    mass_Q: np.ndarray
    mass_Omega: np.ndarray
    signed: bool = False

    def __post_init__(self):
        mq = np.array(self.mass_Q, dtype=float)
        mo = np.array(self.mass_Omega, dtype=float)
        if mq.ndim != 2 or mo.ndim != 1 or mq.shape[1] != mo.shape[0]:
            raise ValueError(f"inconsistent measure shapes {mq.shape} and {mo.shape}")
        if not (np.all(np.isfinite(mq)) and np.all(np.isfinite(mo))):
            raise ValueError("measure masses must be finite")
        if np.any(mq[0] != 0):
            raise ValueError("mass_Q must vanish on level 0 (the initial time)")
        if not self.signed and (np.any(mq < 0) or np.any(mo < 0)):
            raise SignViolation("nonnegative measure has negative masses")
        mq.setflags(write=False)
        mo.setflags(write=False)
        object.__setattr__(self, "mass_Q", mq)
        object.__setattr__(self, "mass_Omega", mo)

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid, signed: bool = False) -> "MeasurePair":
        return cls(np.zeros(grid.shape), np.zeros(grid.space.m), signed)

    @property
    def total_variation(self) -> float:
        return float(np.abs(self.mass_Q).sum() + np.abs(self.mass_Omega).sum())

    def positive(self) -> "MeasurePair":
        return MeasurePair(np.maximum(self.mass_Q, 0), np.maximum(self.mass_Omega, 0))

    def negative(self) -> "MeasurePair":
        return MeasurePair(np.maximum(-self.mass_Q, 0), np.maximum(-self.mass_Omega, 0))

    def abs(self) -> "MeasurePair":
        return MeasurePair(np.abs(self.mass_Q), np.abs(self.mass_Omega))

    def scaled(self, c: float) -> "MeasurePair":
        return MeasurePair(c * self.mass_Q, c * self.mass_Omega, self.signed or c < 0)

    def __add__(self, other: "MeasurePair") -> "MeasurePair":
        return MeasurePair(self.mass_Q + other.mass_Q, self.mass_Omega + other.mass_Omega,
                           self.signed or other.signed)

    def pair(self, z: np.ndarray) -> float:
        """``int z dmu_Q + int z(T) dmu_Omega`` for a grid function z."""
        return float(np.sum(z * self.mass_Q) + np.dot(z[-1], self.mass_Omega))

    def check(self, grid: SpaceTimeGrid) -> "MeasurePair":
        grid.check(self.mass_Q, "mass_Q")
        grid.check_spatial(self.mass_Omega, "mass_Omega")
        return self


@dataclass
class Adjoint:
    phi: np.ndarray
    source_measure: MeasurePair
    with_cost: bool = True


def _sweep(state: State, density: np.ndarray, terminal: np.ndarray) -> np.ndarray:
    """Backward transposed march; ``density`` batched along trailing axes allowed."""
    grid = state.grid
    dt = grid.time.dt
    phi = np.zeros_like(density, dtype=float)
    nxt = terminal
    for k in range(grid.time.nt, 0, -1):
        phi[k] = state.solve_step(k, density[k] + nxt / dt, transpose=True)
        nxt = phi[k]
    return phi


def measure_density(grid: SpaceTimeGrid, mu: MeasurePair) -> tuple[np.ndarray, np.ndarray]:
    vol = grid.space.cell_volume
    return mu.mass_Q / (vol * grid.time.dt), mu.mass_Omega / vol


def cost_gradient_density(spec: ProblemSpec, grid: SpaceTimeGrid, y: np.ndarray) -> np.ndarray:
    x = grid.space.coords
    out = np.zeros(grid.shape)
    for k in range(1, grid.time.nt + 1):
        out[k] = spec.cost.L_y(x, grid.time.times[k], y[k])
    return out


def solve_adjoint(spec: ProblemSpec, grid: SpaceTimeGrid, y: State, mu: MeasurePair | None = None,
                  with_cost: bool = True) -> Adjoint:
    mu = MeasurePair.zeros(grid) if mu is None else mu.check(grid)
    if mu.signed and not spec.bilateral:
        raise SignViolation("signed multipliers are only meaningful for bilateral state bounds")
    dens_Q, dens_Omega = measure_density(grid, mu)
    rhs = dens_Q.copy()
    if with_cost:
        rhs += cost_gradient_density(spec, grid, y.y)
    phi = _sweep(y, rhs, dens_Omega)
    return Adjoint(phi=phi, source_measure=mu, with_cost=with_cost)


def adjoint_residual(spec: ProblemSpec, grid: SpaceTimeGrid, y: State, phi, mu: MeasurePair,
                     with_cost: bool = True) -> float:
    """Max over steps of the relative residual of the backward equations."""
    phi = grid.check(phi, "phi")
    dens_Q, dens_Omega = measure_density(grid, mu)
    rhs = dens_Q + (cost_gradient_density(spec, grid, y.y) if with_cost else 0.0)
    dt = grid.time.dt
    worst = 0.0
    nxt = dens_Omega
    for k in range(grid.time.nt, 0, -1):
        b = rhs[k] + nxt / dt
        r = y.step_matrix(k).T @ phi[k] - b
        scale = max(np.max(np.abs(b)), np.max(np.abs(phi[k])) / dt, 1e-300)
        worst = max(worst, float(np.max(np.abs(r)) / scale))
        nxt = phi[k]
    return worst


def transposition_residual(spec: ProblemSpec, grid: SpaceTimeGrid, y: State, phi: Adjoint,
                           trials: int = 20, seed: int = 0) -> float:
    """Worst relative defect of the discrete duality identity over random directions."""
    rng = np.random.default_rng(seed)
    V = rng.standard_normal(grid.shape + (trials,))
    V[0] = 0.0
    Z = solve_linearized_batch(grid, y, V)
    ly = cost_gradient_density(spec, grid, y.y) if phi.with_cost else np.zeros(grid.shape)
    mu = phi.source_measure
    worst = 0.0
    for r in range(trials):
        v, z = V[..., r], Z[..., r]
        lhs = inner_product_Q(grid, phi.phi, v)
        terms = np.array([inner_product_Q(grid, ly, z), float(np.sum(z * mu.mass_Q)),
                          float(np.dot(z[-1], mu.mass_Omega))])
        scale = max(abs(lhs), np.abs(terms).sum(), np.finfo(float).tiny)
        worst = max(worst, abs(lhs - terms.sum()) / scale)
    return float(worst)


def _refine_measure(grid: SpaceTimeGrid, fine: SpaceTimeGrid, mu: MeasurePair) -> MeasurePair:
    """Carry masses to the same physical points of a nested refinement."""
    full_idx = fine.space.interior_index()
    coarse_pos = np.argwhere(~grid.space.boundary_mask)
    target = full_idx[tuple((2 * coarse_pos).T)]
    mq = np.zeros(fine.shape)
    mq[2 * np.arange(1, grid.time.nt + 1)[:, None], target[None, :]] = mu.mass_Q[1:]
    mo = np.zeros(fine.space.m)
    mo[target] = mu.mass_Omega
    return MeasurePair(mq, mo, mu.signed)


def check_measure_stability(spec: ProblemSpec, grid: SpaceTimeGrid, y: State, mu: MeasurePair,
                            u=None, q: float = 1.25, levels: int = 2) -> dict:
    """||phi||_{L^q} / TV(mu) on ``levels`` nested grids (pure-measure adjoint).

    The control driving the state is ``u`` (zeros by default) and is
    prolongated to the finer grids.
    """
    u = grid.zeros() if u is None else grid.check(u, "u")
    tv = mu.total_variation
    norms, ratios, sup_norms, hs = [], [], [], []
    g, m, uu, st = grid, mu, u, y
    for level in range(levels):
        if level > 0:
            fine = g.refine()
            m = _refine_measure(g, fine, m)
            uu = prolong(g, fine, uu)
            g = fine
            st = solve_state(spec, g, uu)
        adj = solve_adjoint(spec, g, st, m, with_cost=False)
        nq = lp_norm(g, adj.phi, q)
        norms.append(nq)
        sup_norms.append(lp_norm(g, adj.phi, np.inf))
        hs.append(float(g.space.h.max()))
        ratios.append(nq / tv if tv > 0 else None)
    if tv == 0:
        return {"q": q, "total_variation": 0.0, "norms": norms, "ratios": ratios, "vacuous": True,
                "drift": None, "stable": True, "phi_sup_norms": sup_norms, "h": hs}
    drift = max(abs(r - ratios[0]) / ratios[0] for r in ratios) if ratios[0] > 0 else np.inf
    return {"q": q, "total_variation": tv, "norms": norms, "ratios": ratios, "vacuous": False,
            "drift": float(drift), "stable": bool(drift < 0.5), "phi_sup_norms": sup_norms, "h": hs}
