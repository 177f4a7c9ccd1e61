"""Constructed problem instances shared by tests, scripts and the CLI presets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conditions import TripletData
from .grid import SpaceTimeGrid
from .optimizer import SolveOpts
from .pde_adjoint import MeasurePair
from .pde_forward import solve_state
from .problem import (Bilateral, CubicOdd, LinearRate, ProblemSpec, QuadraticCost, UpperOnly,
                      Zero)


@dataclass(frozen=True)
class Testbed:
    name: str
    spec: ProblemSpec
    grid: SpaceTimeGrid
    opts: SolveOpts
    u0: np.ndarray | None = None  # a Slater point, when one is known


# The penalty path reaches feasibility 1e-6 only at lambda = 1e8; default 8 stages stop at 1e7.
PATH_OPTS = SolveOpts(max_stages=10)


def _ramp_in(t):
    return np.minimum(2.0 * t, 1.0)


def state_active_1d(nodes: int = 33, nt: int = 32) -> Testbed:
    """Target far above gamma, so the upper state bound is active on an interior region."""
    grid = SpaceTimeGrid.uniform(nodes, nt)
    spec = ProblemSpec(
        diffusion=np.eye(1),
        cost=QuadraticCost(lambda x, t: 2.0 * np.sin(np.pi * x[:, 0]) * _ramp_in(t)),
        nu=0.1, alpha=-10.0, beta=10.0, constraint=UpperOnly(0.1), y0=0.0,
    )
    return Testbed("state_active_1d", spec, grid, PATH_OPTS, u0=np.full(grid.shape, -10.0))


def bilateral_1d(nodes: int = 33, nt: int = 32) -> Testbed:
    """Antisymmetric target: the upper bound binds on the left half and the lower on the right."""
    grid = SpaceTimeGrid.uniform(nodes, nt)
    spec = ProblemSpec(
        diffusion=np.eye(1),
        cost=QuadraticCost(lambda x, t: 10.0 * np.sin(2 * np.pi * x[:, 0]) * _ramp_in(t)),
        nu=0.1, alpha=-10.0, beta=10.0, constraint=Bilateral(-0.05, 0.05), y0=0.0,
    )
    return Testbed("bilateral_1d", spec, grid, PATH_OPTS, u0=np.zeros(grid.shape))


def lq_interior_1d(nodes: int = 33, nt: int = 32) -> Testbed:
    """Linear-quadratic with inactive bounds; the optimum is unconstrained."""
    grid = SpaceTimeGrid.uniform(nodes, nt)
    spec = ProblemSpec(
        diffusion=np.eye(1), nonlinearity=LinearRate(1.0),
        cost=QuadraticCost(lambda x, t: 0.5 * np.sin(np.pi * x[:, 0])),
        nu=1.0, alpha=-10.0, beta=10.0, constraint=UpperOnly(10.0), y0=0.0,
    )
    return Testbed("lq_interior_1d", spec, grid, SolveOpts(), u0=np.full(grid.shape, -1.0))


def control_active_1d(nodes: int = 33, nt: int = 32) -> Testbed:
    """Tight upper control bound with an inactive state bound."""
    grid = SpaceTimeGrid.uniform(nodes, nt)
    spec = ProblemSpec(
        diffusion=np.eye(1),
        cost=QuadraticCost(lambda x, t: 2.0 * np.sin(np.pi * x[:, 0])),
        nu=0.1, alpha=-1.0, beta=1.0, constraint=UpperOnly(10.0), y0=0.0,
    )
    return Testbed("control_active_1d", spec, grid, SolveOpts(), u0=np.full(grid.shape, -1.0))


def cubic_1d(nodes: int = 33, nt: int = 32, c: float = 1.0) -> Testbed:
    """Cubic reaction with a nonzero initial state; f_yy changes sign across the domain."""
    grid = SpaceTimeGrid.uniform(nodes, nt)
    spec = ProblemSpec(
        diffusion=np.eye(1), nonlinearity=CubicOdd(c),
        cost=QuadraticCost(lambda x, t: np.cos(np.pi * x[:, 0])),
        nu=0.1, alpha=-5.0, beta=5.0, constraint=UpperOnly(5.0),
        y0=lambda x: np.sin(2 * np.pi * x[:, 0]),
    )
    return Testbed("cubic_1d", spec, grid, SolveOpts(), u0=np.full(grid.shape, -5.0))


def convex_2d(nodes: int = 17, nt: int = 16) -> Testbed:
    """Small 2-D tracking problem with an anisotropic diffusion and inactive bounds."""
    grid = SpaceTimeGrid.uniform((nodes, nodes), nt)
    spec = ProblemSpec(
        diffusion=np.array([[1.0, 0.2], [0.2, 0.5]]),
        cost=QuadraticCost(lambda x, t: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])),
        nu=0.5, alpha=-10.0, beta=10.0, constraint=UpperOnly(10.0), y0=0.0,
    )
    return Testbed("convex_2d", spec, grid, SolveOpts(), u0=np.full(grid.shape, -1.0))


def indefinite_1d(nodes: int = 33, nt: int = 32, weight: float = -20.0, nu: float = 1e-3):
    """L = weight/2 y^2 with weight < 0, y0 = 0.

    u = 0 gives y = 0 and phi = 0, so (0, 0) satisfies the first-order
    conditions with zero multiplier while the quadratic form is negative on
    smooth directions once |weight| ||z_v||^2 exceeds nu ||v||^2.
    """
    grid = SpaceTimeGrid.uniform(nodes, nt)
    spec = ProblemSpec(
        diffusion=np.eye(1), cost=QuadraticCost(0.0, weight), nu=nu,
        alpha=-1.0, beta=1.0, constraint=UpperOnly(1.0), y0=0.0,
    )
    triplet = TripletData(np.zeros(grid.shape), MeasurePair.zeros(grid))
    return Testbed("indefinite_1d", spec, grid, SolveOpts(), u0=np.full(grid.shape, -1.0)), triplet


# --- manufactured solution ----------------------------------------------------------


def manufactured_exact(x, t):
    return np.exp(-t) * np.sin(np.pi * x[:, 0])


def manufactured_1d(mode: str = "continuous"):
    """Problem and forcing whose exact solution is y* = exp(-t) sin(pi x), for y_t - y_xx + y = u.

    ``mode`` selects which discretisation error survives:

    * ``continuous``: u* = pi^2 y*, both errors present.
    * ``space``: forcing matched to backward Euler, so the time-discrete
      solution equals y* at every level and only the spatial error remains.
    * ``time``: forcing built from the discrete Laplacian eigenvalue of
      sin(pi x), so the space-discrete solution equals y* and only the
      temporal error remains.
    """
    if mode not in ("continuous", "space", "time"):
        raise ValueError(f"unknown manufactured mode {mode!r}")
    spec = ProblemSpec(
        diffusion=np.eye(1), nonlinearity=LinearRate(1.0), nu=1.0,
        constraint=UpperOnly(10.0), y0=lambda x: np.sin(np.pi * x[:, 0]),
    )

    def control(grid: SpaceTimeGrid) -> np.ndarray:
        exact = grid.sample(manufactured_exact)
        if mode == "continuous":
            return np.pi**2 * exact
        if mode == "space":
            dt = grid.time.dt
            return ((1.0 - np.exp(dt)) / dt + np.pi**2 + 1.0) * exact
        h = grid.space.h[0]
        lam_h = 4.0 / h**2 * np.sin(np.pi * h / 2.0) ** 2
        return lam_h * exact

    return spec, control


def manufactured_error(grid: SpaceTimeGrid, mode: str = "continuous") -> float:
    """Max nodal error of the discrete state against the exact solution."""
    spec, control = manufactured_1d(mode)
    y = solve_state(spec, grid, control(grid)).y
    return float(np.max(np.abs(y - grid.sample(manufactured_exact))))


REGISTRY = {
    "state_active_1d": state_active_1d,
    "bilateral_1d": bilateral_1d,
    "lq_interior_1d": lq_interior_1d,
    "control_active_1d": control_active_1d,
    "cubic_1d": cubic_1d,
    "convex_2d": convex_2d,
}
