"""Problem data: operator coefficients, nonlinearity, running cost, bounds.

Callbacks are pointwise and vectorised over nodes: ``func(x, t, y)`` receives
coordinates ``x`` of shape ``(m, n)``, a scalar time ``t`` and state values
``y`` of shape ``(m,)`` and returns an array of shape ``(m,)``.  Space-time
weights such as ``g`` or ``y_d`` are called as ``func(x, t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .grid import SpaceTimeGrid, SpatialGrid

Field = Union[float, Callable[[np.ndarray, float], np.ndarray]]


def _eval_field(g: Field, x: np.ndarray, t: float) -> np.ndarray:
    if callable(g):
        return np.broadcast_to(np.asarray(g(x, t), dtype=float), (x.shape[0],))
    return np.full(x.shape[0], float(g))


# --- nonlinearity f(x, t, y) -------------------------------------------------


@dataclass(frozen=True)
class Zero:
    """f = 0."""

    c_f: float = 0.0

    def f(self, x, t, y):
        return np.zeros_like(y)

    def f_y(self, x, t, y):
        return np.zeros_like(y)

    def f_yy(self, x, t, y):
        return np.zeros_like(y)


@dataclass(frozen=True)
class LinearRate:
    """f = c * y."""

    c: float = 1.0

    @property
    def c_f(self) -> float:
        return self.c

    def f(self, x, t, y):
        return self.c * y

    def f_y(self, x, t, y):
        return np.full_like(y, self.c)

    def f_yy(self, x, t, y):
        return np.zeros_like(y)


@dataclass(frozen=True)
class CubicOdd:
    """f = c * y**3 with c > 0."""

    c: float = 1.0
    c_f: float = 0.0

    def f(self, x, t, y):
        return self.c * y**3

    def f_y(self, x, t, y):
        return 3.0 * self.c * y**2

    def f_yy(self, x, t, y):
        return 6.0 * self.c * y


@dataclass(frozen=True)
class ExpWeighted:
    """f = g(x, t) * exp(y) with g >= 0."""

    g: Field = 1.0
    c_f: float = 0.0

    def f(self, x, t, y):
        return _eval_field(self.g, x, t) * np.exp(y)

    def f_y(self, x, t, y):
        return self.f(x, t, y)

    def f_yy(self, x, t, y):
        return self.f(x, t, y)


@dataclass(frozen=True)
class Nonlinearity:
    """User supplied f with its first two y-derivatives and floor C_f <= f_y."""

    f: Callable
    f_y: Callable
    f_yy: Callable
    c_f: float = 0.0


# --- running cost L(x, t, y) -------------------------------------------------


@dataclass(frozen=True)
class QuadraticCost:
    """L = (weight / 2) * (y - y_d)**2.  A negative weight gives an indefinite cost."""

    y_d: Field = 0.0
    weight: float = 1.0

    def L(self, x, t, y):
        return 0.5 * self.weight * (y - _eval_field(self.y_d, x, t)) ** 2

    def L_y(self, x, t, y):
        return self.weight * (y - _eval_field(self.y_d, x, t))

    def L_yy(self, x, t, y):
        return np.full_like(y, self.weight)


@dataclass(frozen=True)
class ZeroCost:
    def L(self, x, t, y):
        return np.zeros_like(y)

    def L_y(self, x, t, y):
        return np.zeros_like(y)

    def L_yy(self, x, t, y):
        return np.zeros_like(y)


@dataclass(frozen=True)
class Cost:
    """User supplied L with its first two y-derivatives."""

    L: Callable
    L_y: Callable
    L_yy: Callable


# --- state constraint ---------------------------------------------------------


@dataclass(frozen=True)
class UpperOnly:
    gamma: float

    @property
    def upper(self) -> float:
        return self.gamma

    @property
    def lower(self) -> float:
        return -np.inf

    bilateral = False


@dataclass(frozen=True)
class Bilateral:
    gamma_min: float
    gamma_max: float

    @property
    def upper(self) -> float:
        return self.gamma_max

    @property
    def lower(self) -> float:
        return self.gamma_min

    bilateral = True


# --- the problem ----------------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    """min J(u) = int_Q L(x,t,y_u) + nu/2 u^2 subject to box and state bounds.

    ``diffusion`` is the constant n x n coefficient matrix ``a_ij``;
    ``convection(x, t)`` returns the drift ``b`` with shape ``(m, n)``.
    ``y0`` is a constant, a callable ``y0(x)`` or an array over interior nodes.
    """

    diffusion: np.ndarray
    nonlinearity: object = field(default_factory=Zero)
    cost: object = field(default_factory=ZeroCost)
    nu: float = 1.0
    alpha: float = -np.inf
    beta: float = np.inf
    constraint: object = field(default_factory=lambda: UpperOnly(1.0))
    y0: object = 0.0
    convection: Callable | None = None
    c_f: float | None = None
    p: float | None = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.diffusion, dtype=float))
        a.setflags(write=False)
        object.__setattr__(self, "diffusion", a)

    @property
    def n(self) -> int:
        return self.diffusion.shape[0]

    @property
    def monotonicity_floor(self) -> float:
        return float(self.nonlinearity.c_f if self.c_f is None else self.c_f)

    @property
    def exponent(self) -> float:
        """Integrability exponent used for cone slacks; defaults to a valid choice."""
        if self.p is not None:
            return float(self.p)
        return 2.0 if self.n == 1 else 2.0 + self.n / 2.0

    @property
    def lambda_A(self) -> float:
        sym = 0.5 * (self.diffusion + self.diffusion.T)
        return float(np.linalg.eigvalsh(sym).min())

    @property
    def bilateral(self) -> bool:
        return bool(self.constraint.bilateral)

    def initial_state(self, space: SpatialGrid) -> np.ndarray:
        if callable(self.y0):
            return np.broadcast_to(np.asarray(self.y0(space.coords), dtype=float), (space.m,)).copy()
        y0 = np.asarray(self.y0, dtype=float)
        if y0.ndim == 0:
            return np.full(space.m, float(y0))
        if y0.shape != (space.m,):
            raise ValueError(f"y0 has shape {y0.shape}, grid has {space.m} interior nodes")
        return y0.copy()

    def drift(self, x: np.ndarray, t: float) -> np.ndarray | None:
        if self.convection is None:
            return None
        return np.broadcast_to(np.asarray(self.convection(x, t), dtype=float), x.shape)


# --- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    assumption: str
    message: str

    def __str__(self):
        return f"({self.assumption}) {self.message}"


class InvalidProblem(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def validate(spec: ProblemSpec, grid: SpaceTimeGrid | None = None) -> list[Violation]:
    """Report every breached assumption; never raises on bad data."""
    out: list[Violation] = []
    a = spec.diffusion
    n = spec.n
    if a.shape != (n, n) or not np.all(np.isfinite(a)):
        out.append(Violation("A1", f"diffusion must be a finite {n}x{n} matrix"))
    elif spec.lambda_A <= 0:
        out.append(Violation("A1", f"ellipticity fails: smallest eigenvalue {spec.lambda_A:.3g} <= 0"))
    if grid is not None and grid.space.n != n:
        out.append(Violation("A1", f"diffusion is {n}x{n} but grid has dimension {grid.space.n}"))

    if not (np.isfinite(spec.nu) and spec.nu > 0):
        out.append(Violation("P", f"Tikhonov weight nu must be > 0, got {spec.nu}"))
    if not spec.alpha < spec.beta:
        out.append(Violation("P", f"control bounds need alpha < beta, got [{spec.alpha}, {spec.beta}]"))
    if n >= 2 and not (np.isfinite(spec.alpha) and np.isfinite(spec.beta)):
        out.append(Violation("A5", "finite control bounds required for n >= 2"))

    c = spec.constraint
    if isinstance(c, Bilateral):
        if not c.gamma_min < 0 < c.gamma_max:
            out.append(Violation("P", f"bilateral bounds need gamma_min < 0 < gamma_max, got {c.gamma_min}, {c.gamma_max}"))
    elif isinstance(c, UpperOnly):
        if not c.gamma > 0:
            out.append(Violation("P", f"state bound gamma must be > 0, got {c.gamma}"))
    else:
        out.append(Violation("P", f"unknown state-constraint mode {c!r}"))

    p = spec.exponent
    if n == 1 and p < 2:
        out.append(Violation("A5", f"exponent p must be >= 2 for n = 1, got {p}"))
    if n >= 2 and not p > 1 + n / 2:
        out.append(Violation("A5", f"exponent p must exceed 1 + n/2 = {1 + n / 2} for n = {n}, got {p}"))

    nl = spec.nonlinearity
    if isinstance(nl, CubicOdd) and not nl.c > 0:
        out.append(Violation("A3", f"cubic nonlinearity needs a positive leading coefficient, got {nl.c}"))

    space = grid.space if grid is not None else SpatialGrid((9,) * max(n, 1))
    times = grid.time.times if grid is not None else np.linspace(0.0, 1.0, 5)
    if space.n == n:
        out.extend(_check_monotonicity(spec, space, times))
        out.extend(_check_initial_state(spec, space))
    return out


def _check_monotonicity(spec, space, times):
    """Sampled spot check of f_y >= C_f; cannot prove the bound."""
    x = space.coords
    floor = spec.monotonicity_floor
    nl = spec.nonlinearity
    worst = np.inf
    for t in times[:: max(1, len(times) // 5)]:
        if isinstance(nl, ExpWeighted):
            g = _eval_field(nl.g, x, t)
            if np.any(g < 0):
                return [Violation("A3", "exponential weight g must be nonnegative")]
        for yv in np.linspace(-5.0, 5.0, 21):
            fy = nl.f_y(x, t, np.full(x.shape[0], yv))
            worst = min(worst, float(np.min(fy)))
    if not np.isfinite(worst) or worst < floor - 1e-12:
        return [Violation("A3", f"sampled f_y = {worst:.3g} below declared floor C_f = {floor:.3g}")]
    return []


def _check_initial_state(spec, space):
    try:
        y0 = spec.initial_state(space)
    except ValueError as exc:
        return [Violation("A4", str(exc))]
    c = spec.constraint
    if not np.all(np.isfinite(y0)):
        return [Violation("A4", "initial state must be finite")]
    if np.any(y0 >= c.upper):
        return [Violation("A4", f"initial state must lie strictly below the upper bound {c.upper}")]
    if np.any(y0 <= c.lower):
        return [Violation("A4", f"initial state must lie strictly above the lower bound {c.lower}")]
    return []


def require_valid(spec: ProblemSpec, grid: SpaceTimeGrid | None = None) -> None:
    violations = validate(spec, grid)
    if violations:
        raise InvalidProblem(violations)


def admissible(spec: ProblemSpec, grid: SpaceTimeGrid, u, y, tol: float = 0.0) -> bool:
    """Box bounds on levels k >= 1 and state bounds on every level, within ``tol``."""
    u = grid.check(u, "u")
    y = grid.check(y, "y")
    c = spec.constraint
    return bool(
        np.all(u[1:] >= spec.alpha - tol)
        and np.all(u[1:] <= spec.beta + tol)
        and np.all(y <= c.upper + tol)
        and np.all(y >= c.lower - tol)
    )
