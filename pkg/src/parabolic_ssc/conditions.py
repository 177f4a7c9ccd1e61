"""First-order (KKT) checks and second-order probes on the extended critical cone.

A triplet is anything with attributes ``u`` (control), ``mu`` (MeasurePair)
and optionally ``y`` / ``phi`` (stored state and adjoint, checked for
consistency).  State and adjoint are always recomputed from ``(u, mu)``.

Active sets are taken with an absolute tolerance ``eps_act``:
``{u = alpha}`` is ``|u - alpha| <= eps_act`` and ``{y = gamma}`` is
``y >= gamma - eps_act``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .calculus import curvature_weight, eval_J, quadforms
from .grid import SpaceTimeGrid, lp_norm
from .optimizer import feasibility, project_control
from .pde_adjoint import MeasurePair, adjoint_residual, solve_adjoint
from .pde_forward import State, solve_state, state_residual
from .pde_sensitivity import solve_linearized, solve_linearized_batch
from .problem import ProblemSpec, admissible


class EmptySample(RuntimeError):
    pass


@dataclass(frozen=True)
class KktTolerances:
    state: float = 1e-8
    adjoint: float = 1e-8
    stationarity: float = 1e-8
    feasibility: float = 1e-6
    support: float = 1e-6  # relative to the total variation of mu
    eps_act: float = 1e-6


@dataclass
class KktReport:
    state_residual: float
    adjoint_residual: float
    stationarity: float
    feasibility: float
    support_violation: float
    sign_violation: float
    total_variation: float
    terminal_mass: float
    jordan_disjoint: bool | None = None
    slater_margin: float | None = None
    flags: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d


@dataclass
class _Bar:
    """State, adjoint and derived data at a candidate triplet."""

    u: np.ndarray
    mu: MeasurePair
    state: State
    phi: np.ndarray
    grad: np.ndarray


def _bar(spec, grid, triplet) -> _Bar:
    u = grid.check(triplet.u, "u")
    mu = triplet.mu.check(grid)
    state = solve_state(spec, grid, u)
    adj = solve_adjoint(spec, grid, state, mu)
    grad = adj.phi + spec.nu * u
    grad[0] = 0.0
    return _Bar(u, mu, state, adj.phi, grad)


def _inactive_mass(spec, y, mu: MeasurePair, eps: float) -> tuple[float, bool | None]:
    c = spec.constraint
    upper_act = y >= c.upper - eps
    if not spec.bilateral:
        off = ~upper_act
        return float(np.abs(mu.mass_Q[off]).sum() + np.abs(mu.mass_Omega[off[-1]]).sum()), None
    lower_act = y <= c.lower + eps
    pos, neg = mu.positive(), mu.negative()
    bad = (pos.mass_Q[~upper_act].sum() + pos.mass_Omega[~upper_act[-1]].sum()
           + neg.mass_Q[~lower_act].sum() + neg.mass_Omega[~lower_act[-1]].sum())
    disjoint = not np.any(upper_act[1:] & lower_act[1:])
    return float(bad), bool(disjoint)


@dataclass
class TripletData:
    """A plain triplet, e.g. read from files or known in closed form."""

    u: np.ndarray
    mu: MeasurePair
    y: np.ndarray | None = None
    phi: np.ndarray | None = None


@dataclass
class _Replaced:
    inner: object
    mu: MeasurePair

    def __getattr__(self, name):
        return getattr(self.inner, name)


def check_kkt(spec: ProblemSpec, grid: SpaceTimeGrid, triplet, tol: KktTolerances | None = None,
              u0=None) -> KktReport:
    tol = tol or KktTolerances()
    mu_in = triplet.mu.check(grid)
    sign = 0.0
    if not spec.bilateral:
        sign = float(np.maximum(-mu_in.mass_Q, 0).sum() + np.maximum(-mu_in.mass_Omega, 0).sum())
        if mu_in.signed:
            # residuals are evaluated with the admissible (positive) part
            triplet = _Replaced(triplet, mu_in.positive())
    bar = _bar(spec, grid, triplet)
    y_stored = getattr(triplet, "y", None)
    phi_stored = getattr(triplet, "phi", None)
    y_check = bar.state.y if y_stored is None else grid.check(y_stored, "y")
    phi_check = bar.phi if phi_stored is None else grid.check(phi_stored, "phi")
    s_res = state_residual(spec, grid, bar.u, y_check)
    a_res = adjoint_residual(spec, grid, bar.state, phi_check, bar.mu)
    stat = float(np.max(np.abs(bar.u[1:] - project_control(-bar.phi[1:] / spec.nu, spec.alpha, spec.beta)),
                        initial=0.0))
    feas = feasibility(spec, bar.state.y)
    support, disjoint = _inactive_mass(spec, bar.state.y, bar.mu, tol.eps_act)
    tv = bar.mu.total_variation
    report = KktReport(
        state_residual=s_res, adjoint_residual=a_res, stationarity=stat, feasibility=feas,
        support_violation=support, sign_violation=sign, total_variation=tv,
        terminal_mass=float(np.abs(bar.mu.mass_Omega).sum()), jordan_disjoint=disjoint,
    )
    if u0 is not None:
        report.slater_margin = check_slater(spec, grid, bar.u, u0, state=bar.state)
    report.flags = {
        "state": s_res <= tol.state,
        "adjoint": a_res <= tol.adjoint,
        "stationarity": stat <= tol.stationarity,
        "feasibility": feas <= tol.feasibility,
        "support": support <= tol.support * tv,
        "sign": sign == 0.0,
    }
    if disjoint is not None:
        report.flags["jordan"] = disjoint
    if report.slater_margin is not None:
        report.flags["slater"] = report.slater_margin > 0
    return report


def check_slater(spec: ProblemSpec, grid: SpaceTimeGrid, u_bar, u0, state: State | None = None) -> float:
    """Smallest margin of the linearised Slater condition over all nodes of Q-bar."""
    u_bar = grid.check(u_bar, "u_bar")
    u0 = grid.check(u0, "u0")
    state = state or solve_state(spec, grid, u_bar)
    z = solve_linearized(spec, grid, state, u0 - u_bar).z
    lin = state.y + z
    c = spec.constraint
    margin = float(np.min(c.upper - lin))
    if spec.bilateral:
        margin = min(margin, float(np.min(lin - c.lower)))
    return margin


# --- cones ------------------------------------------------------------------------


@dataclass
class ConeMembership:
    derivative_slack: float
    sign_slack: float
    state_slack: float
    measure_slack: float
    lower_state_slack: float
    member: bool
    tau: float
    p: float


class ConeContext:
    """Everything about a triplet that cone tests need, computed once."""

    def __init__(self, spec: ProblemSpec, grid: SpaceTimeGrid, triplet, eps_act: float = 1e-6,
                 grad_tol: float | None = None):
        self.spec, self.grid, self.eps_act = spec, grid, eps_act
        self.bar = _bar(spec, grid, triplet)
        u, y = self.bar.u, self.bar.state.y
        c = spec.constraint
        at_alpha = np.abs(u - spec.alpha) <= eps_act
        at_beta = np.abs(u - spec.beta) <= eps_act
        at_alpha[0] = at_beta[0] = False
        gscale = max(1.0, float(np.max(np.abs(self.bar.grad))))
        self.grad_tol = 1e-6 * gscale if grad_tol is None else grad_tol
        strong = np.abs(self.bar.grad) > self.grad_tol
        self.at_alpha, self.at_beta = at_alpha, at_beta
        self.strong = (at_alpha | at_beta) & strong
        self.upper_active = y >= c.upper - eps_act
        self.upper_active[0] = False
        self.lower_active = (y <= c.lower + eps_act) if spec.bilateral else np.zeros_like(self.upper_active)
        self.lower_active[0] = False
        self.abs_mu = self.bar.mu.abs()
        self._null = None

    def state_nullspace(self, chunk: int = 512):
        """Orthonormal rows spanning the directions with z_v != 0 on active state nodes.

        Returned as ``(free, Q)``: ``free`` is a flat mask of admissible
        control entries and ``Q`` has orthonormal rows over those entries.
        Subtracting ``Q.T @ (Q @ w)`` leaves z_v = 0 on the active set.
        """
        if self._null is not None:
            return self._null
        grid = self.grid
        free = np.ones(grid.shape, dtype=bool)
        free[0] = False
        free &= ~self.strong
        active = (self.upper_active | self.lower_active).ravel()
        cols = np.flatnonzero(free.ravel())
        rows = np.flatnonzero(active)
        if rows.size == 0 or cols.size == 0:
            self._null = (free.ravel(), np.zeros((0, cols.size)))
            return self._null
        S = np.empty((rows.size, cols.size))
        for start in range(0, cols.size, chunk):
            idx = cols[start:start + chunk]
            E = np.zeros((grid.shape[0] * grid.shape[1], idx.size))
            E[idx, np.arange(idx.size)] = 1.0
            Z = solve_linearized_batch(grid, self.bar.state, E.reshape(grid.shape + (idx.size,)))
            S[:, start:start + idx.size] = Z.reshape(-1, idx.size)[rows]
        _, sv, Vt = np.linalg.svd(S, full_matrices=False)
        keep = sv > 1e-12 * max(sv[0], 1e-300)
        self._null = (free.ravel(), Vt[keep])
        return self._null

    def project_state(self, V: np.ndarray) -> np.ndarray:
        """Remove the component of each direction (trailing axis) that moves z_v on active nodes."""
        free, Q = self.state_nullspace()
        flat = V.reshape(-1, V.shape[-1]).copy()
        flat[~free] = 0.0
        if Q.shape[0]:
            x = flat[free]
            flat[free] = x - Q.T @ (Q @ x)
        return flat.reshape(V.shape)

    def process(self, v: np.ndarray, zero_strong: bool = True) -> np.ndarray:
        """Enforce the control sign conditions by flipping.

        With ``zero_strong`` v is also zeroed where the gradient is strongly
        active, which is what membership in the tau = 0 cone requires there.
        """
        v = v.copy()
        v[0] = 0.0
        v[self.at_alpha] = np.abs(v[self.at_alpha])
        v[self.at_beta] = -np.abs(v[self.at_beta])
        if zero_strong:
            v[self.strong] = 0.0
        return v

    def slacks(self, V: np.ndarray, Z: np.ndarray, tau: float) -> dict:
        """Slack arrays for a batch of directions (trailing axis)."""
        spec, grid = self.spec, self.grid
        w = grid.weights[..., None]
        p = spec.exponent
        norms = np.sum(w[1:] * np.abs(V[1:]) ** p, axis=(0, 1)) ** (1.0 / p)
        deriv = tau * norms - np.sum(w * self.bar.grad[..., None] * V, axis=(0, 1))
        big = np.inf
        lo_a = np.where(self.at_alpha[..., None], V, big).min(axis=(0, 1))
        lo_b = np.where(self.at_beta[..., None], -V, big).min(axis=(0, 1))
        sign = np.minimum(lo_a, lo_b)
        zmax = np.where(self.upper_active[..., None], Z, -big).max(axis=(0, 1))
        state = tau * norms - zmax
        if spec.bilateral:
            zmin = np.where(self.lower_active[..., None], Z, big).min(axis=(0, 1))
            lower = zmin + tau * norms
            paired = (np.sum(Z.__abs__() * self.abs_mu.mass_Q[..., None], axis=(0, 1))
                      + np.abs(Z[-1]).T @ self.abs_mu.mass_Omega)
            measure = tau * norms - paired
        else:
            lower = np.full(V.shape[-1], big)
            paired = np.sum(Z * self.bar.mu.mass_Q[..., None], axis=(0, 1)) + Z[-1].T @ self.bar.mu.mass_Omega
            measure = paired + tau * norms
        return {"derivative": deriv, "sign": sign, "state": state, "lower": lower, "measure": measure,
                "norms": norms}


def _members(sl: dict, atol: float) -> np.ndarray:
    return ((sl["derivative"] >= -atol) & (sl["sign"] >= -atol) & (sl["state"] >= -atol)
            & (sl["lower"] >= -atol) & (sl["measure"] >= -atol))


def cone_membership(spec: ProblemSpec, grid: SpaceTimeGrid, triplet, v, tau: float,
                    eps_act: float = 1e-6, atol: float = 0.0, context: ConeContext | None = None) -> ConeMembership:
    ctx = context or ConeContext(spec, grid, triplet, eps_act)
    v = grid.check(v, "v")
    z = solve_linearized(spec, grid, ctx.bar.state, v).z
    sl = ctx.slacks(v[..., None], z[..., None], tau)
    vals = {k: float(a[0]) for k, a in sl.items()}
    return ConeMembership(
        derivative_slack=vals["derivative"], sign_slack=vals["sign"], state_slack=vals["state"],
        measure_slack=vals["measure"], lower_state_slack=vals["lower"],
        member=bool(_members(sl, atol)[0]), tau=tau, p=spec.exponent,
    )


def jacobi_smooth(grid: SpaceTimeGrid, V: np.ndarray, omega: float = 2.0 / 3.0) -> np.ndarray:
    """One weighted-Jacobi pass of the spatial Laplacian, applied per level (batch on last axis)."""
    space = grid.space
    shape = (V.shape[0],) + space.interior_shape + V.shape[2:]
    X = V.reshape(shape)
    pad = [(0, 0)] + [(1, 1)] * space.n + [(0, 0)] * (V.ndim - 2)
    P = np.pad(X, pad)
    nb = np.zeros_like(X)
    for ax in range(space.n):
        sl_lo = [slice(None)] + [slice(1, -1)] * space.n + [slice(None)] * (V.ndim - 2)
        sl_hi = list(sl_lo)
        sl_lo[1 + ax] = slice(0, -2)
        sl_hi[1 + ax] = slice(2, None)
        nb += P[tuple(sl_lo)] + P[tuple(sl_hi)]
    deg = 2 * space.n
    X = (1 - omega) * X + omega * nb / deg
    return X.reshape(V.shape)


def probe_directions(grid: SpaceTimeGrid) -> np.ndarray:
    """Deterministic probes: constants, space-time checkerboards, single-node impulses."""
    nt, m = grid.time.nt, grid.space.m
    idx = np.indices(grid.space.interior_shape).reshape(grid.space.n, -1).sum(axis=0)
    k = np.arange(nt + 1)[:, None]
    checker = (-1.0) ** (idx[None, :] + k)
    spatial_checker = np.broadcast_to((-1.0) ** idx, (nt + 1, m))
    probes = [np.ones((nt + 1, m)), -np.ones((nt + 1, m)), checker, -checker, spatial_checker]
    for kk, ii in [(nt // 2 or 1, m // 2), (nt, m // 2), (1, 0)]:
        e = np.zeros((nt + 1, m))
        e[kk, ii] = 1.0
        probes += [e, -e]
    P = np.stack(probes, axis=-1)
    P[0] = 0.0
    return P


@dataclass
class ConeSample:
    directions: np.ndarray  # (nt+1, m, n) accepted directions, unit L^p norm
    ids: list
    attempts: int
    rejected: int
    tau: float

    @property
    def acceptance_rate(self) -> float:
        return (len(self.ids) / self.attempts) if self.attempts else 0.0


def sample_cone(spec: ProblemSpec, grid: SpaceTimeGrid, triplet, tau: float, n: int, seed: int = 0,
                eps_act: float = 1e-6, atol: float | None = None, probes: bool = True,
                context: ConeContext | None = None, batch: int = 64, project: bool = True) -> ConeSample:
    """Random and deterministic directions filtered by membership in C^tau.

    With ``project`` every other random candidate is first projected so that
    z_v vanishes on the active state set; without it, sampling a cone with a
    large active set almost never succeeds.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    ctx = context or ConeContext(spec, grid, triplet, eps_act)
    atol = (1e-12 if tau == 0 else 0.0) if atol is None else atol
    rng = np.random.default_rng(seed)
    p = spec.exponent
    accepted, ids = [], []
    attempts = rejected = 0
    pending = probe_directions(grid) if probes else np.zeros(grid.shape + (0,))
    next_id = 0
    while len(ids) < n:
        if attempts >= 100 * n:
            raise EmptySample(f"only {len(ids)} of {n} cone directions after {attempts} attempts (tau={tau})")
        if pending.shape[-1] == 0:
            raw = jacobi_smooth(grid, rng.standard_normal(grid.shape + (batch,)))
            if project:
                # alternate plain and state-projected candidates
                raw[..., 1::2] = ctx.project_state(raw[..., 1::2])
            pending = raw
        cand = pending[..., :batch]
        pending = pending[..., batch:]
        # for tau > 0 every third candidate keeps its values on strongly active nodes
        zero = [tau == 0 or (next_id + r) % 3 != 2 for r in range(cand.shape[-1])]
        V = np.stack([ctx.process(cand[..., r], zero[r]) for r in range(cand.shape[-1])], axis=-1)
        V = np.concatenate([V, np.stack([ctx.process(-V[..., r], zero[r]) for r in range(V.shape[-1])],
                                        axis=-1)], axis=-1)
        norms = np.sum(grid.weights[1:, :, None] * np.abs(V[1:]) ** p, axis=(0, 1)) ** (1.0 / p)
        nz = norms > 0
        V[..., nz] /= norms[nz]
        Z = solve_linearized_batch(grid, ctx.bar.state, V)
        ok = _members(ctx.slacks(V, Z, tau), atol) & nz
        half = cand.shape[-1]
        for r in range(half):
            attempts += 1
            pick = r if ok[r] else (half + r if ok[half + r] else None)
            if pick is None:
                rejected += 1
                next_id += 1
                continue
            accepted.append(V[..., pick])
            ids.append(next_id)
            next_id += 1
            if len(ids) == n:
                break
    return ConeSample(np.stack(accepted, axis=-1), ids, attempts, rejected, tau)


@dataclass
class SscReport:
    samples: list  # (direction id, quadform value, ||v||^2_L2, ratio)
    min_ratio: float
    tau: float
    n_samples: int
    rejected_directions: int
    acceptance_rate: float
    nu: float
    p: float
    nu_limit_diagnostic: float
    curvature_max: float
    ssc_supported: bool
    eps_act: float

    def to_dict(self) -> dict:
        return asdict(self)


def nu_limit_probe(grid: SpaceTimeGrid) -> np.ndarray:
    """Highest-frequency space-time checkerboard: ||z_v|| << ||v|| on fine grids."""
    return probe_directions(grid)[..., 2]


def check_ssc(spec: ProblemSpec, grid: SpaceTimeGrid, triplet, tau: float = 1e-3, n: int = 200,
              seed: int = 0, eps_act: float = 1e-6, context: ConeContext | None = None) -> SscReport:
    """Minimum of the Lagrangian quadratic form over sampled C^tau directions, per ||v||_2^2."""
    ctx = context or ConeContext(spec, grid, triplet, eps_act)
    sample = sample_cone(spec, grid, triplet, tau, n, seed, eps_act, context=ctx)
    V = sample.directions
    q = quadforms(spec, grid, ctx.bar.state, ctx.bar.phi, V)
    l2 = np.sum(grid.weights[..., None] * V * V, axis=(0, 1))
    ratios = q / l2
    curv = np.abs(ratios - spec.nu)
    probe = nu_limit_probe(grid)[..., None]
    q_probe = quadforms(spec, grid, ctx.bar.state, ctx.bar.phi, probe)[0]
    nu_ratio = float(q_probe / np.sum(grid.weights * probe[..., 0] ** 2))
    samples = [(int(i), float(a), float(b), float(c)) for i, a, b, c in zip(sample.ids, q, l2, ratios)]
    min_ratio = float(ratios.min())
    return SscReport(
        samples=samples, min_ratio=min_ratio, tau=tau, n_samples=len(samples),
        rejected_directions=sample.rejected, acceptance_rate=sample.acceptance_rate, nu=spec.nu,
        p=spec.exponent, nu_limit_diagnostic=nu_ratio, curvature_max=float(curv.max()),
        ssc_supported=min_ratio > 0, eps_act=eps_act,
    )


def tau_sweep(spec: ProblemSpec, grid: SpaceTimeGrid, triplet, taus=(1e-1, 1e-2, 1e-3, 0.0), n: int = 50,
              seed: int = 0, eps_act: float = 1e-6) -> dict:
    """min_ratio of check_ssc for each tau (EmptySample recorded as None)."""
    ctx = ConeContext(spec, grid, triplet, eps_act)
    out = {}
    for tau in taus:
        try:
            out[tau] = check_ssc(spec, grid, triplet, tau, n, seed, eps_act, context=ctx).min_ratio
        except EmptySample:
            out[tau] = None
    return out


def quadratic_growth_probe(spec: ProblemSpec, grid: SpaceTimeGrid, triplet, radii=(1e-2, 1e-3),
                           n_per_radius: int = 20, seed: int = 0, feas_tol: float = 1e-6) -> dict:
    """min over admissible perturbations of 2 (J(u) - J(u_bar)) / ||u - u_bar||^2."""
    rng = np.random.default_rng(seed)
    u_bar = grid.check(triplet.u, "u")
    J_bar = eval_J(spec, grid, u_bar)
    probes = probe_directions(grid)
    per_radius = []
    kappa = math.inf
    tried = found = 0
    for r in radii:
        best = math.inf
        count = 0
        cands = [probes[..., i] for i in range(probes.shape[-1])]
        raw = jacobi_smooth(grid, rng.standard_normal(grid.shape + (n_per_radius,)))
        for i in range(n_per_radius):
            cands += [raw[..., i], -raw[..., i], -np.abs(raw[..., i])]
        for d in cands:
            d = d.copy()
            d[0] = 0.0
            nd = lp_norm(grid, d, 2)
            if nd == 0:
                continue
            u = project_control(u_bar + (r / nd) * d, spec.alpha, spec.beta)
            dist = lp_norm(grid, u - u_bar, 2)
            tried += 1
            if dist == 0:
                continue
            st = solve_state(spec, grid, u)
            if not admissible(spec, grid, u, st.y, feas_tol):
                continue
            found += 1
            count += 1
            ratio = 2.0 * (eval_J(spec, grid, u, st) - J_bar) / dist**2
            best = min(best, ratio)
        per_radius.append({"radius": r, "feasible": count, "min_ratio": best if count else None})
        if count:
            kappa = min(kappa, best)
    if not found:
        return {"radii": list(radii), "per_radius": per_radius, "kappa": None, "growth": None,
                "message": "no feasible perturbations found", "tried": tried}
    return {"radii": list(radii), "per_radius": per_radius, "kappa": kappa, "growth": kappa >= 0,
            "tried": tried, "feasible": found, "nu": spec.nu}
