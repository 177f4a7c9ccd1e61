"""Uniform tensor grids on Q = Omega x (0, T) and nodal quadrature.

Fields live on interior spatial nodes only (homogeneous Dirichlet values are
implicit zeros) and are stored as arrays of shape ``(nt + 1, m)``: row ``k`` is
time level ``t_k`` and column ``i`` is interior node ``i``.

Quadrature weights every interior node by the cell volume ``prod(h)`` and
every time level ``k >= 1`` by ``dt``.  Level 0 carries zero weight: under
backward Euler the value at level ``k`` acts on the interval
``(t_{k-1}, t_k]``, so level 0 only ever holds the initial state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GridMismatch(ValueError):
    """A field does not have the shape of the grid it is used with."""


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid on the box ``prod_i (0, lengths[i])`` including boundary nodes."""

    nodes: tuple[int, ...]
    lengths: tuple[float, ...] | None = None

    def __post_init__(self):
        nodes = tuple(int(k) for k in np.atleast_1d(self.nodes))
        if not 1 <= len(nodes) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(nodes)}")
        if min(nodes) < 3:
            raise ValueError(f"need at least 3 nodes per axis, got {nodes}")
        lengths = (1.0,) * len(nodes) if self.lengths is None else tuple(float(x) for x in self.lengths)
        if len(lengths) != len(nodes) or min(lengths) <= 0:
            raise ValueError(f"bad axis lengths {lengths} for nodes {nodes}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "lengths", lengths)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def h(self) -> np.ndarray:
        return np.array([L / (N - 1) for L, N in zip(self.lengths, self.nodes)])

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return tuple(N - 2 for N in self.nodes)

    @property
    def m(self) -> int:
        """Number of unknowns (interior nodes)."""
        return int(np.prod(self.interior_shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @cached_property
    def coords(self) -> np.ndarray:
        """Interior node coordinates, shape ``(m, n)``, C-ordered over axes."""
        axes = [h * np.arange(1, N - 1) for h, N in zip(self.h, self.nodes)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([c.ravel() for c in mesh], axis=1)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """Boolean array over the full node lattice, True on the boundary."""
        mask = np.zeros(self.nodes, dtype=bool)
        for ax in range(self.n):
            idx = [slice(None)] * self.n
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        return mask

    def interior_index(self) -> np.ndarray:
        """Map from full-lattice node to interior unknown index (-1 on the boundary)."""
        index = -np.ones(self.nodes, dtype=int)
        index[~self.boundary_mask] = np.arange(self.m)
        return index

    def to_full(self, values: np.ndarray) -> np.ndarray:
        """Embed interior values into the full lattice with zero boundary."""
        full = np.zeros(self.nodes)
        full[tuple(slice(1, -1) for _ in range(self.n))] = np.reshape(values, self.interior_shape)
        return full


@dataclass(frozen=True)
class TimeGrid:
    T: float
    nt: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got {self.T}")
        if int(self.nt) < 1:
            raise ValueError(f"need at least one time step, got {self.nt}")
        object.__setattr__(self, "nt", int(self.nt))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @cached_property
    def times(self) -> np.ndarray:
        t = self.dt * np.arange(self.nt + 1)
        t[-1] = self.T
        return t


@dataclass(frozen=True)
class SpaceTimeGrid:
    space: SpatialGrid
    time: TimeGrid
    _weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.full(self.shape, self.space.cell_volume * self.time.dt)
        w[0] = 0.0
        w.setflags(write=False)
        object.__setattr__(self, "_weights", w)

    @classmethod
    def uniform(cls, nodes, nt: int, T: float = 1.0, lengths=None) -> "SpaceTimeGrid":
        return cls(SpatialGrid(tuple(np.atleast_1d(nodes)), lengths), TimeGrid(T, nt))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.time.nt + 1, self.space.m)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights over Q, same shape as a grid function."""
        return self._weights

    @property
    def measure(self) -> float:
        """Discrete volume of Q, ``sum(weights)``."""
        return float(self._weights.sum())

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def check(self, f, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridMismatch(f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f

    def check_spatial(self, f, name: str = "spatial field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.space.m,):
            raise GridMismatch(f"{name} has shape {f.shape}, grid expects {(self.space.m,)}")
        return f

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(x, t)`` at every node (x has shape ``(m, n)``)."""
        out = np.empty(self.shape)
        for k, t in enumerate(self.time.times):
            out[k] = np.broadcast_to(func(self.space.coords, t), (self.space.m,))
        return out

    def refine(self, space: bool = True, time: bool = True) -> "SpaceTimeGrid":
        nodes = tuple(2 * N - 1 for N in self.space.nodes) if space else self.space.nodes
        nt = 2 * self.time.nt if time else self.time.nt
        return SpaceTimeGrid(SpatialGrid(nodes, self.space.lengths), TimeGrid(self.time.T, nt))


def lp_norm(grid: SpaceTimeGrid, f, p: float = 2.0) -> float:
    """Discrete L^p(Q) norm; ``p = inf`` gives the max over levels ``k >= 1``."""
    f = grid.check(f)
    if p < 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    a = np.abs(f[1:])
    top = float(a.max(initial=0.0))
    if np.isinf(p) or top == 0.0:
        return top
    # scale by the max so powers neither underflow nor overflow
    a = a / top
    if p == 2:
        return top * float(np.sqrt(np.sum(grid.weights[1:] * a * a)))
    return top * float(np.sum(grid.weights[1:] * a**p) ** (1.0 / p))


def inner_product_Q(grid: SpaceTimeGrid, f, g) -> float:
    """Discrete L^2(Q) pairing with the nodal quadrature weights."""
    f = grid.check(f, "f")
    g = grid.check(g, "g")
    return float(np.sum(grid.weights * f * g))


def spatial_lp_norm(grid: SpaceTimeGrid, f, p: float = 2.0) -> float:
    f = np.abs(grid.check_spatial(f))
    if np.isinf(p):
        return float(f.max(initial=0.0))
    return float((grid.space.cell_volume * np.sum(f**p)) ** (1.0 / p))


def _prolong_spatial(space: SpatialGrid, values: np.ndarray) -> np.ndarray:
    """Multilinear interpolation onto the grid with every axis halved."""
    full = space.to_full(values)
    for ax in range(space.n):
        full = np.moveaxis(full, ax, 0)
        out = np.empty((2 * full.shape[0] - 1,) + full.shape[1:])
        out[0::2] = full
        out[1::2] = 0.5 * (full[:-1] + full[1:])
        full = np.moveaxis(out, 0, ax)
    return full[tuple(slice(1, -1) for _ in range(space.n))].ravel()


def prolong(coarse: SpaceTimeGrid, fine: SpaceTimeGrid, f) -> np.ndarray:
    """Transfer a grid function to a nested refinement.

    Space uses multilinear interpolation when the spatial grid was refined;
    time is piecewise constant on the coarse intervals (fine level j reads
    coarse level ceil(j / ratio)).
    """
    f = coarse.check(f)
    if fine.space.nodes == coarse.space.nodes:
        spatial = f
    elif fine.space.nodes == tuple(2 * N - 1 for N in coarse.space.nodes):
        spatial = np.stack([_prolong_spatial(coarse.space, row) for row in f])
    else:
        raise GridMismatch(f"spatial grids {coarse.space.nodes} -> {fine.space.nodes} are not nested")
    ratio, rem = divmod(fine.time.nt, coarse.time.nt)
    if rem or ratio < 1:
        raise GridMismatch(f"time grids {coarse.time.nt} -> {fine.time.nt} are not nested")
    levels = np.concatenate([[0], (np.arange(1, fine.time.nt + 1) + ratio - 1) // ratio])
    return spatial[levels]


def restrict(fine: SpaceTimeGrid, coarse: SpaceTimeGrid, f) -> np.ndarray:
    """Injection of a fine grid function onto the nodes of a nested coarse grid."""
    f = fine.check(f)
    ratio, rem = divmod(fine.time.nt, coarse.time.nt)
    sratio = [(Nf - 1) // (Nc - 1) for Nf, Nc in zip(fine.space.nodes, coarse.space.nodes)]
    if rem or any((Nf - 1) % (Nc - 1) for Nf, Nc in zip(fine.space.nodes, coarse.space.nodes)):
        raise GridMismatch("grids are not nested")
    out = np.empty(coarse.shape)
    for k in range(coarse.time.nt + 1):
        full = fine.space.to_full(f[ratio * k])
        sub = full[tuple(slice(None, None, r) for r in sratio)]
        out[k] = sub[tuple(slice(1, -1) for _ in range(coarse.space.n))].ravel()
    return out
