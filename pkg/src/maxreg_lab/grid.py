"""Uniform grids on [0, 1], grid functions, time signals and their norms.

Space is discretized by the nodes ``s_j = j/n`` and time by ``t_k = k T/m``.
All norms use the composite trapezoid rule, which is second order for smooth
integrands.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

MIN_CELLS = 8


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` cells on the unit interval."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < MIN_CELLS:
            raise ValueError(f"grid too coarse: n={self.n} (need n >= {MIN_CELLS})")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def size(self) -> int:
        return self.n + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        s = np.arange(self.n + 1) / self.n
        s.setflags(write=False)
        return s

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights (sum to one)."""
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.setflags(write=False)
        return w

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return GridFunction(self, np.broadcast_to(func(self.nodes), (self.size,)))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.size))


def make_grid(n: int) -> Grid:
    if float(n) != int(n):
        raise ValueError(f"number of cells must be an integer, got {n}")
    return Grid(int(n))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex nodal values on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} nodal values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function has non-finite entries")
        object.__setattr__(self, "values", vals)

    def _check(self, other: "GridFunction"):
        if other.grid != self.grid:
            raise ValueError("grid functions live on different grids")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c) -> "GridFunction":
        return GridFunction(self.grid, complex(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t_k = k T / m`` on ``[0, T]``."""

    T: float
    m: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got T={self.T}")
        if int(self.m) != self.m or self.m < 8:
            raise ValueError(f"time grid too coarse: m={self.m} (need m >= 8)")

    @property
    def dt(self) -> float:
        return self.T / self.m

    @cached_property
    def times(self) -> np.ndarray:
        t = self.T * np.arange(self.m + 1) / self.m
        t.setflags(write=False)
        return t

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.m + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        w.setflags(write=False)
        return w


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Grid functions sampled at every node of a :class:`TimeGrid`.

    ``values[k]`` holds the nodal values at ``t_k``.
    """

    timegrid: TimeGrid
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        expected = (self.timegrid.m + 1, self.grid.size)
        if vals.shape != expected:
            raise ValueError(f"expected frames of shape {expected}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("time signal has non-finite entries")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, timegrid: TimeGrid, grid: Grid, func) -> "TimeSignal":
        """Sample ``func(t, s)`` (vectorized over both arguments)."""
        t = timegrid.times[:, None]
        s = grid.nodes[None, :]
        vals = np.broadcast_to(func(t, s), (timegrid.m + 1, grid.size))
        return cls(timegrid, grid, vals)

    @classmethod
    def constant(cls, timegrid: TimeGrid, g: GridFunction) -> "TimeSignal":
        return cls(timegrid, g.grid, np.tile(g.values, (timegrid.m + 1, 1)))

    @classmethod
    def zeros(cls, timegrid: TimeGrid, grid: Grid) -> "TimeSignal":
        return cls(timegrid, grid, np.zeros((timegrid.m + 1, grid.size)))

    @property
    def frames(self) -> list[GridFunction]:
        return [GridFunction(self.grid, v) for v in self.values]

    def frame(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.values[k])

    def __add__(self, other: "TimeSignal") -> "TimeSignal":
        return TimeSignal(self.timegrid, self.grid, self.values + other.values)

    def __sub__(self, other: "TimeSignal") -> "TimeSignal":
        return TimeSignal(self.timegrid, self.grid, self.values - other.values)

    def __mul__(self, c) -> "TimeSignal":
        return TimeSignal(self.timegrid, self.grid, complex(c) * self.values)

    __rmul__ = __mul__


def _check_p(p: float) -> float:
    p = float(p)
    if np.isnan(p) or p < 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return p


def weighted_lp(values: np.ndarray, weights: np.ndarray, p: float, axis: int = -1) -> np.ndarray:
    """``(sum_j w_j |v_j|^p)^(1/p)`` along ``axis``; max-abs when ``p`` is infinite."""
    p = _check_p(p)
    a = np.abs(values)
    if np.isinf(p):
        return a.max(axis=axis)
    return np.sum(weights * a**p, axis=axis) ** (1.0 / p)


def lp_norm(g: GridFunction, p: float = 2.0) -> float:
    return float(weighted_lp(g.values, g.grid.weights, p))


def bochner_norm(sig: TimeSignal, p: float = 2.0) -> float:
    """L^p([0,T]; L^p(0,1)) norm, trapezoid in space and in time."""
    p = _check_p(p)
    spatial = weighted_lp(sig.values, sig.grid.weights, p, axis=1)
    return float(weighted_lp(spatial, sig.timegrid.weights, p))


def time_derivative(sig: TimeSignal) -> TimeSignal:
    """Second-order finite differences in time (one-sided at both ends)."""
    z = sig.values
    dt = sig.timegrid.dt
    d = np.empty_like(z)
    d[1:-1] = (z[2:] - z[:-2]) / (2 * dt)
    d[0] = (-3 * z[0] + 4 * z[1] - z[2]) / (2 * dt)
    d[-1] = (3 * z[-1] - 4 * z[-2] + z[-3]) / (2 * dt)
    return TimeSignal(sig.timegrid, sig.grid, d)
