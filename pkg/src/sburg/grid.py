"""Uniform Dirichlet grid on [-L, L] and the norms/functionals built on it.

A :class:`Field` holds the interior nodal values of a function that vanishes
at the two boundary nodes x = -L and x = +L.  All quadrature is the rectangle
rule with weight dx, which makes the discrete sine basis exactly orthonormal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform mesh of n interior points on [-L, L], spacing dx = 2L/(n+1)."""

    half_width: float
    n: int

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / (self.n + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        x = -self.half_width + self.dx * np.arange(1, self.n + 1)
        x.flags.writeable = False
        return x

    def __post_init__(self):
        if self.half_width < 1.0:
            raise ValueError(
                f"half width L={self.half_width} < 1: the sine basis sup-norm "
                "bound needs L >= 1"
            )
        if self.n < 3:
            raise ValueError(f"need at least 3 interior points, got n={self.n}")


def make_grid(L: float, n: int) -> Grid:
    return Grid(half_width=float(L), n=int(n))


@dataclass
class Field:
    """Interior nodal values of u on a grid; u == 0 at the implicit boundary."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"field shape {self.values.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite entries")

    def copy(self) -> "Field":
        return Field(self.values.copy(), self.grid)

    def same_grid(self, other: "Field") -> None:
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")


def zero_field(grid: Grid) -> Field:
    return Field(np.zeros(grid.n), grid)


def lp_norm(f: Field, p: float) -> float:
    """(sum |f_i|^p dx)^(1/p), rectangle rule with zero boundary values."""
    if p < 1:
        raise ValueError(f"p={p} < 1 is not a norm exponent")
    a = np.abs(f.values)
    return float((a**p).sum() * f.grid.dx) ** (1.0 / p)


def l2_norm_sq(values: np.ndarray, dx: float) -> np.ndarray:
    """Batched squared L2 norm along the last axis."""
    return (values * values).sum(axis=-1) * dx


def diff_values(values: np.ndarray, dx: float) -> np.ndarray:
    """Centered difference along the last axis with implicit zero boundaries."""
    d = np.empty_like(values)
    d[..., 1:-1] = values[..., 2:] - values[..., :-2]
    d[..., 0] = values[..., 1]
    d[..., -1] = -values[..., -2]
    d /= 2.0 * dx
    return d


def h1_seminorm(f: Field) -> float:
    """L2 norm of the centered-difference derivative (zero boundary values)."""
    d = diff_values(f.values, f.grid.dx)
    return float(np.sqrt((d * d).sum() * f.grid.dx))


def h1_seminorm_sq_values(values: np.ndarray, dx: float) -> np.ndarray:
    d = diff_values(values, dx)
    return (d * d).sum(axis=-1) * dx


def tail_mass(f: Field, N: float) -> float:
    """sum_{|x_i| >= N} f_i^2 dx; zero once N reaches the domain edge."""
    if N < 0:
        raise ValueError("tail radius must be nonnegative")
    return float(tail_mass_values(f.values, f.grid, N))


def tail_mass_values(values: np.ndarray, grid: Grid, N: float) -> np.ndarray:
    mask = np.abs(grid.nodes) >= N
    v = values[..., mask]
    return (v * v).sum(axis=-1) * grid.dx


def smoothstep_quintic(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 + t * (-15.0 + 6.0 * t))


#: sup |theta'| of the quintic transition: 2 * (15/8).
CUTOFF_SLOPE_BOUND = 3.75


def cutoff_theta(m: float, grid: Grid) -> Field:
    """theta_m(x) = theta(x/m): 0 on |x| <= m/2, 1 on |x| >= m, quintic between."""
    if m <= 0:
        raise ValueError("cutoff scale m must be positive")
    s = np.abs(grid.nodes) / m
    return Field(smoothstep_quintic(2.0 * s - 1.0), grid)
