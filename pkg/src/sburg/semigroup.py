"""Damped heat semigroup S_k(t) and the convolution operators built from it.

Everything is diagonal in the Dirichlet sine basis: S_k(t) multiplies the
j-th coefficient by exp(-(lambda_j + k) t).  The integral operators use
left-endpoint quadrature on a uniform partition, which matches the Ito
(non-anticipating) convention of the mild-solution formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import Field, Grid
from .noise import NoisePath
from .spectral import derivative_values, eigenvalues, from_coeffs, to_coeffs


@dataclass(frozen=True)
class HeatOperator:
    """exp(t(Laplacian - k)) on the grid's sine modes."""

    grid: Grid
    k: float = 0.0

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        lam = eigenvalues(self.grid)
        lam.flags.writeable = False
        return lam

    def multipliers(self, t) -> np.ndarray:
        """m_j(t) = exp(-(lambda_j + k) t); t may be an array (broadcast)."""
        t = np.asarray(t, dtype=float)
        return np.exp(-np.multiply.outer(t, self.eigenvalues + self.k))


def heat_apply(op: HeatOperator, f: Field, t: float) -> Field:
    if t < 0:
        raise ValueError("heat semigroup needs t >= 0")
    if f.grid != op.grid:
        raise ValueError("field grid does not match operator grid")
    if t == 0.0:
        return f.copy()
    c = to_coeffs(f.values, op.grid) * op.multipliers(t)
    return Field(from_coeffs(c, op.grid), op.grid)


def kernel_values(grid: Grid, t: float) -> np.ndarray:
    """Explicit heat kernel G(t, x) = (4 pi t)^{-1/2} exp(-x^2 / 4t) at the nodes."""
    x = grid.nodes
    return np.exp(-x * x / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


def kernel_checks(grid: Grid, t: float) -> tuple[float, float]:
    """Discrete (integral G, integral G^2); targets are 1 and (8 pi t)^{-1/2}."""
    if t <= 0:
        raise ValueError("kernel checks need t > 0")
    if 4.0 * math.sqrt(t) > grid.half_width:
        raise ValueError(
            f"t={t} too large: kernel support 4*sqrt(t) exceeds the domain half width"
        )
    g = kernel_values(grid, t)
    mass = float(g.sum() * grid.dx)
    l2sq = float((g * g).sum() * grid.dx)
    return mass, l2sq


@dataclass
class FieldPath:
    """Fields on a uniform partition 0 = t_0 < ... < t_M."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray  # (M+1, n)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.size, self.grid.n):
            raise ValueError("path values do not match partition length / grid size")
        if self.times.size < 2:
            raise ValueError("path needs at least two time levels")
        dts = np.diff(self.times)
        if not np.allclose(dts, dts[0], rtol=1e-10, atol=1e-14):
            raise ValueError("path partition must be uniform")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def index_of(self, t: float) -> int:
        m = round((t - self.times[0]) / self.dt)
        if not math.isclose(self.times[0] + m * self.dt, t, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"t={t} is not on the path partition")
        if not 0 <= m < self.times.size:
            raise ValueError(f"t={t} outside the path horizon")
        return int(m)


def _accumulated_coeffs(path_values: np.ndarray, weights: np.ndarray, grid: Grid) -> np.ndarray:
    c = to_coeffs(path_values, grid)
    return (c * weights).sum(axis=0)


def j1_apply(v: FieldPath, op: HeatOperator, t: float) -> Field:
    """Left-endpoint quadrature of int_0^t S(t-s) v(s) ds."""
    if v.grid != op.grid:
        raise ValueError("path grid does not match operator grid")
    m = v.index_of(t)
    if m == 0:
        return Field(np.zeros(v.grid.n), v.grid)
    w = op.multipliers(t - v.times[:m]) * v.dt
    acc = _accumulated_coeffs(v.values[:m], w, v.grid)
    return Field(from_coeffs(acc, v.grid), v.grid)


def j2_apply(w: FieldPath, op: HeatOperator, t: float) -> Field:
    """Left-endpoint quadrature of int_0^t (d/dy G)(t-s) * w(s) ds.

    The kernel derivative in its second argument equals minus the spatial
    derivative of the smoothed field, applied here exactly on the sine modes.
    Left endpoints keep the quadrature away from the s = t singularity.
    """
    if w.grid != op.grid:
        raise ValueError("path grid does not match operator grid")
    m = w.index_of(t)
    if m == 0:
        return Field(np.zeros(w.grid.n), w.grid)
    wt = op.multipliers(t - w.times[:m]) * w.dt
    acc = _accumulated_coeffs(w.values[:m], wt, w.grid)
    return Field(-derivative_values(acc, w.grid), w.grid)


def stoch_conv(phi: FieldPath, noise: NoisePath, op: HeatOperator, t: float) -> Field:
    """Ito sum  sum_m S(t - s_m) [phi(s_m) * dW_m]  over s_m < t."""
    if phi.grid != op.grid:
        raise ValueError("path grid does not match operator grid")
    if noise.times.size != phi.times.size or not np.allclose(noise.times, phi.times):
        raise ValueError("noise path and field path partitions differ")
    m = phi.index_of(t)
    if m == 0:
        return Field(np.zeros(phi.grid.n), phi.grid)
    terms = phi.values[:m] * noise.increment_fields()[:m]
    wt = op.multipliers(t - phi.times[:m])
    acc = _accumulated_coeffs(terms, wt, phi.grid)
    return Field(from_coeffs(acc, phi.grid), phi.grid)
