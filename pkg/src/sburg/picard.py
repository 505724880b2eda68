"""Truncated fixed-point construction on a short horizon.

The composite map A u = A1 + A2 u + A3 u + A4 u discretizes the truncated
mild-solution equation term by term:

    A1 = heat flow of u0          (undamped kernel)
    A2 = -k * J1(pi_N u)
    A3 = (1/2) * J2((pi_N u)^2)
    A4 = stochastic convolution of sigma(pi_N u) against the frozen noise path

All four pieces are evaluated along the whole partition with one-step
coefficient recursions, so a full sweep costs O(steps) transforms.
Contraction is measured empirically in the exponentially weighted norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid
from .integrator import SimConfig
from .noise import NoisePath
from .semigroup import FieldPath, HeatOperator
from .spectral import derivative_values, eigenvalues, from_coeffs, to_coeffs


@dataclass
class PathFunction(FieldPath):
    """A candidate solution path together with its (frozen) noise path."""

    noise: NoisePath = None

    def __post_init__(self):
        super().__post_init__()
        if self.noise is None:
            raise ValueError("a PathFunction needs its noise path")
        if self.noise.times.size != self.times.size or not np.allclose(
            self.noise.times, self.times
        ):
            raise ValueError("noise partition does not match the field partition")


def pi_n(f: Field, N: float, p: float) -> Field:
    """Radial projection onto the L^p ball of radius N."""
    if N <= 0:
        raise ValueError("truncation radius N must be positive")
    from .grid import lp_norm

    nrm = lp_norm(f, p)
    if nrm <= N:
        return f.copy()
    return Field(f.values * (N / nrm), f.grid)


def _pi_n_values(values: np.ndarray, N: float, p: float, dx: float) -> np.ndarray:
    nrm = (np.abs(values) ** p).sum() * dx
    nrm = nrm ** (1.0 / p)
    if nrm <= N:
        return values
    return values * (N / nrm)


def apply_A(u: PathFunction, cfg: SimConfig, N: float) -> PathFunction:
    """One sweep of the truncated mild-equation map along u's partition."""
    grid = u.grid
    ds = u.dt
    lam = eigenvalues(grid)
    decay = np.exp(-lam * ds)  # undamped kernel; damping enters through A2
    u0c = to_coeffs(u.values[0], grid)
    dw = u.noise.increment_fields()

    a1 = u0c.copy()
    a2 = np.zeros(grid.n)
    a3 = np.zeros(grid.n)
    a4 = np.zeros(grid.n)
    out = np.empty_like(u.values)
    out[0] = u.values[0]
    for m in range(u.times.size - 1):
        w = _pi_n_values(u.values[m], N, cfg.p, grid.dx)
        rows = np.stack([w, w * w, cfg.sigma.apply(w) * dw[m]])
        cw, cw2, cs = to_coeffs(rows, grid)
        a1 *= decay
        a2 = decay * (a2 + ds * cw)
        a4 = decay * (a4 + cs)
        out[m + 1] = from_coeffs(a1 - cfg.k * a2 + a4, grid)
        if cfg.enable_convection:
            a3 = decay * (a3 + ds * cw2)
            out[m + 1] -= 0.5 * derivative_values(a3, grid)
    return PathFunction(grid=grid, times=u.times, values=out, noise=u.noise)


def weighted_norm(u: FieldPath, lam: float, p: float) -> float:
    """( trapezoid of exp(-lam t) ||u(t)||_p^p )^(1/p) along the partition."""
    if lam <= 0:
        raise ValueError("weight rate lambda must be positive")
    dx = u.grid.dx
    norms_p = (np.abs(u.values) ** p).sum(axis=-1) * dx
    integrand = np.exp(-lam * u.times) * norms_p
    return float(np.trapezoid(integrand, u.times)) ** (1.0 / p)


def heat_flow_path(u0: Field, times: np.ndarray, noise: NoisePath) -> PathFunction:
    """The zeroth Picard iterate: pure (undamped) heat flow of u0."""
    grid = u0.grid
    c = to_coeffs(u0.values, grid)
    mult = np.exp(-np.multiply.outer(np.asarray(times), eigenvalues(grid)))
    values = from_coeffs(c * mult, grid)
    values[0] = u0.values
    return PathFunction(grid=grid, times=times, values=values, noise=noise)


def picard_solve(
    u0: Field,
    cfg: SimConfig,
    N: float,
    iters: int,
    noise: NoisePath,
    lam: float = 50.0,
) -> tuple[PathFunction, np.ndarray]:
    """Iterate u <- A u from the heat flow of u0; residuals in the weighted norm."""
    if iters < 1:
        raise ValueError("need at least one iteration")
    u = heat_flow_path(u0, noise.times, noise)
    residuals = []
    for _ in range(iters):
        nxt = apply_A(u, cfg, N)
        diff = FieldPath(grid=u.grid, times=u.times, values=nxt.values - u.values)
        residuals.append(weighted_norm(diff, lam, cfg.p))
        u = nxt
    residuals = np.asarray(residuals)
    if residuals.size >= 4 and np.all(np.diff(residuals[-4:]) > 0):
        raise RuntimeError(
            "Picard iteration diverging: residual grew over 3 consecutive sweeps"
        )
    return u, residuals


def contraction_factor(
    u: PathFunction, v: PathFunction, cfg: SimConfig, N: float, lam: float
) -> float:
    """weighted_norm(Au - Av) / weighted_norm(u - v) on a shared noise path."""
    if u.noise is not v.noise and not np.array_equal(u.noise.draws, v.noise.draws):
        raise ValueError("contraction pairs must share one noise path")
    denom_path = FieldPath(grid=u.grid, times=u.times, values=u.values - v.values)
    denom = weighted_norm(denom_path, lam, cfg.p)
    if denom == 0.0:
        raise ValueError("u and v coincide; contraction factor undefined")
    au = apply_A(u, cfg, N)
    av = apply_A(v, cfg, N)
    num_path = FieldPath(grid=u.grid, times=u.times, values=au.values - av.values)
    return weighted_norm(num_path, lam, cfg.p) / denom
