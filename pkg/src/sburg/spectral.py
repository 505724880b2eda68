"""Discrete sine transforms for the Dirichlet basis e_j on [-L, L].

Basis: e_j(x) = L^{-1/2} sin(j pi (x + L) / (2L)), j = 1..n.  On the uniform
interior grid the rectangle-rule inner product makes {e_j} exactly
orthonormal, so `to_coeffs`/`from_coeffs` are exact inverses of each other.
All transforms act on the last axis and accept batched arrays.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.fft as sfft

from .grid import Grid


def wavenumbers(grid: Grid) -> np.ndarray:
    """kappa_j = j pi / (2L) for j = 1..n."""
    return np.arange(1, grid.n + 1) * (np.pi / (2.0 * grid.half_width))


def eigenvalues(grid: Grid) -> np.ndarray:
    """Dirichlet Laplacian eigenvalues lambda_j = kappa_j^2."""
    k = wavenumbers(grid)
    return k * k


def to_coeffs(values: np.ndarray, grid: Grid, workers: int | None = None) -> np.ndarray:
    """Sine coefficients c_j = <f, e_j> dx (rectangle rule, exact here)."""
    scale = grid.dx / (2.0 * math.sqrt(grid.half_width))
    return sfft.dst(values, type=1, axis=-1, workers=workers) * scale


def from_coeffs(coeffs: np.ndarray, grid: Grid, workers: int | None = None) -> np.ndarray:
    """Nodal values of sum_j c_j e_j."""
    scale = 1.0 / (2.0 * math.sqrt(grid.half_width))
    return sfft.dst(coeffs, type=1, axis=-1, workers=workers) * scale


def derivative_values(coeffs: np.ndarray, grid: Grid, workers: int | None = None) -> np.ndarray:
    """Nodal values of d/dx sum_j c_j e_j (cosine synthesis, exact)."""
    g = coeffs * wavenumbers(grid)
    pad = np.zeros(g.shape[:-1] + (grid.n + 2,))
    pad[..., 1:-1] = g
    out = sfft.dct(pad, type=1, axis=-1, workers=workers)
    scale = 1.0 / (2.0 * math.sqrt(grid.half_width))
    return out[..., 1:-1] * scale


def basis_values(j: int, grid: Grid) -> np.ndarray:
    if not 1 <= j <= grid.n:
        raise ValueError(f"mode index j={j} out of range 1..{grid.n}")
    arg = j * np.pi * (grid.nodes + grid.half_width) / (2.0 * grid.half_width)
    return np.sin(arg) / math.sqrt(grid.half_width)


def basis_matrix(grid: Grid, J: int) -> np.ndarray:
    """(J, n) matrix of nodal basis values, rows e_1 .. e_J."""
    return np.stack([basis_values(j, grid) for j in range(1, J + 1)])
