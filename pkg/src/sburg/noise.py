"""Spectral Q-Wiener noise W(t) = sum_j a_j beta_j(t) e_j and the coefficient sigma.

The mode amplitudes default to the power law a_j = a0 * j^{-r}; the trace
a = sum_j a_j^2 must stay finite as J grows, which pins r > 1/2.  Hypotheses
on sigma: |sigma(u)| <= l |u| (linear growth through zero) and a global
Lipschitz constant equal to l for both shipped kinds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Field, Grid
from .spectral import basis_values, from_coeffs

SIGMA_KINDS = ("linear", "saturating")


@dataclass(frozen=True)
class SigmaSpec:
    """sigma(u) = l*u ('linear') or l*sin(u) ('saturating'); Lipschitz const l."""

    kind: str
    l: float

    def __post_init__(self):
        if self.kind not in SIGMA_KINDS:
            raise ValueError(f"unknown sigma kind {self.kind!r}; choose from {SIGMA_KINDS}")
        if self.l < 0:
            raise ValueError("growth constant l must be nonnegative")

    @property
    def lipschitz(self) -> float:
        return self.l

    def apply(self, values: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return self.l * values
        return self.l * np.sin(values)


def sigma_eval(spec: SigmaSpec, f: Field) -> Field:
    return Field(spec.apply(f.values), f.grid)


@dataclass(frozen=True)
class NoiseModel:
    """Retained modes e_1..e_J with amplitudes a_j; trace a = sum a_j^2."""

    grid: Grid
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("amplitude vector must be one-dimensional and nonempty")
        if a.size > self.grid.n:
            raise ValueError("more noise modes than grid resolution")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("amplitudes must be finite and nonnegative")
        object.__setattr__(self, "a", a)

    @property
    def J(self) -> int:
        return self.a.size

    @property
    def trace(self) -> float:
        return float((self.a**2).sum())

    @classmethod
    def power_law(cls, grid: Grid, J: int, a0: float, r: float) -> "NoiseModel":
        # r > 1/2 keeps sum a_j^2 summable as J -> infinity.
        if a0 < 0:
            raise ValueError("a0 must be nonnegative")
        if r <= 0.5:
            raise ValueError(f"spectral decay r={r} <= 1/2: trace diverges as J grows")
        j = np.arange(1, J + 1, dtype=float)
        return cls(grid=grid, a=a0 * j ** (-r))


def basis_eval(j: int, grid: Grid) -> Field:
    return Field(basis_values(j, grid), grid)


@dataclass
class NoiseIncrement:
    """One increment dW = sum_j a_j dB_j e_j over a step of length dt."""

    dW: Field
    dt: float
    mode_draws: np.ndarray


def synthesize_increment(model: NoiseModel, draws: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Nodal values of sum_j a_j draws_j e_j; draws may be batched (..., J)."""
    coeffs = np.zeros(draws.shape[:-1] + (model.grid.n,))
    coeffs[..., : model.J] = model.a * draws
    return from_coeffs(coeffs, model.grid, workers=workers)


def sample_increment(model: NoiseModel, dt: float, rng: np.random.Generator) -> NoiseIncrement:
    """Independent dB_j ~ N(0, dt); dW assembled by inverse sine transform."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    draws = rng.standard_normal(model.J) * np.sqrt(dt)
    return NoiseIncrement(
        dW=Field(synthesize_increment(model, draws), model.grid),
        dt=dt,
        mode_draws=draws,
    )


def trajectory_stream(master_seed: int, index: int) -> np.random.Generator:
    """Independent per-trajectory stream from a 64-bit master seed.

    Stream (master_seed, index) is a Philox generator keyed by
    SeedSequence(master_seed, spawn_key=(index,)).  Within a trajectory, step
    m consumes draws m*J .. (m+1)*J - 1, so the draw for (step, mode) is a
    fixed function of (master_seed, index, step, mode) independent of
    scheduling order across trajectories.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class NoisePath:
    """Per-mode Brownian increments on a uniform partition of [0, T]."""

    model: NoiseModel
    times: np.ndarray
    draws: np.ndarray  # (steps, J), each row ~ N(0, dt) per mode

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.shape != (self.times.size - 1, self.model.J):
            raise ValueError("draw array does not match partition/mode count")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def increment_fields(self) -> np.ndarray:
        """(steps, n) nodal values of the increments dW_m."""
        return synthesize_increment(self.model, self.draws)


def sample_path(model: NoiseModel, dt: float, steps: int, rng: np.random.Generator) -> NoisePath:
    draws = rng.standard_normal((steps, model.J)) * np.sqrt(dt)
    times = dt * np.arange(steps + 1)
    return NoisePath(model=model, times=times, draws=draws)


def zero_path(model: NoiseModel, dt: float, steps: int) -> NoisePath:
    return NoisePath(model=model, times=dt * np.arange(steps + 1), draws=np.zeros((steps, model.J)))
