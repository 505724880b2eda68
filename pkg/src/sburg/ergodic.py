"""Krylov-Bogolioubov time averages and invariance/tightness diagnostics.

Weak convergence on the state space is probed through a fixed 12-component
observable projection; empirical measures are compared with the energy
distance on component-standardized observable vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .grid import CUTOFF_SLOPE_BOUND, Field, cutoff_theta, h1_seminorm_sq_values, l2_norm_sq
from .diagnostics import EnsembleRun
from .integrator import N_TRACKED_COEFFS, SimConfig, Stepper
from .noise import synthesize_increment, trajectory_stream
from .spectral import to_coeffs

OBSERVABLE_DIM = 12

#: stream index offset for push-forward evolutions, clear of ensemble streams
PUSHFORWARD_STREAM_OFFSET = 1 << 32


def observe(f: Field) -> np.ndarray:
    """12-vector: ||u||_2^2, ||u_x||_2^2, tail at L/4 and L/2, c_1..c_8."""
    return observe_values(f.values, f.grid)


def observe_values(values: np.ndarray, grid) -> np.ndarray:
    from .grid import tail_mass_values

    L = grid.half_width
    dx = grid.dx
    l2sq = l2_norm_sq(values, dx)
    h1sq = h1_seminorm_sq_values(values, dx)
    tq = tail_mass_values(values, grid, L / 4)
    th = tail_mass_values(values, grid, L / 2)
    coeffs = to_coeffs(values, grid)[..., :N_TRACKED_COEFFS]
    return np.concatenate(
        [np.stack([l2sq, h1sq, tq, th], axis=-1), coeffs], axis=-1
    )


@dataclass
class EmpiricalMeasure:
    """Equal-weight sample of observable vectors over the window (1, s+1]."""

    samples: np.ndarray  # (m, 12)
    window: tuple[float, float]
    source: str = ""
    states: np.ndarray | None = None  # (m, n) full fields when retained
    grid: object = None

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.samples.shape[0] < 1:
            raise ValueError("empirical measure needs at least one sample")


def kb_average(run: EnsembleRun, s: int) -> EmpiricalMeasure:
    """Pool all snapshot observables with times in [1, s+1] across the ensemble."""
    if s < 1:
        raise ValueError("averaging length s must be >= 1")
    if run.times[-1] < s + 1:
        raise ValueError(
            f"trajectory horizon {run.times[-1]:g} too short for window [1, {s + 1}]"
        )
    mask = (run.times >= 1.0) & (run.times <= s + 1.0)
    obs = run.observables()[mask]  # (S_w, M, 12)
    samples = obs.reshape(-1, OBSERVABLE_DIM)
    states = None
    if run.retained_states is not None:
        states = run.retained_states[mask].reshape(-1, run.cfg.grid.n)
    return EmpiricalMeasure(
        samples=samples,
        window=(1.0, float(s + 1)),
        source=f"kb_average(s={s}, M={run.M})",
        states=states,
        grid=run.cfg.grid,
    )


def _standardizer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    pooled = np.concatenate([a, b], axis=0)
    scale = pooled.std(axis=0)
    scale[scale == 0.0] = 1.0
    return scale


def measure_distance(A: EmpiricalMeasure, B: EmpiricalMeasure) -> float:
    """Energy distance 2 E||X-Y|| - E||X-X'|| - E||Y-Y'|| over all sample pairs."""
    scale = _standardizer(A.samples, B.samples)
    xa = A.samples / scale
    xb = B.samples / scale
    dxy = cdist(xa, xb).mean()
    dxx = cdist(xa, xa).mean()
    dyy = cdist(xb, xb).mean()
    return float(2.0 * dxy - dxx - dyy)


def bootstrap_baseline(
    mu: EmpiricalMeasure, size: int, reps: int, rng: np.random.Generator
) -> float:
    """Mean self-distance of a size-`size` subsample against the rest of mu.

    Calibrates how large `measure_distance` runs purely from resampling noise
    at the given subsample size.
    """
    m = mu.samples.shape[0]
    if not 1 <= size < m:
        raise ValueError("subsample size must be positive and below the sample count")
    vals = []
    for _ in range(reps):
        idx = rng.permutation(m)
        sub = EmpiricalMeasure(mu.samples[idx[:size]], mu.window)
        rest = EmpiricalMeasure(mu.samples[idx[size:]], mu.window)
        vals.append(measure_distance(sub, rest))
    return float(np.mean(vals))


def pushforward(
    mu: EmpiricalMeasure, cfg: SimConfig, delta: float, M: int, rng: np.random.Generator
) -> EmpiricalMeasure:
    """Evolve M states drawn from mu's support by delta with fresh noise."""
    if mu.states is None:
        raise ValueError("push-forward needs retained full states (retain_states)")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    idx = rng.choice(mu.states.shape[0], size=M, replace=False)
    u = mu.states[idx].copy()
    steps = int(round(delta / cfg.dt))
    if steps:
        stepper = Stepper(cfg)
        gens = [
            trajectory_stream(cfg.master_seed, PUSHFORWARD_STREAM_OFFSET + i)
            for i in range(M)
        ]
        sqrt_dt = math.sqrt(cfg.dt)
        draws = np.empty((M, cfg.noise.J))
        for _ in range(steps):
            for i, g in enumerate(gens):
                draws[i] = g.standard_normal(cfg.noise.J)
            dw = synthesize_increment(cfg.noise, draws * sqrt_dt)
            u = stepper.advance(u, dw)
    return EmpiricalMeasure(
        samples=observe_values(u, cfg.grid),
        window=mu.window,
        source=f"pushforward(delta={delta:g}, M={M})",
    )


def invariance_check(
    mu: EmpiricalMeasure, cfg: SimConfig, delta: float, M: int, rng: np.random.Generator
) -> float:
    """d(mu, p_delta^* mu) with the push-forward sampled from mu's support."""
    pushed = pushforward(mu, cfg, delta, M, rng)
    return measure_distance(mu, pushed)


@dataclass
class TightnessReport:
    eps: float
    per_m: list  # (m, n_m, p_inner, p_outer, markov_bound, markov_ok)
    total: float
    c1: float
    c2: float

    @property
    def passed(self) -> bool:
        return self.total < self.eps and all(row[5] for row in self.per_m)

    def to_text(self) -> str:
        lines = [
            f"tightness report: eps={self.eps:g}, c1={self.c1:.6g}, c2={self.c2:.6g}",
            f"summed exclusion probability: {self.total:.6g} (target < {self.eps:g})",
            f"pass: {self.passed}",
        ]
        for (m, n_m, p_in, p_out, mk, ok) in self.per_m:
            lines.append(
                f"  m={m} n_m={n_m:g} P(inner H1 over) = {p_in:.4g} "
                f"P(outer mass over) = {p_out:.4g} markov bound={mk:.4g} ok={ok}"
            )
        return "\n".join(lines)


#: H1 norm of (1-theta_n) u against the H1 norm of u:
#: ||(1-theta)u||^2 <= ||u||^2, ||((1-theta)u)_x|| <= ||u_x|| + Chat ||u||, so
#: c2 = 1 + 2*Chat^2 dominates both pieces for every n >= 1.
TIGHTNESS_C2 = 1.0 + 2.0 * CUTOFF_SLOPE_BOUND**2


def tightness_report(
    run: EnsembleRun,
    eps: float,
    m_list: list[int],
    tail_eps_fn=None,
) -> TightnessReport:
    """Two-event exclusion estimate for the compact sets Z_m over the window.

    For each m: pick the smallest cutoff scale n_m whose half-radius tail mass
    (mean + 3 stderr over the window) is below eps / 2^{4m}; estimate
    P(||(1-theta_{n_m})u||_{H1}^2 > 2^{2m} 3 c1 c2 / eps) and
    P(||theta_{n_m}u||_2^2 > 2^{-2m}) empirically, and cross-check each m
    against the Markov bound eps/2^{2m} + eps/(2^{2m} 3 c1) * mean ||u||_H1^2.
    """
    if run.retained_states is None:
        raise ValueError("tightness report needs retained states")
    cfg = run.cfg
    if not cfg.invariant_regime:
        raise ValueError("tightness analysis requires a*l^2 < (3/7)k")
    grid = cfg.grid
    mask = run.times >= 1.0
    states = run.retained_states[mask].reshape(-1, grid.n)
    n_samples = states.shape[0]
    c1 = l2_norm_sq(run.u0.values, grid.dx)
    c2 = TIGHTNESS_C2

    # sup-over-window tail curve at half the candidate cutoff scales
    tails = run.tails[mask]  # (S_w, M, K)
    tail_mean = tails.mean(axis=1)
    tail_se = tails.std(axis=1, ddof=1) / math.sqrt(run.M)
    sup_tail = (tail_mean + 3.0 * tail_se).max(axis=0)

    h1_all = h1_seminorm_sq_values(states, grid.dx) + l2_norm_sq(states, grid.dx)
    mean_h1 = float(h1_all.mean())
    se_h1 = float(h1_all.std(ddof=1) / math.sqrt(n_samples))

    per_m = []
    total = 0.0
    radii = np.asarray(cfg.tail_radii)
    for m in m_list:
        target = eps / 2.0 ** (4 * m)
        n_m = None
        for N, v in zip(radii, sup_tail):
            if 2.0 * N <= grid.half_width and v < target:
                n_m = 2.0 * N  # tail radius is n_m / 2 in the two-event split
                break
        if n_m is None:
            raise ValueError(
                f"no configured radius reaches the m={m} tail target {target:g}"
            )
        theta = cutoff_theta(n_m, grid).values
        outer = states * theta
        inner = states - outer
        inner_h1 = h1_seminorm_sq_values(inner, grid.dx) + l2_norm_sq(inner, grid.dx)
        outer_l2 = l2_norm_sq(outer, grid.dx)
        thr_inner = 2.0 ** (2 * m) * 3.0 * c1 * c2 / eps
        thr_outer = 2.0 ** (-2 * m)
        p_inner = float((inner_h1 > thr_inner).mean())
        p_outer = float((outer_l2 > thr_outer).mean())
        p_se = math.sqrt(max(p_inner + p_outer, 1.0 / n_samples) / n_samples)
        markov = eps / 2.0 ** (2 * m)
        if mean_h1 > 0.0:  # c1 = 0 forces mean_h1 = 0; avoid 0/0
            markov += eps / (2.0 ** (2 * m) * 3.0 * c1) * mean_h1
        ok = p_inner + p_outer <= markov + 3.0 * p_se
        per_m.append((m, n_m, p_inner, p_outer, markov, ok))
        total += p_inner + p_outer
    return TightnessReport(eps=eps, per_m=per_m, total=total, c1=c1, c2=c2)
