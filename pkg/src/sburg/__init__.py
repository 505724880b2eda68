"""Damped stochastic Burgers equation on a truncated line.

Spectral exponential Euler-Maruyama solver with multiplicative Q-Wiener
noise, plus the verification harness: moment/dissipation/tail reports,
Feller coupling probes, Picard contraction measurements, and
Krylov-Bogolioubov invariant-measure experiments.
"""

__version__ = "0.1.0"

from .grid import Field, Grid, cutoff_theta, h1_seminorm, lp_norm, make_grid, tail_mass
from .noise import NoiseModel, SigmaSpec, basis_eval, sample_increment, sigma_eval
from .semigroup import FieldPath, HeatOperator, heat_apply, j1_apply, j2_apply, kernel_checks, stoch_conv
from .integrator import SimConfig, Trajectory, convection, simulate, step
from .picard import PathFunction, apply_A, contraction_factor, pi_n, picard_solve, weighted_norm
from .diagnostics import (
    BoundReport,
    EnsembleRun,
    EnsembleStats,
    cole_hopf_reference,
    dissipation_report,
    feller_probe,
    moment_report,
    run_ensemble,
    tail_report,
    weak_form_residual,
)
from .ergodic import (
    EmpiricalMeasure,
    invariance_check,
    kb_average,
    measure_distance,
    observe,
    tightness_report,
)
