"""End-to-end acceptance suite: ten quantitative criteria at desk scale.

Run with `pytest tests/test_acceptance.py -s` to see one pass/fail line per
criterion.  The moment, dissipation, and tail criteria share a single
200-trajectory ensemble at the default configuration (about 15 minutes on one
core); the invariant-measure criterion runs its own 64-trajectory ensemble
with retained states (about 5 minutes).  Everything else finishes in seconds
to a couple of minutes.
"""

import math

import numpy as np
import pytest

from sburg.cli import _random_path, default_u0, main, parse_config
from sburg.diagnostics import (
    cole_hopf_reference,
    dissipation_report,
    feller_probe,
    moment_report,
    run_ensemble,
    tail_report,
)
from sburg.ergodic import (
    bootstrap_baseline,
    invariance_check,
    kb_average,
    measure_distance,
    tightness_report,
)
from sburg.grid import Field, l2_norm_sq, lp_norm, make_grid
from sburg.integrator import convection, simulate
from sburg.noise import NoiseModel, basis_eval, sample_path, trajectory_stream, zero_path
from sburg.picard import contraction_factor, picard_solve
from sburg.semigroup import kernel_checks


def _report(num, name, ok, detail=""):
    line = f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def default_run():
    # shared by the moment, dissipation, and tail criteria
    cfg = parse_config("")
    return run_ensemble(cfg, default_u0(cfg.grid)).stats()


@pytest.fixture(scope="module")
def ergodic_run():
    cfg = parse_config("T=34\nM=64\nsnapshot_stride=500\nretain_states=true\n")
    return run_ensemble(cfg, default_u0(cfg.grid))


def _oracle_cfg():
    # k = 0, noise off: the exact solution is the Cole-Hopf quadrature
    return parse_config(
        "k=0\nl=0.0\nn=4095\ndt=1e-4\nT=0.5\nsnapshot_stride=5000\nJ=1\na0=0.0\n"
    )


class TestAcceptance:
    def test_01_kernel_identities(self):
        grid = make_grid(32.0, 2047)
        worst_mass = 0.0
        worst_l2 = 0.0
        for t in (0.1, 1.0, 4.0):
            mass, l2sq = kernel_checks(grid, t)
            worst_mass = max(worst_mass, abs(mass - 1.0))
            target = (8.0 * math.pi * t) ** -0.5
            worst_l2 = max(worst_l2, abs(l2sq - target) / target)
        ok = worst_mass < 1e-6 and worst_l2 < 1e-4
        _report(1, "heat kernel identities", ok,
                f"mass err {worst_mass:.2e}, L2 rel err {worst_l2:.2e}")

    def test_02_energy_cancellation(self):
        grid = make_grid(32.0, 2047)
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            f = Field(rng.standard_normal(grid.n), grid)
            c = convection(f)
            ip = abs((f.values * c.values).sum() * grid.dx)
            worst = max(worst, ip / (lp_norm(f, 2.0) * lp_norm(c, 2.0)))
        _report(2, "convection energy cancellation", worst <= 1e-12,
                f"worst normalized inner product {worst:.2e}")

    def test_03_deterministic_oracle(self):
        cfg = _oracle_cfg()
        u0 = default_u0(cfg.grid)
        traj = simulate(cfg, u0, trajectory_stream(cfg.master_seed, 0))
        ref = cole_hopf_reference(u0, 0.5)
        err = math.sqrt(
            l2_norm_sq(traj.snapshots[-1] - ref.values, cfg.grid.dx)
            / l2_norm_sq(ref.values, cfg.grid.dx)
        )
        _report(3, "Cole-Hopf quadrature oracle", err < 1e-3,
                f"relative L2 error {err:.2e} at t=0.5")

    def test_04_moment_bound(self, default_run):
        rep = moment_report(default_run)
        _report(4, "uniform second-moment bound", rep.passed,
                f"worst margin {rep.worst_margin:.3g} over {len(rep.rows)} checks")

    def test_05_dissipation(self, default_run):
        rep = dissipation_report(default_run)
        _report(5, "gradient dissipation bound", rep.passed,
                f"worst margin {rep.worst_margin:.3g}")

    def test_06_tail_estimate(self, default_run):
        tr = tail_report(default_run, 1e-3)
        L = default_run.cfg.grid.half_width
        sup_tail = np.asarray([v for _, v in tr.curve])
        nonincreasing = bool(np.all(np.diff(sup_tail) <= 1e-14))
        ok = tr.n_star is not None and tr.n_star <= L / 2 and nonincreasing
        _report(6, "uniform tail estimate", ok,
                f"N_star={tr.n_star}, curve nonincreasing={nonincreasing}")

    def test_07_picard_contraction(self):
        cfg = parse_config("T=0.25\nsnapshot_stride=250\n")
        u0 = default_u0(cfg.grid)
        steps = int(round(0.25 / cfg.dt))
        noise = sample_path(cfg.noise, cfg.dt, steps, trajectory_stream(cfg.master_seed, 0))
        _, residuals = picard_solve(u0, cfg, N=5.0, iters=6, noise=noise, lam=1000.0)
        geometric = bool(np.all(np.diff(residuals) < 0.0))
        pair_rng = np.random.default_rng(cfg.master_seed)
        factors = np.asarray([
            contraction_factor(
                _random_path(u0, noise, pair_rng),
                _random_path(u0, noise, pair_rng),
                cfg, 5.0, 1000.0,
            )
            for _ in range(50)
        ])
        frac = float((factors < 1.0).mean())
        # deterministic terminal iterate against the time stepper
        cfg_det = parse_config("T=0.25\nsnapshot_stride=250\nl=0.0\n")
        udet, _ = picard_solve(
            u0, cfg_det, N=5.0, iters=8,
            noise=zero_path(cfg_det.noise, cfg_det.dt, steps), lam=1000.0,
        )
        term = simulate(cfg_det, u0, trajectory_stream(0, 0)).snapshots[-1]
        rel = math.sqrt(
            l2_norm_sq(udet.values[-1] - term, cfg.grid.dx)
            / l2_norm_sq(term, cfg.grid.dx)
        )
        ok = frac >= 0.95 and geometric and rel < 1e-3
        _report(7, "Picard contraction", ok,
                f"frac<1 {frac:.2f}, max factor {factors.max():.3g}, "
                f"residuals decreasing={geometric}, terminal rel err {rel:.2e}")

    def test_08_feller_probe(self):
        cfg = parse_config("T=1\n")
        u01 = default_u0(cfg.grid)
        e1 = basis_eval(1, cfg.grid)
        ratios = np.asarray([
            feller_probe(
                u01,
                Field(u01.values + 2.0**-i * 0.1 * e1.values, cfg.grid),
                cfg, 1.0, 16,
            )
            for i in range(10)
        ])
        variation = float(ratios.max() / ratios.min())
        _report(8, "Feller coupled-ratio stability", variation <= 1.5,
                f"ratio range [{ratios.min():.4g}, {ratios.max():.4g}], "
                f"max/min {variation:.4g}")

    def test_09_invariant_measure(self, ergodic_run):
        dists = [
            measure_distance(kb_average(ergodic_run, s), kb_average(ergodic_run, 2 * s))
            for s in (4, 8, 16)
        ]
        decreasing = bool(np.all(np.diff(dists) < 0.0))
        mu = kb_average(ergodic_run, 16)
        rng = np.random.default_rng(ergodic_run.cfg.master_seed)
        m = 32
        dist = invariance_check(mu, ergodic_run.cfg, 1.0, m, rng)
        base = bootstrap_baseline(mu, m, 20, rng)
        invariant = dist <= 2.0 * base
        rep = tightness_report(ergodic_run, 0.1, [1, 2, 3, 4, 5, 6])
        markov_ok = all(ok for (*_, ok) in rep.per_m)
        ok = decreasing and invariant and rep.passed and markov_ok
        _report(9, "time-averaged invariant measure", ok,
                f"d(mu_s, mu_2s)={['%.3g' % d for d in dists]}, "
                f"invariance {dist:.3g} vs 2x baseline {2 * base:.3g}, "
                f"tightness total {rep.total:.3g} < 0.1, markov ok={markov_ok}")

    def test_10_reproducibility(self, tmp_path):
        cfg = _oracle_cfg()
        u0 = default_u0(cfg.grid)
        a = simulate(cfg, u0, trajectory_stream(cfg.master_seed, 0))
        b = simulate(cfg, u0, trajectory_stream(cfg.master_seed, 0))
        bitwise = a.snapshots.tobytes() == b.snapshots.tobytes()
        # command-line runs must not depend on the parallelism degree
        cfg_file = tmp_path / "tiny.cfg"
        cfg_file.write_text("L=8\nn=127\ndt=2e-3\nT=0.2\nJ=8\nM=4\nsnapshot_stride=10\n")
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["--out", str(out1), "simulate", str(cfg_file)]) == 0
        assert main(["--out", str(out2), "--workers", "2", "simulate", str(cfg_file)]) == 0
        d1, d2 = next(out1.iterdir()), next(out2.iterdir())
        same = d1.name == d2.name and all(
            (d1 / n).read_bytes() == (d2 / n).read_bytes()
            for n in ("timeseries.csv", "ensemble_stats.csv")
        )
        _report(10, "byte-identical reproducibility", bitwise and same,
                f"rerun bitwise={bitwise}, worker-count invariance={same}")
