"""Time-averaged empirical measures, energy distance, invariance, tightness."""

import numpy as np
import pytest

from sburg.diagnostics import run_ensemble
from sburg.ergodic import (
    EmpiricalMeasure,
    bootstrap_baseline,
    invariance_check,
    kb_average,
    measure_distance,
    observe,
    pushforward,
    tightness_report,
)
from sburg.grid import Field, make_grid, zero_field
from sburg.integrator import SimConfig
from sburg.noise import NoiseModel, SigmaSpec
from sburg.spectral import basis_values


def small_cfg(**kw):
    g = kw.pop("grid", make_grid(16.0, 255))
    defaults = dict(
        grid=g,
        sigma=SigmaSpec("linear", 0.3),
        noise=NoiseModel.power_law(g, J=16, a0=0.5, r=1.0),
        k=1.0,
        dt=2e-3,
        T=10.0,
        snapshot_stride=125,
        m_trajectories=12,
        retain_states=True,
    )
    defaults.update(kw)
    return SimConfig(**defaults)


def gaussian(grid):
    return Field(np.exp(-grid.nodes**2), grid)


@pytest.fixture(scope="module")
def base_run():
    cfg = small_cfg()
    return run_ensemble(cfg, gaussian(cfg.grid))


class TestObserve:
    def test_zero_field(self):
        g = make_grid(16.0, 255)
        assert np.all(observe(zero_field(g)) == 0.0)

    def test_basis_mode(self):
        g = make_grid(16.0, 255)
        v = observe(Field(basis_values(1, g), g))
        assert abs(v[0] - 1.0) < 1e-10  # squared L2 norm
        assert abs(v[4] - 1.0) < 1e-10  # first sine coefficient
        assert np.abs(v[5:]).max() < 1e-10

    def test_first_component_is_l2sq(self):
        g = make_grid(16.0, 255)
        rng = np.random.default_rng(0)
        f = Field(rng.standard_normal(g.n), g)
        from sburg.grid import lp_norm

        assert np.isclose(observe(f)[0], lp_norm(f, 2.0) ** 2)


class TestKbAverage:
    def test_insufficient_horizon(self, base_run):
        with pytest.raises(ValueError, match="horizon"):
            kb_average(base_run, 100)

    def test_window_sample_counts(self, base_run):
        mu2 = kb_average(base_run, 2)
        mu4 = kb_average(base_run, 4)
        # samples pooled across the ensemble, proportional to window length
        assert mu4.samples.shape[0] > mu2.samples.shape[0]
        assert mu2.samples.shape[1] == 12

    def test_states_retained(self, base_run):
        mu = kb_average(base_run, 4)
        assert mu.states is not None
        assert mu.states.shape[0] == mu.samples.shape[0]


class TestMeasureDistance:
    def test_identical_is_zero(self):
        rng = np.random.default_rng(1)
        a = EmpiricalMeasure(rng.standard_normal((40, 12)), (1.0, 5.0))
        assert measure_distance(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        a = EmpiricalMeasure(rng.standard_normal((30, 12)), (1.0, 5.0))
        b = EmpiricalMeasure(rng.standard_normal((25, 12)) + 1.0, (1.0, 5.0))
        assert measure_distance(a, b) == pytest.approx(measure_distance(b, a))

    def test_point_masses_brute_force(self):
        dim = 12
        a = EmpiricalMeasure(np.zeros((5, dim)), (1.0, 2.0))
        e = np.zeros(dim)
        e[0] = 1.0
        b = EmpiricalMeasure(np.tile(e, (7, 1)), (1.0, 2.0))
        # pooled std of component 0 over 12 samples (5 zeros, 7 ones), rest 0 -> 1
        pooled = np.concatenate([a.samples, b.samples]).std(axis=0)
        d_xy = 1.0 / pooled[0]
        assert measure_distance(a, b) == pytest.approx(2.0 * d_xy)

    def test_triangle_inequality_probes(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            a = EmpiricalMeasure(rng.standard_normal((10, 12)), (1.0, 2.0))
            b = EmpiricalMeasure(rng.standard_normal((10, 12)) * 2.0, (1.0, 2.0))
            c = EmpiricalMeasure(rng.standard_normal((10, 12)) - 1.0, (1.0, 2.0))
            # energy distance: sqrt(d) is a metric, probe on the square roots
            dab = measure_distance(a, b)
            dbc = measure_distance(b, c)
            dac = measure_distance(a, c)
            assert np.sqrt(max(dac, 0.0)) <= np.sqrt(max(dab, 0.0)) + np.sqrt(
                max(dbc, 0.0)
            ) + 1e-9


class TestBootstrapBaseline:
    def test_size_validation(self):
        rng = np.random.default_rng(4)
        mu = EmpiricalMeasure(rng.standard_normal((20, 12)), (1.0, 2.0))
        with pytest.raises(ValueError, match="size"):
            bootstrap_baseline(mu, 20, 5, rng)

    def test_positive_for_random_samples(self):
        rng = np.random.default_rng(5)
        mu = EmpiricalMeasure(rng.standard_normal((60, 12)), (1.0, 2.0))
        assert bootstrap_baseline(mu, 20, 5, rng) > 0.0


class TestPushforward:
    def test_requires_states(self):
        rng = np.random.default_rng(6)
        mu = EmpiricalMeasure(rng.standard_normal((20, 12)), (1.0, 2.0))
        cfg = small_cfg()
        with pytest.raises(ValueError, match="retained"):
            pushforward(mu, cfg, 1.0, 4, rng)

    def test_zero_fixed_point(self):
        # sigma(0) = 0: the zero state is invariant under the dynamics
        cfg = small_cfg(T=2.0, snapshot_stride=250)
        run = run_ensemble(cfg, zero_field(cfg.grid))
        mu = kb_average(run, 1)
        pushed = pushforward(mu, cfg, 0.5, 4, np.random.default_rng(7))
        assert np.abs(pushed.samples).max() == 0.0
        assert measure_distance(mu, pushed) == pytest.approx(0.0, abs=1e-12)

    def test_delta_zero_within_baseline(self, base_run):
        mu = kb_average(base_run, 8)
        rng = np.random.default_rng(8)
        m = 24
        dist = invariance_check(mu, base_run.cfg, 0.0, m, rng)
        base = bootstrap_baseline(mu, m, 20, rng)
        assert dist <= 2.0 * base


class TestTightnessReport:
    def test_requires_states(self):
        cfg = small_cfg(retain_states=False, T=2.0)
        run = run_ensemble(cfg, gaussian(cfg.grid))
        with pytest.raises(ValueError, match="retained"):
            tightness_report(run, 0.1, [1, 2])

    def test_requires_regime(self):
        cfg = small_cfg(sigma=SigmaSpec("linear", 3.0), T=2.0)
        run = run_ensemble(cfg, gaussian(cfg.grid))
        with pytest.raises(ValueError, match=r"3/7"):
            tightness_report(run, 0.1, [1])

    def test_near_zero_solution(self):
        cfg = small_cfg(T=2.0, snapshot_stride=250)
        run = run_ensemble(cfg, zero_field(cfg.grid))
        rep = tightness_report(run, 0.1, [1, 2, 3])
        assert rep.total == 0.0
        assert rep.passed

    def test_small_scale_pass_and_markov(self, base_run):
        rep = tightness_report(base_run, 0.1, [1, 2, 3])
        assert rep.passed
        for (_, n_m, p_in, p_out, markov, ok) in rep.per_m:
            assert ok
            assert n_m <= base_run.cfg.grid.half_width
            assert 0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0

    def test_text_rendering(self, base_run):
        rep = tightness_report(base_run, 0.1, [1, 2])
        text = rep.to_text()
        assert "tightness report" in text and "pass" in text
