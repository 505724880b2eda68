"""Grid construction, norms, tail masses, and the cutoff function."""

import numpy as np
import pytest
from scipy.special import erfc

from sburg.grid import (
    CUTOFF_SLOPE_BOUND,
    Field,
    cutoff_theta,
    diff_values,
    h1_seminorm,
    lp_norm,
    make_grid,
    tail_mass,
    zero_field,
)
from sburg.spectral import basis_values


def gaussian_field(grid):
    return Field(np.exp(-grid.nodes**2), grid)


class TestMakeGrid:
    def test_small_example(self):
        g = make_grid(1.0, 3)
        assert g.dx == 0.5
        assert np.allclose(g.nodes, [-0.5, 0.0, 0.5])

    def test_default_scale(self):
        g = make_grid(32.0, 2047)
        assert g.dx == 64.0 / 2048

    def test_rejects_small_domain(self):
        with pytest.raises(ValueError, match="half width"):
            make_grid(0.5, 100)

    def test_rejects_too_few_points(self):
        with pytest.raises(ValueError, match="interior points"):
            make_grid(4.0, 2)

    def test_nodes_immutable(self):
        g = make_grid(2.0, 7)
        with pytest.raises(ValueError):
            g.nodes[0] = 0.0


class TestField:
    def test_shape_mismatch(self):
        g = make_grid(2.0, 7)
        with pytest.raises(ValueError, match="shape"):
            Field(np.zeros(5), g)

    def test_non_finite_rejected(self):
        g = make_grid(2.0, 7)
        v = np.zeros(7)
        v[3] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            Field(v, g)

    def test_grid_mismatch(self):
        a = zero_field(make_grid(2.0, 7))
        b = zero_field(make_grid(3.0, 7))
        with pytest.raises(ValueError, match="different grids"):
            a.same_grid(b)


class TestLpNorm:
    def test_zero(self):
        g = make_grid(4.0, 31)
        for p in (1.0, 2.0, 3.5):
            assert lp_norm(zero_field(g), p) == 0.0

    def test_basis_mode_is_unit(self):
        g = make_grid(8.0, 1023)
        f = Field(basis_values(1, g), g)
        assert abs(lp_norm(f, 2.0) - 1.0) < 1e-6

    def test_gaussian_oracle(self):
        # integral of exp(-2x^2) over the line is sqrt(pi/2)
        g = make_grid(32.0, 2047)
        val = lp_norm(gaussian_field(g), 2.0)
        assert abs(val - (np.pi / 2.0) ** 0.25) < 1e-6

    def test_rejects_p_below_one(self):
        g = make_grid(4.0, 31)
        with pytest.raises(ValueError, match="norm exponent"):
            lp_norm(zero_field(g), 0.5)

    def test_homogeneity(self):
        g = make_grid(4.0, 63)
        rng = np.random.default_rng(0)
        f = Field(rng.standard_normal(g.n), g)
        for p in (1.0, 2.0, 4.0):
            assert np.isclose(lp_norm(Field(-2.5 * f.values, g), p), 2.5 * lp_norm(f, p))

    def test_triangle_inequality(self):
        g = make_grid(4.0, 63)
        rng = np.random.default_rng(1)
        for _ in range(1000):
            a = Field(rng.standard_normal(g.n), g)
            b = Field(rng.standard_normal(g.n), g)
            s = Field(a.values + b.values, g)
            for p in (1.0, 2.0, 3.0):
                assert lp_norm(s, p) <= lp_norm(a, p) + lp_norm(b, p) + 1e-12


class TestH1Seminorm:
    def test_zero(self):
        g = make_grid(4.0, 31)
        assert h1_seminorm(zero_field(g)) == 0.0

    def test_basis_mode_eigenvalue(self):
        g = make_grid(8.0, 1023)
        f = Field(basis_values(1, g), g)
        target = np.pi / (2.0 * g.half_width)
        assert abs(h1_seminorm(f) - target) / target < 1e-3

    def test_scaling_exact(self):
        g = make_grid(4.0, 63)
        rng = np.random.default_rng(2)
        f = Field(rng.standard_normal(g.n), g)
        assert np.isclose(h1_seminorm(Field(3.0 * f.values, g)), 3.0 * h1_seminorm(f))


class TestDiffValues:
    def test_implicit_zero_boundary(self):
        g = make_grid(2.0, 7)
        v = np.ones(g.n)
        d = diff_values(v, g.dx)
        # interior of a constant has zero slope; edges see the implicit zeros
        assert np.allclose(d[1:-1], 0.0)
        assert d[0] == 1.0 / (2.0 * g.dx)
        assert d[-1] == -1.0 / (2.0 * g.dx)


class TestTailMass:
    def test_full_domain_equals_l2sq(self):
        g = make_grid(4.0, 63)
        rng = np.random.default_rng(3)
        f = Field(rng.standard_normal(g.n), g)
        assert np.isclose(tail_mass(f, 0.0), lp_norm(f, 2.0) ** 2)

    def test_beyond_domain_is_zero(self):
        g = make_grid(4.0, 63)
        f = gaussian_field(g)
        assert tail_mass(f, g.half_width) == 0.0

    def test_gaussian_tail_oracle(self):
        # two-sided integral of exp(-2x^2) over |x| >= N is sqrt(pi/2) erfc(N sqrt 2);
        # the rectangle rule gives each node a full dx cell, so the discrete sum
        # matches the integral taken from N - dx/2
        g = make_grid(32.0, 2047)
        exact = np.sqrt(np.pi / 2.0) * erfc(np.sqrt(2.0) * (2.0 - g.dx / 2.0))
        got = tail_mass(gaussian_field(g), 2.0)
        assert abs(got - exact) / exact < 0.05

    def test_nonincreasing_in_radius(self):
        g = make_grid(8.0, 255)
        rng = np.random.default_rng(4)
        f = Field(rng.standard_normal(g.n), g)
        vals = [tail_mass(f, N) for N in np.linspace(0.0, 8.0, 33)]
        assert all(b <= a + 1e-14 for a, b in zip(vals, vals[1:]))

    def test_negative_radius_rejected(self):
        g = make_grid(4.0, 31)
        with pytest.raises(ValueError, match="nonnegative"):
            tail_mass(zero_field(g), -1.0)


class TestCutoffTheta:
    def test_plateau_values(self):
        g = make_grid(16.0, 2047)
        m = 4.0
        th = cutoff_theta(m, g)
        inner = np.abs(g.nodes) <= m / 4.0
        outer = np.abs(g.nodes) >= 2.0 * m
        assert np.all(th.values[inner] == 0.0)
        assert np.all(th.values[outer] == 1.0)

    def test_midpoint(self):
        g = make_grid(16.0, 2047)
        m = 4.0
        th = cutoff_theta(m, g)
        i = np.argmin(np.abs(g.nodes - 0.75 * m))
        assert abs(th.values[i] - 0.5) < 1e-3

    def test_range_and_monotone(self):
        g = make_grid(16.0, 511)
        th = cutoff_theta(3.0, g).values
        assert th.min() >= 0.0 and th.max() <= 1.0
        right = th[g.nodes >= 0]
        assert np.all(np.diff(right) >= -1e-14)

    def test_slope_bound(self):
        g = make_grid(16.0, 4095)
        for m in (1.0, 2.0, 5.0):
            th = cutoff_theta(m, g).values
            slope = np.abs(np.diff(th)) / g.dx
            assert slope.max() <= CUTOFF_SLOPE_BOUND / m + 1e-2

    def test_rejects_nonpositive_scale(self):
        g = make_grid(4.0, 31)
        with pytest.raises(ValueError, match="positive"):
            cutoff_theta(0.0, g)
