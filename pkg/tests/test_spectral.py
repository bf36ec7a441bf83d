"""
Tests for the spectral module.
"""

import os
import unittest

import numpy as np

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from smaplab.errors import BandOutOfRangeError, ConfigError, InvalidDirectionError
from smaplab.spectral import (DyadicWindow, GridSpec, SpaceTimeField, annulus_leakage, check_unit,
                              chi_k, eta0, forward, galilean_transform, integrate, inverse, l2_norm,
                              parseval_norm, project_directional, project_dyadic, spectral_derivative,
                              spectral_laplacian)


class TestGridSpec(unittest.TestCase):
    """Test cases for the grid description."""

    def test_rejects_invalid_grids(self):
        with self.assertRaises(ConfigError):
            GridSpec(4, 64, 1.0)
        with self.assertRaises(ConfigError):
            GridSpec(2, 48, 1.0)
        with self.assertRaises(ConfigError):
            GridSpec(2, 4, 1.0)
        with self.assertRaises(ConfigError):
            GridSpec(2, 64, 0.0)

    def test_derived_quantities(self):
        grid = GridSpec(2, 64, 16.0)
        self.assertEqual(grid.shape, (64, 64))
        self.assertAlmostEqual(grid.dx, 0.25)
        self.assertAlmostEqual(grid.k_nyquist, np.pi * 4.0)
        self.assertAlmostEqual(grid.dt_hint, 0.25 * (16.0 / (np.pi * 64)) ** 2)
        self.assertAlmostEqual(float(integrate(np.ones(grid.shape), grid)), 256.0)

    def test_rescaled_keeps_resolution(self):
        grid = GridSpec(3, 16, 8.0).rescaled(2.0)
        self.assertEqual(grid.n, 16)
        self.assertAlmostEqual(grid.box_length, 4.0)


class TestLittlewoodPaley(unittest.TestCase):
    """Test cases for the smooth cutoffs and projectors."""

    def setUp(self):
        self.grid = GridSpec(2, 64, 2 * np.pi)

    def test_eta0_plateau_and_support(self):
        self.assertEqual(eta0(0.0), 1.0)
        self.assertEqual(eta0(1.25), 1.0)
        self.assertEqual(eta0(1.6), 0.0)
        self.assertEqual(eta0(3.0), 0.0)
        self.assertAlmostEqual(eta0(-1.4), eta0(1.4))
        mu = np.linspace(-3, 3, 601)
        values = eta0(mu)
        self.assertTrue(np.all((values >= 0) & (values <= 1)))

    def test_partition_of_unity(self):
        mu = np.linspace(0.0, 1000.0, 5001)
        total = eta0(mu) + sum(chi_k(mu, k) for k in range(1, 11))
        np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_chi_k_vanishes_outside_annulus(self):
        self.assertEqual(chi_k(0.6 * 8, 3), 0.0)
        self.assertEqual(chi_k(1.7 * 8, 3), 0.0)
        self.assertGreater(chi_k(8.0, 3), 0.0)

    def test_window_of_grid(self):
        window = DyadicWindow.from_grid(GridSpec(2, 64, 16.0))
        self.assertEqual((window.k_min, window.k_max), (-1, 2))
        self.assertEqual(len(window), 4)
        self.assertEqual(list(window.clip(-5, 10)), [-1, 0, 1, 2])
        with self.assertRaises(BandOutOfRangeError):
            window.check(3)

    def test_projectors_resolve_identity(self):
        x, y = self.grid.coordinates()
        f = np.cos(3 * x) + np.sin(5 * y) + 0 * x
        total = sum(project_dyadic(f, self.grid, k) for k in DyadicWindow.from_grid(self.grid))
        np.testing.assert_allclose(total, f, atol=1e-12)

    def test_projector_removes_other_bands(self):
        x, _ = self.grid.coordinates()
        f = np.cos(3 * x) * np.ones(self.grid.shape)
        self.assertLess(np.max(np.abs(project_dyadic(f, self.grid, 4))), 1e-13)

    def test_projection_has_no_leakage(self):
        rng = np.random.default_rng(0)
        f = rng.standard_normal(self.grid.shape)
        piece = project_dyadic(f, self.grid, 3)
        self.assertLess(annulus_leakage(piece, self.grid, 3), 1e-20)
        self.assertEqual(annulus_leakage(np.zeros(self.grid.shape), self.grid, 3), 0.0)

    def test_directional_projector_requires_unit_vector(self):
        f = np.ones(self.grid.shape)
        with self.assertRaises(InvalidDirectionError):
            project_directional(f, self.grid, 2, (1.0, 1.0))
        with self.assertRaises(InvalidDirectionError):
            check_unit((1.0, 0.0, 0.0), 2)
        with self.assertRaises(BandOutOfRangeError):
            project_dyadic(f, self.grid, 9)

    def test_separated_projectors_are_orthogonal(self):
        rng = np.random.default_rng(1)
        f = rng.standard_normal(self.grid.shape)
        for k, j in ((0, 2), (1, 3), (2, 4), (4, 1)):
            both = project_dyadic(project_dyadic(f, self.grid, j), self.grid, k)
            self.assertLess(float(np.max(np.abs(both))), 1e-13)


class TestDerivatives(unittest.TestCase):
    """Test cases for spectral calculus."""

    def setUp(self):
        self.grid = GridSpec(2, 32, 2 * np.pi)
        x, y = self.grid.coordinates()
        self.f = np.sin(2 * x) * np.cos(y)

    def test_derivative_of_trigonometric_field(self):
        x, y = self.grid.coordinates()
        np.testing.assert_allclose(spectral_derivative(self.f, self.grid, 0),
                                   2 * np.cos(2 * x) * np.cos(y), atol=1e-12)
        np.testing.assert_allclose(spectral_laplacian(self.f, self.grid), -5 * self.f, atol=1e-11)
        with self.assertRaises(ConfigError):
            spectral_derivative(self.f, self.grid, 2)

    def test_parseval(self):
        rng = np.random.default_rng(1)
        f = rng.standard_normal(self.grid.shape) + 1j * rng.standard_normal(self.grid.shape)
        self.assertAlmostEqual(l2_norm(f, self.grid), parseval_norm(f, self.grid), places=10)


class TestSpaceTimeField(unittest.TestCase):
    """Test cases for space-time fields and the Galilean boost."""

    def setUp(self):
        self.grid = GridSpec(2, 32, 2 * np.pi)
        self.times = np.linspace(-0.5, 0.5, 9)
        x, y = self.grid.coordinates()
        self.f = np.exp(1j * x) + 0.5 * np.exp(2j * y) + 0 * x

    def _free(self, f):
        f_hat = forward(f, self.grid)
        k2 = self.grid.k_squared()
        values = np.stack([inverse(f_hat * np.exp(-1j * t * k2), self.grid) for t in self.times])
        return SpaceTimeField(values, self.times, self.grid)

    def test_rejects_bad_time_grids(self):
        values = np.zeros((8,) + self.grid.shape, dtype=complex)
        with self.assertRaises(ConfigError):
            SpaceTimeField(values, np.linspace(0, 1, 8), self.grid)
        times = np.array([0, 1, 2, 3, 4, 5, 6, 7, 9], dtype=float)
        with self.assertRaises(ConfigError):
            SpaceTimeField(np.zeros((9,) + self.grid.shape), times, self.grid)

    def test_time_weights(self):
        u = self._free(self.f)
        self.assertAlmostEqual(u.half_width, 0.5)
        self.assertAlmostEqual(float(u.time_weights().sum()), 1.0)

    def test_boost_preserves_norm(self):
        u = self._free(self.f)
        boosted = galilean_transform(u, (0.7, -0.3))
        for j in range(self.times.size):
            self.assertAlmostEqual(l2_norm(boosted.values[j], self.grid),
                                   l2_norm(u.values[j], self.grid), places=10)
        self.assertIs(galilean_transform(u, (0.0, 0.0)), u)

    def test_boost_maps_solutions_to_solutions(self):
        u = self._free(self.f)
        boosted = galilean_transform(u, (2.0, 0.0))
        expected = self._free(boosted.values[self.times.size // 2])
        np.testing.assert_allclose(boosted.values, expected.values, atol=1e-10)

    def test_boosts_compose(self):
        """Test T_a T_b = T_{a+b} for boosts on the dual lattice."""
        u = self._free(self.f)
        composed = galilean_transform(galilean_transform(u, (0.0, -2.0)), (2.0, 0.0))
        direct = galilean_transform(u, (2.0, -2.0))
        np.testing.assert_allclose(composed.values, direct.values, atol=1e-12)


if __name__ == "__main__":
    unittest.main()
