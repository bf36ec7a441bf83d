"""
Tests for the space-time norm evaluators.
"""

import os
import unittest
from dataclasses import replace

import numpy as np

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from smaplab.errors import BandLeakageError, ConfigError, DirectionSetError, InvalidDirectionError
from smaplab.spaces import (INF, FrequencyEnvelope, LatticeDirection, NormParams, composite_norm,
                            direction_refinement, direction_set, dual_exponent, envelope_from_alpha,
                            frequency_envelope, inner_product, intersection_space_norm,
                            lateral_norm, lattice_direction, lebesgue_norm, rescale_field,
                            space_time_norm, strichartz_exponent, sum_space_norm, time_space_norm,
                            velocity_set)
from smaplab.spectral import GridSpec, SpaceTimeField


def plane_wave(grid, frequency, times):
    """Free solution e^{i(f x_1 - f^2 t)}."""
    x1 = grid.coordinates()[0] + np.zeros(grid.shape)
    values = np.stack([np.exp(1j * (frequency * x1 - frequency ** 2 * t)) for t in times])
    return SpaceTimeField(values, times, grid)


def wave_packet(grid, times, seed=0):
    """Smooth random field with a Gaussian envelope in x and t."""
    rng = np.random.default_rng(seed)
    x = grid.coordinates()
    r2 = sum(c ** 2 for c in x)
    profile = np.exp(-r2) * (1 + 0.3 * rng.standard_normal(grid.shape))
    values = np.stack([profile * np.exp(-t ** 2 + 1j * t) for t in times])
    return SpaceTimeField(values, times, grid)


class TestExponentsAndDirections(unittest.TestCase):
    """Test cases for exponents and lattice directions."""

    def test_exponents(self):
        self.assertEqual(strichartz_exponent(2), 4.0)
        self.assertAlmostEqual(strichartz_exponent(3), 10.0 / 3.0)
        self.assertAlmostEqual(dual_exponent(4.0), 4.0 / 3.0)
        self.assertEqual(dual_exponent(1.0), INF)
        self.assertEqual(dual_exponent(INF), 1.0)

    def test_direction_sets(self):
        self.assertEqual(len(direction_set(2)), 8)
        self.assertEqual(len(direction_set(2, 16)), 16)
        self.assertEqual(len(direction_set(3)), 9)
        for direction in direction_set(2, 16):
            self.assertAlmostEqual(float(np.linalg.norm(direction.unit)), 1.0)
        with self.assertRaises(ConfigError):
            direction_set(2, 5)
        with self.assertRaises(ConfigError):
            direction_set(3, 8)

    def test_lattice_vectors(self):
        with self.assertRaises(DirectionSetError):
            LatticeDirection((0, 0))
        with self.assertRaises(DirectionSetError):
            LatticeDirection((2, 4))

    def test_identify_unit_vectors(self):
        s = 1.0 / np.sqrt(2.0)
        self.assertEqual(lattice_direction((s, s), 2).vector, (1, 1))
        self.assertEqual(lattice_direction((-s, -s), 2).vector, (-1, -1))
        self.assertEqual(lattice_direction((2 / np.sqrt(5), -1 / np.sqrt(5)), 2).vector, (2, -1))
        with self.assertRaises(DirectionSetError):
            lattice_direction((np.cos(0.1), np.sin(0.1)), 2)
        with self.assertRaises(InvalidDirectionError):
            lattice_direction((1.0, 1.0), 2)

    def test_leaf_labels(self):
        grid = GridSpec(2, 8, 1.0)
        labels = LatticeDirection((1, 0)).labels(grid).reshape(grid.shape)
        np.testing.assert_array_equal(labels[:, 0], np.arange(8))
        np.testing.assert_array_equal(labels[3], 3)


class TestLebesgueAndLateralNorms(unittest.TestCase):
    """Test cases for mixed-norm quadrature."""

    def setUp(self):
        self.grid = GridSpec(2, 32, 8.0)
        self.times = np.linspace(-1.0, 1.0, 9)
        self.u = wave_packet(self.grid, self.times)

    def test_plane_wave_norms(self):
        grid = GridSpec(2, 16, 2 * np.pi)
        u = plane_wave(grid, 2.0, np.linspace(-0.5, 0.5, 9))
        self.assertAlmostEqual(lebesgue_norm(u, INF), 1.0)
        self.assertAlmostEqual(time_space_norm(u, INF, 2.0), 2 * np.pi)
        self.assertAlmostEqual(lebesgue_norm(u, 2.0), 2 * np.pi, places=10)

    def test_equal_exponents_agree(self):
        for p in (1.0, 2.0, 4.0):
            expected = lebesgue_norm(self.u, p)
            self.assertAlmostEqual(time_space_norm(self.u, p, p), expected, places=10)
            self.assertAlmostEqual(space_time_norm(self.u, p, p), expected, places=10)

    def test_lateral_norm_with_equal_exponents(self):
        expected = lebesgue_norm(self.u, 2.0)
        for vector in ((1, 0), (1, 1), (2, -1)):
            e = LatticeDirection(vector)
            self.assertAlmostEqual(lateral_norm(self.u, 2.0, 2.0, e), expected, places=10)
        self.assertAlmostEqual(lateral_norm(self.u, INF, INF, (0.0, 1.0)), lebesgue_norm(self.u, INF))

    def test_inner_product(self):
        self.assertAlmostEqual(inner_product(self.u, self.u).real, lebesgue_norm(self.u, 2.0) ** 2)
        self.assertAlmostEqual(inner_product(self.u, self.u).imag, 0.0)

    def test_invalid_exponents(self):
        with self.assertRaises(ConfigError):
            lebesgue_norm(self.u, 0.5)
        with self.assertRaises(ConfigError):
            lateral_norm(self.u, 2.0, 0.0, (1.0, 0.0))

    def test_shift_preserves_energy_slices(self):
        shifted = lateral_norm(self.u, 2.0, 2.0, (1.0, 0.0), lam=0.5)
        self.assertAlmostEqual(shifted, lebesgue_norm(self.u, 2.0), places=8)


class TestVelocitySets(unittest.TestCase):
    """Test cases for velocity sets and sum / intersection spaces."""

    def setUp(self):
        self.grid = GridSpec(2, 32, 8.0)
        self.u = wave_packet(self.grid, np.linspace(-1.0, 1.0, 9))

    def test_complete_set(self):
        W = velocity_set(0, 1)
        self.assertEqual(len(W), 9)
        self.assertFalse(W.thinned)
        np.testing.assert_allclose(W.lambdas, np.arange(-4, 5) * 0.25)

    def test_thinned_set_keeps_endpoints(self):
        W = velocity_set(2, 2, 33)
        self.assertEqual(W.full_count, 513)
        self.assertEqual(len(W), 33)
        self.assertTrue(W.thinned)
        self.assertIn(0.0, W.lambdas)
        self.assertEqual(max(W.lambdas), 4.0)
        self.assertEqual(min(W.lambdas), -4.0)
        with self.assertRaises(ConfigError):
            velocity_set(2, 2, 2)

    def test_trivial_set(self):
        W = velocity_set(-3, 1)
        self.assertEqual(W.lambdas, (0.0,))
        expected = lateral_norm(self.u, 2.0, INF, (1.0, 0.0))
        self.assertAlmostEqual(sum_space_norm(self.u, 2.0, INF, (1.0, 0.0), W).value, expected)
        self.assertAlmostEqual(intersection_space_norm(self.u, 2.0, INF, (1.0, 0.0), W), expected)

    def test_sum_norm_bounded_by_single_speed(self):
        W = velocity_set(0, 1)
        e = (1.0, 0.0)
        bound = sum_space_norm(self.u, 2.0, INF, e, W)
        best = min(lateral_norm(self.u, 2.0, INF, e, lam) for lam in W.lambdas)
        self.assertLessEqual(bound.value, best * (1 + 1e-12))
        self.assertIn(bound.candidate, bound.candidates)
        self.assertEqual(set(bound.candidates), {"single", "even", "greedy-slab"})

    def test_sum_and_intersection_are_dual(self):
        """Test |<u, g>| is bounded by the sum norm of u times the dual intersection norm of g."""
        W = velocity_set(0, 1)
        e = (1.0, 0.0)
        for seed in (1, 2, 3):
            g = wave_packet(self.grid, self.u.times, seed)
            bound = (sum_space_norm(self.u, 2.0, INF, e, W, r=2.0).value
                     * intersection_space_norm(g, 2.0, 1.0, e, W, r=2.0))
            self.assertLessEqual(abs(inner_product(self.u, g)), bound * (1 + 1e-12))


class TestCompositeNorms(unittest.TestCase):
    """Test cases for F0, F, G, N and S on a frequency-localized field."""

    @classmethod
    def setUpClass(cls):
        cls.grid = GridSpec(2, 32, 2 * np.pi)
        cls.times = np.linspace(-0.5, 0.5, 9)
        cls.u = plane_wave(cls.grid, 4.0, cls.times)
        cls.params = NormParams(2)

    def test_parameter_validation(self):
        with self.assertRaises(ConfigError):
            NormParams(4)
        with self.assertRaises(ConfigError):
            NormParams(2, omega=0.7)
        with self.assertRaises(ConfigError):
            NormParams(2, K_cal=0)
        with self.assertRaises(ConfigError):
            composite_norm(self.u, 2, "H", self.params)
        with self.assertRaises(ConfigError):
            composite_norm(self.u, 2, "S", NormParams(3))

    def test_long_time_intervals_rejected(self):
        u = plane_wave(self.grid, 4.0, np.linspace(-5.0, 5.0, 9))
        with self.assertRaises(ConfigError):
            composite_norm(u, 2, "S", NormParams(2, K_cal=1))

    def test_leakage_rejected(self):
        with self.assertRaises(BandLeakageError):
            composite_norm(plane_wave(self.grid, 1.0, self.times), 2, "S", self.params)

    def test_strichartz_part(self):
        result = composite_norm(self.u, 2, "S", self.params)
        self.assertEqual(result.name, "S^0")
        self.assertAlmostEqual(result.components["LinfL2w"], 2 * np.pi)
        self.assertAlmostEqual(result.value, sum(result.components.values()))

    def test_f_is_at_most_f0(self):
        f0 = composite_norm(self.u, 2, "F0", self.params)
        f = composite_norm(self.u, 2, "F", self.params)
        self.assertEqual(f.direction_count, 8)
        self.assertIn("maximal_W", f0.components)
        self.assertLessEqual(f.value, f0.value * (1 + 1e-12))
        self.assertIn(f.candidate, f.components)

    def test_g_and_n_are_positive(self):
        g = composite_norm(self.u, 2, "G", self.params)
        n = composite_norm(self.u, 2, "N", self.params)
        self.assertGreater(g.value, 0.0)
        self.assertGreater(n.value, 0.0)
        self.assertLessEqual(n.value, n.components["all-L43"] * (1 + 1e-12))
        row = g.row("plane")
        self.assertEqual(row["norm"], "G")
        self.assertEqual(row["k"], 2)

    def test_direction_refinement(self):
        report = direction_refinement(self.u, 2, self.params)
        self.assertEqual(set(report), {"coarse", "fine", "relative_change"})
        self.assertGreaterEqual(report["relative_change"], 0.0)
        self.assertEqual(composite_norm(self.u, 2, "F0", replace(self.params, direction_count=2)).direction_count, 2)

    def test_three_dimensional_norms(self):
        grid = GridSpec(3, 16, 2 * np.pi)
        u = plane_wave(grid, 2.0, self.times)
        params = NormParams(3)
        f = composite_norm(u, 1, "F", params)
        self.assertEqual(f.candidate, "exact")
        self.assertEqual(set(f.components), {"LinfL2", "Lpd", "LpdxLinft", "maximal"})
        self.assertEqual(f.direction_count, 9)


class TestFrequencyEnvelopes(unittest.TestCase):
    """Test cases for frequency envelopes."""

    def test_envelope_dominates_and_varies_slowly(self):
        envelope = envelope_from_alpha({0: 1.0, 1: 0.0, 2: 0.0, 3: 0.5}, 0.0, 2)
        for k, a in envelope.alpha.items():
            self.assertGreaterEqual(envelope.gamma[k], a)
        self.assertLessEqual(envelope.slowly_varying_defect(), 1e-15)
        self.assertLessEqual(envelope.energy_ratio(), FrequencyEnvelope.geometric_constant(envelope.delta))
        self.assertAlmostEqual(envelope.gamma[1], 2.0 ** (-1.0 / 40.0))

    def test_envelope_of_plane_wave(self):
        grid = GridSpec(2, 32, 2 * np.pi)
        u = plane_wave(grid, 4.0, np.linspace(-0.5, 0.5, 9))
        envelope = frequency_envelope(u, grid, 0.0)
        self.assertEqual(sorted(envelope.alpha), [0, 1, 2, 3])
        self.assertAlmostEqual(envelope.alpha[2], 2 * np.pi)
        self.assertLess(envelope.alpha[1], 1e-10)
        weighted = frequency_envelope(u.values[0], grid, 1.0, gradient_of=True)
        self.assertAlmostEqual(weighted.alpha[2], 2 * np.pi * 4.0 * 4.0)

    def test_rescaled_field(self):
        grid = GridSpec(2, 16, 2 * np.pi)
        u = plane_wave(grid, 2.0, np.linspace(-0.5, 0.5, 9))
        scaled = rescale_field(u, 2.0)
        self.assertAlmostEqual(scaled.grid.box_length, np.pi)
        np.testing.assert_allclose(scaled.times, u.times / 4.0)

    def test_lateral_norm_scaling(self):
        """Test rescaling by mu multiplies the lateral norm by mu^-(1/p + (d+1)/q)."""
        u = wave_packet(GridSpec(2, 32, 8.0), np.linspace(-1.0, 1.0, 9))
        scaled = rescale_field(u, 2.0)
        for p, q in ((2.0, INF), (INF, 2.0), (4.0, 4.0)):
            exponent = (0.0 if p == INF else 1.0 / p) + (0.0 if q == INF else 3.0 / q)
            for e in ((1.0, 0.0), (np.sqrt(0.5), np.sqrt(0.5))):
                ratio = lateral_norm(scaled, p, q, e) / lateral_norm(u, p, q, e)
                self.assertAlmostEqual(ratio, 2.0 ** -exponent, places=10)


if __name__ == "__main__":
    unittest.main()
