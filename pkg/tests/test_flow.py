"""
Tests for the Schrödinger map flow.
"""

import os
import unittest

import numpy as np

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from smaplab.errors import ConfigError, ConstraintError
from smaplab.flow import (FlowState, SphereField, boundary_tail, energy_E0, energy_E1, evolve,
                          evolve_linearized, helical_wave, linearized_rhs, reversal_error, smap_rhs,
                          sobolev_distance, sphere_drift, tangent_derivative)
from smaplab.spectral import GridSpec, l2_norm

from generate_scenarios import gaussian_bump


class TestSphereField(unittest.TestCase):
    """Test cases for sphere-valued fields."""

    def setUp(self):
        self.grid = GridSpec(2, 16, 2 * np.pi)

    def test_rejects_off_sphere_values(self):
        phi = np.zeros((3,) + self.grid.shape)
        phi[2] = 1.1
        with self.assertRaises(ConstraintError):
            SphereField(phi, self.grid)

    def test_rejects_bad_shapes_and_base_points(self):
        with self.assertRaises(ConfigError):
            SphereField(np.ones((3, 8, 8)), self.grid)
        with self.assertRaises(ConfigError):
            SphereField.constant(self.grid, (0.0, 0.0, 2.0))

    def test_constant_field_is_stationary(self):
        field = SphereField.constant(self.grid)
        self.assertEqual(float(np.max(np.abs(smap_rhs(field)))), 0.0)
        self.assertEqual(energy_E0(field), 0.0)
        self.assertEqual(energy_E1(field), 0.0)
        self.assertEqual(boundary_tail(field), 0.0)
        final = evolve(FlowState(field), 0.01)
        np.testing.assert_array_equal(final.field.phi, field.phi)

    def test_from_vectors_normalizes(self):
        vectors = np.zeros((3,) + self.grid.shape)
        vectors[0] = 2.0
        field = SphereField.from_vectors(vectors, self.grid)
        self.assertLess(sphere_drift(field.phi), 1e-15)


class TestHelicalSolution(unittest.TestCase):
    """Test cases against the exact helical solution."""

    def setUp(self):
        self.grid = GridSpec(2, 32, 2 * np.pi)
        self.theta = np.pi / 4

    def test_right_hand_side_matches_time_derivative(self):
        field = helical_wave(self.grid, 1.0, self.theta)
        x1 = self.grid.coordinates()[0] + np.zeros(self.grid.shape)
        omega = np.cos(self.theta)
        expected = omega * np.sin(self.theta) * np.stack([np.sin(x1), -np.cos(x1), np.zeros_like(x1)])
        np.testing.assert_allclose(smap_rhs(field), expected, atol=1e-12)

    def test_energy(self):
        field = helical_wave(self.grid, 1.0, self.theta)
        self.assertAlmostEqual(energy_E1(field), 0.5 * (2 * np.pi) ** 2, places=9)

    def test_evolution_tracks_exact_solution(self):
        initial = helical_wave(self.grid, 1.0, self.theta)
        final = evolve(FlowState(initial), 0.1)
        exact = helical_wave(self.grid, 1.0, self.theta, 0.1)
        self.assertLess(l2_norm(final.field.phi - exact.phi, self.grid), 1e-9)
        self.assertAlmostEqual(final.t, 0.1)

    def test_unresolved_wavenumber(self):
        with self.assertRaises(ConfigError):
            helical_wave(GridSpec(2, 32, 16.0), 1.0, self.theta)


class TestEvolve(unittest.TestCase):
    """Test cases for the RK4 integrator."""

    def setUp(self):
        self.grid = GridSpec(2, 32, 8.0)
        self.field = gaussian_bump(self.grid, 0.05, 1.0)

    def test_energies_are_conserved(self):
        final = evolve(FlowState(self.field), 0.05)
        for energy in (energy_E0, energy_E1):
            before, after = energy(self.field), energy(final.field)
            self.assertLess(abs(after - before) / before, 1e-6)

    def test_callbacks_follow_cadence(self):
        seen = []
        dt = self.grid.dt_hint
        final = evolve(FlowState(self.field), 10 * dt, dt, [lambda s: seen.append(s.step_count)], cadence=5)
        self.assertEqual(seen, [0, 5, 10])
        self.assertEqual(final.step_count, 10)

    def test_backward_evolution_and_reversal(self):
        back = evolve(FlowState(self.field), -0.01)
        self.assertAlmostEqual(back.t, -0.01)
        self.assertLess(reversal_error(FlowState(self.field), 0.02), 1e-8)

    def test_stability_bound(self):
        with self.assertRaises(ConfigError):
            evolve(FlowState(self.field), 1.0, dt=0.5)

    def test_linearized_translation_mode(self):
        lin = tangent_derivative(self.field, 0)
        final, lin_final = evolve_linearized(FlowState(self.field), lin, 0.02)
        np.testing.assert_allclose(lin_final, tangent_derivative(final.field, 0), atol=1e-7)

    def test_linearized_requires_tangent_field(self):
        with self.assertRaises(ConstraintError):
            linearized_rhs(self.field, self.field.phi)

    def test_linearized_is_derivative_of_flow(self):
        """Test the difference quotient of the flow approaches the linearization at O(h)."""
        direction = np.cross(self.field.phi, np.array([1.0, 0.0, 0.0]).reshape(3, 1, 1), axis=0)
        lin = linearized_rhs(self.field, direction)
        errors = []
        for h in (1e-3, 5e-4):
            moved = SphereField.from_vectors(self.field.phi + h * direction, self.grid, self.field.base_point)
            errors.append(l2_norm((smap_rhs(moved) - smap_rhs(self.field)) / h - lin, self.grid))
        self.assertAlmostEqual(errors[0] / errors[1], 2.0, delta=0.1)

    def test_sobolev_distance(self):
        other = evolve(FlowState(self.field), 0.01).field
        self.assertEqual(sobolev_distance(self.field, self.field, 0.0), 0.0)
        self.assertAlmostEqual(sobolev_distance(self.field, other, 0.0),
                               l2_norm(self.field.phi - other.phi, self.grid), places=10)


if __name__ == "__main__":
    unittest.main()
