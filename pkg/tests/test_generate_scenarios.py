"""
Tests for the scenario initial-data generator.
"""

import os
import tempfile
import shutil
import unittest

import numpy as np

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from generate_scenarios import (build_initial, build_pairs, check_smallness, gaussian_bump,
                                nearby_pair, random_band, tangent_bump, write_scenario)
from smaplab.config import load_config
from smaplab.errors import ConfigError
from smaplab.flow import energy_E1, sphere_drift
from smaplab.results.extract import read_sphere_field
from smaplab.spectral import GridSpec, l2_norm

SMALL_GRID = {"grid": {"n": 32, "box_length": 8.0}}


class TestInitialData(unittest.TestCase):
    """Test cases for the initial maps."""

    def setUp(self):
        self.grid = GridSpec(2, 32, 8.0)

    def test_gaussian_bump(self):
        """Test the twisted bump stays within its amplitude of Q."""
        field = gaussian_bump(self.grid, 0.05, 1.0)
        self.assertLess(sphere_drift(field.phi), 1e-14)
        self.assertEqual(tuple(field.base_point), (0.0, 0.0, 1.0))
        deviation = np.linalg.norm(field.phi - np.asarray(field.q).reshape(3, 1, 1), axis=0)
        self.assertLessEqual(float(deviation.max()), 0.05)
        self.assertGreater(energy_E1(field), 0.0)

    def test_tangent_bump_is_tangent(self):
        """Test the perturbation direction is tangent to the map."""
        field = gaussian_bump(self.grid, 0.05, 1.0)
        b = tangent_bump(field, 1.0, (1.0, 0.0, 0.0))
        self.assertLess(float(np.max(np.abs(np.sum(field.phi * b, axis=0)))), 1e-14)

    def test_nearby_pair_distance_scales_with_h(self):
        """Test the pair distance is linear in h."""
        base, far = nearby_pair(self.grid, 0.05, 1.0, 1e-2)
        _, near = nearby_pair(self.grid, 0.05, 1.0, 5e-3)
        d_far = l2_norm(far.phi - base.phi, self.grid)
        d_near = l2_norm(near.phi - base.phi, self.grid)
        self.assertAlmostEqual(d_far / d_near, 2.0, places=2)
        self.assertEqual(far.base_point, base.base_point)

    def test_random_band_is_reproducible(self):
        """Test that the seed fixes the random map."""
        first = random_band(self.grid, 1, 0.05, seed=4)
        second = random_band(self.grid, 1, 0.05, seed=4)
        other = random_band(self.grid, 1, 0.05, seed=5)
        np.testing.assert_array_equal(first.phi, second.phi)
        self.assertFalse(np.array_equal(first.phi, other.phi))

    def test_smallness(self):
        """Test the gauge smallness check."""
        small = gaussian_bump(self.grid, 0.05, 1.0)
        self.assertAlmostEqual(check_smallness(small), float(np.sqrt(energy_E1(small))))
        with self.assertRaises(ConfigError):
            check_smallness(gaussian_bump(self.grid, 0.9, 0.3))


class TestBuildFromConfig(unittest.TestCase):
    """Test cases for building scenarios from configuration."""

    def setUp(self):
        """Create temporary directory for test outputs."""
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up temporary files."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_every_scenario_builds(self):
        """Test each scenario on a grid that resolves it."""
        for scenario in ("constant", "gaussian_bump", "nearby_pair", "random_band"):
            config = load_config(overrides=dict(SMALL_GRID, scenario=scenario, physics={"band_k": 1}))
            field = build_initial(config)
            self.assertEqual(field.grid.n, 32)
        helical = load_config(overrides={"scenario": "helical",
                                         "grid": {"n": 32, "box_length": 2 * np.pi}})
        self.assertAlmostEqual(energy_E1(build_initial(helical)), 0.5 * (2 * np.pi) ** 2, places=8)

    def test_helical_base_point(self):
        """Test that the helical scenario requires the north pole."""
        config = load_config(overrides={"scenario": "helical",
                                        "grid": {"n": 32, "box_length": 2 * np.pi},
                                        "physics": {"Q": [1.0, 0.0, 0.0], "Q_prime": [0.0, 0.0, 1.0]}})
        with self.assertRaises(ConfigError):
            build_initial(config)

    def test_pairs_follow_h_values(self):
        """Test one pair per configured h."""
        config = load_config(overrides=dict(SMALL_GRID, scenario="nearby_pair"))
        self.assertEqual(sorted(build_pairs(config)), [5e-3, 1e-2])

    def test_write_scenario_round_trip(self):
        """Test dumps written for a pair scenario read back unchanged."""
        config = load_config(overrides=dict(SMALL_GRID, scenario="nearby_pair"))
        written = write_scenario(config, self.temp_dir, quiet=True)
        self.assertEqual(set(written), {"nearby_pair", "nearby_pair_h0.01", "nearby_pair_h0.005"})
        field, meta = read_sphere_field(os.path.join(self.temp_dir, "nearby_pair"))
        np.testing.assert_array_equal(field.phi, build_initial(config).phi)
        self.assertEqual(meta["scenario"], "nearby_pair")
        self.assertEqual(meta["time"], 0.0)


if __name__ == "__main__":
    unittest.main()
