"""
Tests for the result transform module.
"""

import os
import unittest
import pandas as pd
import numpy as np

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from smaplab.results.transform import (
    create_dim_run,
    create_fact_conservation,
    create_fact_probes,
    create_fact_residuals,
    probe_slope_table,
    relative_drift,
    transform_all,
)


class TestTransform(unittest.TestCase):
    """Test cases for result table construction."""

    def setUp(self):
        """Create sample extracted runs for testing."""
        self.runs = {
            "gaussian_bump": {
                "conservation": pd.DataFrame({
                    "t": [0.0, 0.5, 1.0],
                    "E0": [2.0, 2.0, 2.0 + 2e-8],
                    "E1": [4.0, 4.0 - 4e-8, 4.0],
                    "sphere_drift": [0.0, 1e-16, 1e-16],
                    "boundary_tail": [1e-9, 1e-9, 1e-9],
                    "step": [0, 10, 20],
                }),
                "residuals": pd.DataFrame({
                    "identity": ["id1", "id3"], "s": [0.0, 0.0], "L2": [1e-12, 2e-12],
                    "Linf": [1e-11, 3e-11], "n": [64, 64], "dt": [None, None],
                }),
                "manifest": {
                    "command": "gauge", "config_hash": "ab" * 32, "seed": 0, "wall_time_s": 1.5,
                    "versions": {"numpy": "1.26.4", "scipy": "1.13.0"},
                },
            },
            "probes": {
                "probes": [
                    {"estimate": "linst", "d": 2, "K_cal": 2, "k": 2, "max_ratio": 1.0, "mean_ratio": 0.8,
                     "slope": 0.01, "ensemble": 32, "seed": 0, "T": 0.0625},
                    {"estimate": "linst", "d": 2, "K_cal": 2, "k": 3, "max_ratio": 2.0, "mean_ratio": 1.5,
                     "slope": 0.01, "ensemble": 32, "seed": 0, "T": 0.015625},
                ],
            },
        }

    def test_relative_drift(self):
        """Test relative drift and the vanishing-reference case."""
        np.testing.assert_allclose(relative_drift(pd.Series([2.0, 2.2, 1.8])), [0.0, 0.1, -0.1])
        np.testing.assert_allclose(relative_drift(pd.Series([0.0, 1e-9])), [0.0, 1e-9])

    def test_create_fact_conservation(self):
        """Test conservation records get a scenario and drift columns."""
        fact = create_fact_conservation(self.runs)
        self.assertEqual(len(fact), 3)
        self.assertEqual(set(fact["scenario"]), {"gaussian_bump"})
        self.assertNotIn("step", fact.columns)
        self.assertAlmostEqual(fact["E0_rel_drift"].iloc[-1], 1e-8)
        self.assertAlmostEqual(fact["E1_rel_drift"].iloc[1], -1e-8)

    def test_stacked_tables(self):
        """Test residual and probe tables are stacked across runs."""
        residuals = create_fact_residuals(self.runs)
        self.assertEqual(list(residuals["scenario"]), ["gaussian_bump", "gaussian_bump"])
        probes = create_fact_probes(self.runs)
        self.assertEqual(len(probes), 2)
        self.assertEqual(probes["scenario"].iloc[0], "probes")

    def test_create_dim_run(self):
        """Test one row per manifest."""
        dim = create_dim_run(self.runs)
        self.assertEqual(len(dim), 1)
        self.assertEqual(dim["command"].iloc[0], "gauge")
        self.assertEqual(dim["numpy_version"].iloc[0], "1.26.4")

    def test_probe_slope_table(self):
        """Test the plot-ready probe table."""
        table = probe_slope_table(create_fact_probes(self.runs))
        np.testing.assert_allclose(table["log2_max_ratio"], [0.0, 1.0])
        self.assertEqual(list(table.columns), ["estimate", "k", "log2_max_ratio", "slope"])

    def test_transform_all_on_empty_runs(self):
        """Test that missing outputs give empty tables with columns."""
        tables = transform_all({})
        self.assertEqual(set(tables), {"dim_run", "fact_conservation", "fact_residuals", "fact_probes",
                                       "fact_norms", "fact_connection", "fact_envelope", "plot_probe_slopes"})
        for df in tables.values():
            self.assertTrue(df.empty)
            self.assertIn("scenario" if "estimate" not in df.columns else "estimate", df.columns)


if __name__ == "__main__":
    unittest.main()
