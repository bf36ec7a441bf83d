"""
Tests for the experiment runner.
"""

import io
import json
import os
import shutil
import sys
import tempfile
import unittest
from contextlib import redirect_stdout, redirect_stderr

import numpy as np
import yaml

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from run_lab import build_overrides, helical_order_kappa, main, refinement_checks, run_dir_for  # noqa: E402
from smaplab.config import load_config  # noqa: E402
from smaplab.results.extract import extract_checkpoints  # noqa: E402
from smaplab.spectral import GridSpec  # noqa: E402
from validate_json import validate_record  # noqa: E402


class TestRunLab(unittest.TestCase):
    """Test cases for running subcommands end to end on small grids."""

    def setUp(self):
        """Create temporary directory and a small configuration."""
        self.temp_dir = tempfile.mkdtemp()
        self.out = os.path.join(self.temp_dir, "results")
        self.settings = {
            "scenario": "constant",
            "grid": {"d": 2, "n": 16, "box_length": 8.0},
            "run": {"T": 0.02, "cadence": 2},
            "outputs": {"dir": self.out},
            "pipeline": {"fail_on_gate": False, "verbose": False},
        }

    def tearDown(self):
        """Clean up temporary files."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def write_config(self, settings):
        path = os.path.join(self.temp_dir, "config.yaml")
        with open(path, "w") as f:
            yaml.safe_dump(settings, f)
        return path

    def run_main(self, argv):
        with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
            return main(argv)

    def read_json(self, *parts):
        with open(os.path.join(*parts)) as f:
            return json.load(f)

    def test_run_dirs(self):
        """Test where each command writes."""
        config = load_config(overrides={"outputs": {"dir": self.out}})
        self.assertEqual(run_dir_for(config, "evolve").name, "gaussian_bump")
        self.assertEqual(run_dir_for(config, "probe").name, "probes")
        self.assertEqual(run_dir_for(config, "report").name, "report")

    def test_build_overrides(self):
        """Test command-line flags become configuration overrides."""
        class Args:
            seed, workers, out = 3, None, "elsewhere"
        self.assertEqual(build_overrides(Args()), {"run": {"seed": 3}, "outputs": {"dir": "elsewhere"}})

    def test_evolve_constant_map(self):
        """Test the constant map evolves with zero energy and writes its records."""
        code = self.run_main(["evolve", "--config", self.write_config(self.settings)])
        self.assertEqual(code, 0)
        run_dir = os.path.join(self.out, "constant")
        for name in ("conservation.csv", "evolve_summary.json", "gates.json", "manifest.json"):
            self.assertTrue(os.path.exists(os.path.join(run_dir, name)), name)
        self.assertFalse(os.path.exists(os.path.join(run_dir, "error.json")))
        manifest = self.read_json(run_dir, "manifest.json")
        self.assertEqual(validate_record(manifest), [])
        self.assertIn("conservation.csv", manifest["outputs"])
        self.assertTrue(self.read_json(run_dir, "gates.json")["is_valid"])
        self.assertLess(self.read_json(run_dir, "evolve_summary.json")["E1_final"], 1e-20)
        self.assertGreaterEqual(len(extract_checkpoints(os.path.join(run_dir, "checkpoints"))), 2)

    def test_gauge_stage(self):
        """Test the caloric gauge stage writes every diagnostic table."""
        settings = dict(self.settings, scenario="gaussian_bump", grid={"d": 2, "n": 32, "box_length": 8.0})
        code = self.run_main(["gauge", "--config", self.write_config(settings)])
        self.assertEqual(code, 0)
        run_dir = os.path.join(self.out, "gaussian_bump")
        for name in ("caloric.csv", "heat_diagnostics.csv", "dyadic_decay.csv", "residuals.csv",
                     "connection.csv", "covariance.json", "coulomb.json", "gates.json"):
            self.assertTrue(os.path.exists(os.path.join(run_dir, name)), name)
        covariance = self.read_json(run_dir, "covariance.json")
        self.assertAlmostEqual(covariance["mass"]["derivative_mass"] / covariance["mass"]["E1"], 1.0, places=8)
        checks = self.read_json(run_dir, "gates.json")["checks"]
        for name in ("caloric_condition", "integral_representation", "covariance"):
            self.assertTrue(checks[name]["valid"], checks[name]["errors"])

    def test_helical_order_uses_a_resolved_wavenumber(self):
        """Test the helical order check runs above round-off and sees fourth order."""
        settings = dict(self.settings, scenario="helical", grid={"d": 2, "n": 32, "box_length": 6.283185307179586},
                        run={"T": 0.05})
        config = load_config(self.write_config(settings))
        self.assertAlmostEqual(helical_order_kappa(config.grid), 8.0)
        self.assertAlmostEqual(helical_order_kappa(GridSpec(2, 16, 2 * np.pi)), 4.0)
        is_valid, errors = refinement_checks(config)["helical_order"]
        self.assertTrue(is_valid, errors)

    def test_gauge_needs_a_gauge_scenario(self):
        """Test the helical scenario is rejected by the gauge stage."""
        settings = dict(self.settings, scenario="helical")
        code = self.run_main(["gauge", "--config", self.write_config(settings)])
        self.assertEqual(code, 2)
        self.assertEqual(self.read_json(self.out, "helical", "error.json")["error_type"], "ConfigError")

    def test_norms_stage(self):
        """Test composite norms and envelopes are written for one band."""
        settings = dict(self.settings, scenario="gaussian_bump", grid={"d": 2, "n": 32, "box_length": 8.0},
                        run={"T": 0.02, "norm_ks": [1], "omegas": [0.0], "norm_time_nodes": 9,
                             "norm_half_width": 0.0625})
        code = self.run_main(["norms", "--config", self.write_config(settings)])
        self.assertEqual(code, 0)
        run_dir = os.path.join(self.out, "gaussian_bump")
        for name in ("norms.csv", "direction_refinement.csv", "envelope.csv"):
            self.assertTrue(os.path.exists(os.path.join(run_dir, name)), name)

    def test_report_after_evolve(self):
        """Test the report collects earlier runs into tables and a database."""
        config_path = self.write_config(self.settings)
        self.assertEqual(self.run_main(["evolve", "--config", config_path]), 0)
        self.assertEqual(self.run_main(["report", "--config", config_path]), 0)
        report_dir = os.path.join(self.out, "report")
        for name in ("fact_conservation.csv", "lab.duckdb", "lab_summary.json"):
            self.assertTrue(os.path.exists(os.path.join(report_dir, name)), name)
        summary = self.read_json(report_dir, "lab_summary.json")
        self.assertEqual([run["scenario"] for run in summary["runs"]], ["constant"])
        self.assertEqual(validate_record(summary), [])

    def test_config_reference(self):
        """Test the reference page is written instead of a report."""
        reference = os.path.join(self.temp_dir, "CONFIG_REFERENCE.md")
        code = self.run_main(["report", "--config", self.write_config(self.settings),
                              "--reference", reference])
        self.assertEqual(code, 0)
        with open(reference) as f:
            self.assertIn("`grid.n`", f.read())

    def test_bad_config_exit_code(self):
        """Test an unknown key stops the run with exit code 2 and an error record."""
        settings = dict(self.settings, grid={"d": 2, "n": 16, "boxlength": 8.0})
        code = self.run_main(["evolve", "--config", self.write_config(settings), "--out", self.out])
        self.assertEqual(code, 2)
        record = self.read_json(self.out, "error.json")
        self.assertEqual(record["error_type"], "ConfigError")
        self.assertEqual(validate_record(record), [])

    def test_missing_config_file(self):
        """Test a missing configuration file is a configuration error."""
        code = self.run_main(["evolve", "--config", os.path.join(self.temp_dir, "nope.yaml"),
                              "--out", self.out])
        self.assertEqual(code, 2)
        self.assertEqual(self.read_json(self.out, "error.json")["error_type"], "FileNotFoundError")

    def test_estimate_outside_its_dimension(self):
        """Test a two-dimensional estimate requested in d=3 fails before probing."""
        settings = dict(self.settings, grid={"d": 3, "n": 16, "box_length": 8.0},
                        probe={"estimates": ["linnew"], "n": 16, "box_length": 8.0})
        code = self.run_main(["probe", "--config", self.write_config(settings)])
        self.assertEqual(code, 2)
        probe_dir = os.path.join(self.out, "probes")
        self.assertEqual(self.read_json(probe_dir, "error.json")["exit_code"], 2)
        self.assertEqual(self.read_json(probe_dir, "manifest.json")["command"], "probe")


if __name__ == "__main__":
    unittest.main()
