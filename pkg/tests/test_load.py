"""
Tests for the result load module.
"""

import json
import os
import tempfile
import unittest
import shutil
import numpy as np
import pandas as pd

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from smaplab.results.extract import read_field_dump
from smaplab.results.load import (
    dump_paths,
    load_to_duckdb,
    load_to_parquet,
    query_duckdb,
    write_csv,
    write_field_dump,
    write_json,
)
from smaplab.spectral import GridSpec


class TestLoad(unittest.TestCase):
    """Test cases for persisting lab outputs."""

    def setUp(self):
        """Create temporary directory and sample tables for testing."""
        self.temp_dir = tempfile.mkdtemp()
        self.tables = {
            "fact_conservation": pd.DataFrame({
                "scenario": ["gaussian_bump", "gaussian_bump"],
                "t": [0.0, 1.0],
                "E0": [2.0, 2.0],
                "E1": [4.0, 4.0],
                "sphere_drift": [0.0, 1e-16],
                "boundary_tail": [1e-9, 2e-9],
                "E0_rel_drift": [0.0, 1e-9],
                "E1_rel_drift": [0.0, -2e-9],
            }),
            "fact_probes": pd.DataFrame({
                "estimate": ["linst", "linst"],
                "d": [2, 2],
                "k": [2, 3],
                "max_ratio": [1.0, 1.1],
                "slope": [0.1, 0.1],
                "ensemble": [32, 32],
            }),
        }

    def tearDown(self):
        """Clean up temporary files."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_field_dump_layout(self):
        """Test byte layout and sidecar of a complex dump."""
        grid = GridSpec(2, 8, 1.0)
        values = np.arange(64).reshape(grid.shape) * (1 + 2j)
        stem = os.path.join(self.temp_dir, "fields", "u_h0.01")
        data_path = write_field_dump(stem, values, grid, time=0.5, extra={"kind": "test"})
        self.assertEqual(data_path.name, "u_h0.01.bin")
        self.assertEqual(os.path.getsize(data_path), 2 * 64 * 8)
        with open(dump_paths(stem)[1]) as f:
            sidecar = json.load(f)
        self.assertEqual(sidecar["components"], 1)
        self.assertTrue(sidecar["complex"])
        self.assertEqual(sidecar["kind"], "test")
        restored, _ = read_field_dump(stem)
        np.testing.assert_array_equal(restored[0], values)

    def test_write_json_is_canonical(self):
        """Test sorted keys and numpy values."""
        path = write_json({"b": np.float64(1.5), "a": np.arange(3), "c": (1, 2)},
                          os.path.join(self.temp_dir, "out.json"), quiet=True)
        text = path.read_text()
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(json.loads(text), {"a": [0, 1, 2], "b": 1.5, "c": [1, 2]})
        with self.assertRaises(TypeError):
            write_json({"x": object()}, os.path.join(self.temp_dir, "bad.json"), quiet=True)

    def test_write_csv_keeps_precision(self):
        """Test CSV output from records."""
        path = os.path.join(self.temp_dir, "rows.csv")
        write_csv([{"s": 0.1, "L2": 1.2345678901234567e-13}], path, quiet=True)
        df = pd.read_csv(path)
        self.assertAlmostEqual(df["L2"].iloc[0] / 1.2345678901234567e-13, 1.0, places=12)

    def test_load_to_parquet(self):
        """Test loading tables to Parquet format."""
        output_dir = os.path.join(self.temp_dir, "parquet")
        load_to_parquet(self.tables, output_dir)
        for table_name in self.tables:
            parquet_file = os.path.join(output_dir, f"{table_name}.parquet")
            self.assertTrue(os.path.exists(parquet_file))
            df = pd.read_parquet(parquet_file)
            self.assertEqual(len(df), len(self.tables[table_name]))

    def test_load_to_duckdb_creates_views(self):
        """Test loading tables into DuckDB with analysis views."""
        db_path = os.path.join(self.temp_dir, "lab.duckdb")
        views = load_to_duckdb(self.tables, db_path)
        self.assertEqual(sorted(views), ["vw_conservation_drift", "vw_probe_slopes"])
        drift = query_duckdb(db_path, "SELECT * FROM vw_conservation_drift")
        self.assertEqual(len(drift), 1)
        self.assertAlmostEqual(drift["max_E1_drift"].iloc[0], 2e-9)
        slopes = query_duckdb(db_path, "SELECT * FROM vw_probe_slopes")
        self.assertEqual(int(slopes["k_max"].iloc[0]), 3)

    def test_reload_replaces_tables(self):
        """Test that loading twice does not duplicate rows."""
        db_path = os.path.join(self.temp_dir, "lab.duckdb")
        load_to_duckdb(self.tables, db_path)
        load_to_duckdb(self.tables, db_path)
        result = query_duckdb(db_path, "SELECT COUNT(*) AS count FROM fact_probes")
        self.assertEqual(result["count"].iloc[0], 2)

    def test_invalid_table_name(self):
        """Test that table names must be identifiers."""
        with self.assertRaises(ValueError):
            load_to_parquet({"bad name": pd.DataFrame({"a": [1]})}, self.temp_dir)
        with self.assertRaises(ValueError):
            load_to_duckdb({"x; DROP": pd.DataFrame({"a": [1]})}, os.path.join(self.temp_dir, "x.duckdb"))


if __name__ == "__main__":
    unittest.main()
