"""
Result extraction module.

Reads field dumps, checkpoint series and the CSV/JSON outputs of earlier
lab runs back into arrays and DataFrames.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from ...errors import ConfigError
from ...flow import SphereField
from ...spectral import GridSpec
from ..load import SIDECAR_SUFFIX, dump_paths

RUN_CSV_FILES = ("conservation", "residuals", "connection", "caloric", "heat_diagnostics",
                 "dyadic_decay", "norms", "envelope", "lipschitz", "direction_refinement")
RUN_JSON_FILES = ("probes", "duhamel", "covariance", "evolve_summary", "coulomb", "gates", "manifest")


def read_field_dump(stem: Union[str, Path]) -> Tuple[np.ndarray, Dict[str, Any]]:
    """
    Read a field dump written by write_field_dump.

    Returns:
        Tuple of (values with shape (components,) + grid.shape, sidecar dict)

    Raises:
        FileNotFoundError: If the binary or its sidecar is missing
        ConfigError: If the byte count does not match the sidecar
    """
    data_path, meta_path = dump_paths(stem)
    for path in (data_path, meta_path):
        if not path.exists():
            raise FileNotFoundError(f"File not found: {path}")
    with open(meta_path, "r") as f:
        meta = json.load(f)
    grid = sidecar_grid(meta)
    raw = np.fromfile(data_path, dtype="<f8")
    stored = meta["components"] * (2 if meta.get("complex") else 1)
    expected = stored * grid.n ** grid.d
    if raw.size != expected:
        raise ConfigError(f"{data_path} holds {raw.size} values, sidecar implies {expected}")
    values = raw.reshape((stored,) + grid.shape)
    if meta.get("complex"):
        pairs = values.reshape((meta["components"], 2) + grid.shape)
        values = pairs[:, 0] + 1j * pairs[:, 1]
    return values, meta


def sidecar_grid(meta: Dict[str, Any]) -> GridSpec:
    try:
        return GridSpec(int(meta["d"]), int(meta["n"]), float(meta["box_length"]))
    except KeyError as e:
        raise ConfigError(f"Field sidecar is missing {e}")


def read_sphere_field(stem: Union[str, Path]) -> Tuple[SphereField, Dict[str, Any]]:
    """Read a three-component dump as a SphereField (base point from the sidecar)."""
    values, meta = read_field_dump(stem)
    if values.shape[0] != 3:
        raise ConfigError(f"Sphere fields need 3 components, dump has {values.shape[0]}")
    base_point = tuple(meta.get("base_point", (0.0, 0.0, 1.0)))
    return SphereField(values, sidecar_grid(meta), base_point), meta


def extract_checkpoints(checkpoint_dir: str) -> List[Tuple[float, SphereField]]:
    """
    Read every checkpoint in a directory, ordered by time.

    Raises:
        FileNotFoundError: If the directory does not exist
    """
    if not os.path.exists(checkpoint_dir):
        raise FileNotFoundError(f"Checkpoint directory not found: {checkpoint_dir}")
    out = []
    for sidecar in sorted(Path(checkpoint_dir).glob(f"phi_*{SIDECAR_SUFFIX}")):
        field, meta = read_sphere_field(sidecar.parent / sidecar.name[:-len(SIDECAR_SUFFIX)])
        out.append((float(meta.get("time") or 0.0), field))
    return sorted(out, key=lambda item: item[0])


def extract_run_outputs(run_dir: str) -> Dict[str, Any]:
    """
    Collect the CSV tables and JSON records present in a run directory.

    Returns:
        Dictionary keyed by file stem: DataFrames for CSV files, parsed JSON otherwise

    Raises:
        FileNotFoundError: If the run directory does not exist
    """
    if not os.path.exists(run_dir):
        raise FileNotFoundError(f"Run directory not found: {run_dir}")
    path = Path(run_dir)
    outputs: Dict[str, Any] = {}
    for name in RUN_CSV_FILES:
        csv_path = path / f"{name}.csv"
        if csv_path.exists():
            outputs[name] = pd.read_csv(csv_path)
            print(f"Extracted: {csv_path.name} ({len(outputs[name])} rows)")
    for name in RUN_JSON_FILES:
        json_path = path / f"{name}.json"
        if json_path.exists():
            with open(json_path, "r") as f:
                outputs[name] = json.load(f)
            print(f"Extracted: {json_path.name}")
    return outputs


def extract_runs(results_dir: str) -> Dict[str, Dict[str, Any]]:
    """
    Outputs of every run directory (one per scenario) below results_dir.

    Raises:
        FileNotFoundError: If results_dir does not exist
    """
    if not os.path.exists(results_dir):
        raise FileNotFoundError(f"Results directory not found: {results_dir}")
    runs = {}
    for child in sorted(Path(results_dir).iterdir()):
        if child.is_dir() and (child / "manifest.json").exists():
            runs[child.name] = extract_run_outputs(str(child))
    if not runs and (Path(results_dir) / "manifest.json").exists():
        runs[Path(results_dir).name] = extract_run_outputs(results_dir)
    return runs
