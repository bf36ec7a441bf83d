"""
Result transformation module.

Turns the raw outputs of lab runs into tidy tables keyed by scenario, ready
for plotting, Parquet and DuckDB.
"""

from typing import Any, Dict, List

import numpy as np
import pandas as pd

CONSERVATION_COLUMNS = ["t", "E0", "E1", "sphere_drift", "boundary_tail"]
RESIDUAL_COLUMNS = ["identity", "s", "L2", "Linf", "n", "dt"]
PROBE_COLUMNS = ["estimate", "d", "K_cal", "k", "max_ratio", "mean_ratio", "slope", "ensemble", "seed", "T"]
NORM_COLUMNS = ["scenario", "k", "norm", "directions", "value", "candidate"]


def relative_drift(values: pd.Series) -> pd.Series:
    """(E - E(0)) / E(0), or the absolute change when E(0) vanishes."""
    ref = float(values.iloc[0]) if len(values) else 0.0
    if ref == 0.0:
        return values - ref
    return (values - ref) / abs(ref)


def create_fact_conservation(runs: Dict[str, Dict[str, Any]]) -> pd.DataFrame:
    """Conservation samples with relative energy drifts."""
    frames = []
    for scenario, outputs in runs.items():
        df = outputs.get("conservation")
        if df is None or df.empty:
            continue
        df = df[CONSERVATION_COLUMNS].copy()
        df.insert(0, "scenario", scenario)
        df["E0_rel_drift"] = relative_drift(df["E0"])
        df["E1_rel_drift"] = relative_drift(df["E1"])
        frames.append(df)
    if not frames:
        return pd.DataFrame(columns=["scenario"] + CONSERVATION_COLUMNS + ["E0_rel_drift", "E1_rel_drift"])
    return pd.concat(frames, ignore_index=True)


def _stack(runs: Dict[str, Dict[str, Any]], key: str, columns: List[str]) -> pd.DataFrame:
    frames = []
    for scenario, outputs in runs.items():
        raw = outputs.get(key)
        if raw is None:
            continue
        df = raw.copy() if isinstance(raw, pd.DataFrame) else pd.DataFrame(raw)
        if df.empty:
            continue
        if "scenario" not in df.columns:
            df.insert(0, "scenario", scenario)
        frames.append(df)
    if not frames:
        return pd.DataFrame(columns=["scenario"] + [c for c in columns if c != "scenario"])
    return pd.concat(frames, ignore_index=True)


def create_fact_residuals(runs: Dict[str, Dict[str, Any]]) -> pd.DataFrame:
    return _stack(runs, "residuals", RESIDUAL_COLUMNS)


def create_fact_probes(runs: Dict[str, Dict[str, Any]]) -> pd.DataFrame:
    return _stack(runs, "probes", PROBE_COLUMNS)


def create_fact_norms(runs: Dict[str, Dict[str, Any]]) -> pd.DataFrame:
    return _stack(runs, "norms", NORM_COLUMNS)


def create_fact_connection(runs: Dict[str, Dict[str, Any]]) -> pd.DataFrame:
    return _stack(runs, "connection", ["m", "form", "relative_l2", "tail_bound", "S_max"])


def create_fact_envelope(runs: Dict[str, Dict[str, Any]]) -> pd.DataFrame:
    return _stack(runs, "envelope", ["kind", "k", "alpha", "gamma", "sigma"])


def create_dim_run(runs: Dict[str, Dict[str, Any]]) -> pd.DataFrame:
    """One row per run from its manifest."""
    rows = []
    for scenario, outputs in runs.items():
        manifest = outputs.get("manifest")
        if not manifest:
            continue
        rows.append({
            "scenario": scenario,
            "command": manifest.get("command"),
            "config_hash": manifest.get("config_hash"),
            "seed": manifest.get("seed"),
            "wall_time_s": manifest.get("wall_time_s"),
            "numpy_version": manifest.get("versions", {}).get("numpy"),
            "scipy_version": manifest.get("versions", {}).get("scipy"),
        })
    return pd.DataFrame(rows, columns=["scenario", "command", "config_hash", "seed", "wall_time_s",
                                       "numpy_version", "scipy_version"])


def probe_slope_table(probes: pd.DataFrame) -> pd.DataFrame:
    """log2(max ratio) against k per estimate, the plot-ready form of a probe."""
    if probes.empty:
        return pd.DataFrame(columns=["estimate", "k", "log2_max_ratio", "slope"])
    out = probes[["estimate", "k", "max_ratio", "slope"]].copy()
    out["log2_max_ratio"] = np.log2(out["max_ratio"].astype(float))
    return out[["estimate", "k", "log2_max_ratio", "slope"]].sort_values(["estimate", "k"]).reset_index(drop=True)


def transform_all(runs: Dict[str, Dict[str, Any]]) -> Dict[str, pd.DataFrame]:
    """
    Build every result table from extracted runs.

    Args:
        runs: Output of extract_runs, keyed by scenario

    Returns:
        Dictionary of table name to DataFrame
    """
    probes = create_fact_probes(runs)
    return {
        "dim_run": create_dim_run(runs),
        "fact_conservation": create_fact_conservation(runs),
        "fact_residuals": create_fact_residuals(runs),
        "fact_probes": probes,
        "fact_norms": create_fact_norms(runs),
        "fact_connection": create_fact_connection(runs),
        "fact_envelope": create_fact_envelope(runs),
        "plot_probe_slopes": probe_slope_table(probes),
    }
