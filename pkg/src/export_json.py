#!/usr/bin/env python3
"""
Export run manifests, error records and a lab summary as JSON.

Every run directory gets manifest.json:
{
  "pipeline": "smaplab",
  "command": "evolve | gauge | norms | probe | verify | report",
  "generated_at": "ISO8601 UTC timestamp",
  "scenario": name, "seed": int, "config_hash": sha256,
  "versions": { python, numpy, scipy, pandas, pyarrow, duckdb, pyyaml },
  "wall_time_s": float,
  "outputs": [ file names ]
}
Failures write error.json {command, error_type, message, exit_code}.
"""

import platform
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional

from smaplab.config import ScenarioConfig, config_hash
from smaplab.results.extract import extract_runs
from smaplab.results.load import write_json

PIPELINE = "smaplab"
VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "pyarrow", "duckdb", "pyyaml")


def package_versions() -> Dict[str, Optional[str]]:
    versions: Dict[str, Optional[str]] = {"python": platform.python_version()}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def build_manifest(command: str, config: ScenarioConfig, wall_time_s: float,
                   outputs: List[str]) -> Dict[str, Any]:
    return {
        "pipeline": PIPELINE,
        "command": command,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "scenario": config.scenario,
        "seed": config.run.seed,
        "config_hash": config_hash(config),
        "versions": package_versions(),
        "wall_time_s": round(wall_time_s, 3),
        "outputs": sorted(outputs),
    }


def export_manifest(run_dir: str, command: str, config: ScenarioConfig, wall_time_s: float) -> str:
    """
    Write manifest.json listing every file in run_dir.

    Returns:
        Path to the manifest
    """
    path = Path(run_dir)
    outputs = [p.name for p in path.iterdir() if p.is_file() and p.name != "manifest.json"] \
        if path.exists() else []
    manifest = build_manifest(command, config, wall_time_s, outputs)
    return str(write_json(manifest, path / "manifest.json", quiet=True))


def export_error(run_dir: str, command: str, error: BaseException, exit_code: int) -> str:
    """Write error.json for a failed command."""
    record = {
        "command": command,
        "error_type": type(error).__name__,
        "message": str(error),
        "exit_code": exit_code,
    }
    return str(write_json(record, Path(run_dir) / "error.json", quiet=True))


def export_lab_summary(results_dir: str = "results", output_dir: str = "artifacts/json") -> str:
    """
    Summarize the gate outcomes of every run below results_dir.

    Returns:
        Path to the exported lab_summary.json
    """
    runs = extract_runs(results_dir)
    summary: Dict[str, Any] = {
        "pipeline": PIPELINE,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "runs": [],
    }
    for scenario, outputs in runs.items():
        manifest = outputs.get("manifest", {})
        gates = outputs.get("gates", {})
        summary["runs"].append({
            "scenario": scenario,
            "command": manifest.get("command"),
            "config_hash": manifest.get("config_hash"),
            "is_valid": gates.get("is_valid"),
            "failed_checks": sorted(name for name, check in gates.get("checks", {}).items()
                                    if not check.get("valid", True)),
        })
    output_file = write_json(summary, Path(output_dir) / "lab_summary.json", quiet=True)
    print(f"✓ Exported lab summary to {output_file}")
    return str(output_file)


if __name__ == "__main__":
    export_lab_summary(*sys.argv[1:3])
