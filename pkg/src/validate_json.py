#!/usr/bin/env python3
"""
Validate lab JSON records: manifests, error records, probe reports and the lab summary.

Usage:
    python src/validate_json.py [json_path]

If no path given, validates artifacts/json/lab_summary.json
"""

import json
import math
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, List

COMMANDS = ("evolve", "gauge", "norms", "probe", "verify", "report")
PROBE_FIELDS = ("estimate", "d", "K_cal", "k", "max_ratio", "mean_ratio", "slope", "ensemble", "seed")


def validate_iso8601(value: str) -> bool:
    """Check if string is valid ISO 8601 timestamp."""
    try:
        datetime.fromisoformat(value.replace("Z", "+00:00"))
        return True
    except (ValueError, AttributeError):
        return False


def _finite_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def validate_manifest(data: dict) -> List[str]:
    errors = []
    for field in ("pipeline", "command", "generated_at", "config_hash", "versions", "wall_time_s", "outputs"):
        if field not in data:
            errors.append(f"Missing required field: {field}")
    if "generated_at" in data and not validate_iso8601(data["generated_at"]):
        errors.append("Field 'generated_at' is not a valid ISO 8601 timestamp")
    if data.get("command") not in COMMANDS:
        errors.append(f"Field 'command' must be one of {COMMANDS}")
    digest = data.get("config_hash", "")
    if not (isinstance(digest, str) and len(digest) == 64 and all(c in "0123456789abcdef" for c in digest)):
        errors.append("Field 'config_hash' must be a SHA-256 hex digest")
    if "wall_time_s" in data and (not _finite_number(data["wall_time_s"]) or data["wall_time_s"] < 0):
        errors.append("wall_time_s must be a non-negative number")
    if "outputs" in data and not isinstance(data["outputs"], list):
        errors.append("outputs must be an array")
    return errors


def validate_error_record(data: dict) -> List[str]:
    errors = []
    for field in ("command", "error_type", "message", "exit_code"):
        if field not in data:
            errors.append(f"Missing required field: {field}")
    if data.get("exit_code") not in (1, 2, 3):
        errors.append("exit_code must be 1, 2 or 3")
    return errors


def validate_probe_records(data: list) -> List[str]:
    errors = []
    if not data:
        errors.append("Probe report is empty")
    for i, record in enumerate(data):
        if record.get("estimate") == "duhamel":
            if not _finite_number(record.get("ratio")) or record["ratio"] <= 0:
                errors.append(f"Record {i}: Duhamel ratio must be a positive number")
            continue
        for field in PROBE_FIELDS:
            if field not in record:
                errors.append(f"Record {i}: missing {field}")
        if "max_ratio" in record and "mean_ratio" in record:
            if not (_finite_number(record["max_ratio"]) and _finite_number(record["mean_ratio"])):
                errors.append(f"Record {i}: ratios must be finite numbers")
            elif record["mean_ratio"] > record["max_ratio"] * (1 + 1e-12):
                errors.append(f"Record {i}: mean_ratio exceeds max_ratio")
        if record.get("ensemble", 16) < 16:
            errors.append(f"Record {i}: ensemble must have at least 16 members")
    return errors


def validate_lab_summary(data: dict) -> List[str]:
    errors = []
    for field in ("pipeline", "generated_at", "runs"):
        if field not in data:
            errors.append(f"Missing required field: {field}")
    if "runs" in data and not isinstance(data["runs"], list):
        errors.append("runs must be an array")
    for i, run in enumerate(data.get("runs", []) if isinstance(data.get("runs"), list) else []):
        if "scenario" not in run:
            errors.append(f"runs[{i}] must have a 'scenario' field")
    return errors


def validate_record(data: Any) -> List[str]:
    """Dispatch on the shape of the record."""
    if isinstance(data, list):
        return validate_probe_records(data)
    if not isinstance(data, dict):
        return ["Top level must be an object or an array"]
    if "error_type" in data:
        return validate_error_record(data)
    if "runs" in data:
        return validate_lab_summary(data)
    return validate_manifest(data)


def main():
    json_path = sys.argv[1] if len(sys.argv) > 1 else "artifacts/json/lab_summary.json"
    path = Path(json_path)

    if not path.exists():
        print(f"✗ File not found: {path}")
        sys.exit(1)

    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        print(f"✗ Invalid JSON: {e}")
        sys.exit(1)

    errors = validate_record(data)

    if errors:
        print(f"✗ Validation failed for {path}:")
        for error in errors:
            print(f"  - {error}")
        sys.exit(1)
    print(f"✓ Validation passed: {path}")
    sys.exit(0)


if __name__ == "__main__":
    main()
