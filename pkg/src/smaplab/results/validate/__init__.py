"""
Acceptance gates for lab outputs.

Each check returns (is_valid, error_messages); validate_all runs every
check whose inputs are present in a run's outputs.
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ...config import GateSpec
from ...errors import GateFailure

Check = Tuple[bool, List[str]]

EXPECTED_COLUMNS = {
    "conservation": ["t", "E0", "E1", "sphere_drift", "boundary_tail"],
    "residuals": ["identity", "s", "L2", "Linf", "n"],
    "connection": ["m", "form", "relative_l2", "tail_bound"],
    "caloric": ["s", "transport_residual"],
    "dyadic_decay": ["k", "multiple", "norm"],
    "norms": ["scenario", "k", "norm", "directions", "value", "candidate"],
    "envelope": ["kind", "k", "alpha", "gamma", "delta"],
    "lipschitz": ["h", "distance"],
}
SPATIAL_IDENTITIES = ("id1", "id3", "heatcov", "schcov")


def validate_schema(outputs: Dict[str, Any], expected: Dict[str, List[str]] = EXPECTED_COLUMNS) -> Check:
    """Every present table carries its expected columns without nulls."""
    errors = []
    for name, columns in expected.items():
        df = outputs.get(name)
        if df is None:
            continue
        missing = set(columns) - set(df.columns)
        if missing:
            errors.append(f"Table '{name}' missing columns: {sorted(missing)}")
            continue
        for col in columns:
            if col != "dt" and df[col].isnull().any():
                errors.append(f"Table '{name}' has {int(df[col].isnull().sum())} null values in column '{col}'")
    return len(errors) == 0, errors


def _relative(values: pd.Series) -> float:
    ref = float(values.iloc[0])
    change = float(np.max(np.abs(values - ref)))
    return change / abs(ref) if ref != 0.0 else change


def validate_conservation(df: pd.DataFrame, limit: float) -> Check:
    """Relative drift of E0 and E1 stays below limit."""
    errors = []
    for column in ("E0", "E1"):
        drift = _relative(df[column])
        if drift > limit:
            errors.append(f"{column} relative drift {drift:.3e} exceeds {limit:.1e}")
    return len(errors) == 0, errors


def validate_helical(summary: Dict[str, Any], limit: float) -> Check:
    error = summary.get("helical_error")
    if error is None:
        return True, []
    if error > limit:
        return False, [f"Helical L2 error {error:.3e} exceeds {limit:.1e}"]
    return True, []


def validate_identities(df: pd.DataFrame, limit: float,
                        identities: Sequence[str] = SPATIAL_IDENTITIES) -> Check:
    """Largest Linf residual of each listed identity stays below limit."""
    errors = []
    for identity in identities:
        rows = df[df["identity"] == identity]
        if rows.empty:
            continue
        worst = float(rows["Linf"].max())
        if worst > limit:
            errors.append(f"Identity {identity}: Linf residual {worst:.3e} exceeds {limit:.1e}")
    return len(errors) == 0, errors


def validate_caloric_condition(df: pd.DataFrame, limit: float) -> Check:
    worst = float(df["transport_residual"].max()) if not df.empty else 0.0
    if worst > limit:
        return False, [f"max |w . d_s v| = {worst:.3e} exceeds {limit:.1e}"]
    return True, []


def validate_integral(df: pd.DataFrame, limit: float) -> Check:
    errors = []
    for _, row in df[df["form"] == "direct"].iterrows():
        if row["relative_l2"] > limit:
            errors.append(f"A_{int(row['m'])} integral representation off by {row['relative_l2']:.3%}")
    return len(errors) == 0, errors


def validate_covariance(report: Dict[str, Any], limit: float) -> Check:
    errors = []
    for key in ("max_a_diff", "max_abs_psi_diff"):
        if report.get(key, 0.0) > limit:
            errors.append(f"Gauge covariance {key} = {report[key]:.3e} exceeds {limit:.1e}")
    return len(errors) == 0, errors


def validate_mass_identity(summary: Dict[str, Any], tolerance: float) -> Check:
    """|sum_m ||psi_m||^2 - E1| <= tolerance * E1."""
    if "derivative_mass" not in summary:
        return True, []
    gap = abs(summary["derivative_mass"] - summary["E1"])
    if gap > tolerance * max(summary["E1"], 0.0) and gap > 0.0:
        return False, [f"Derivative mass differs from E1 by {gap:.3e}"]
    return True, []


def validate_probe_slopes(records: Sequence[Dict[str, Any]], bounds: Dict[str, float]) -> Check:
    errors = []
    seen = set()
    for record in records:
        name = record["estimate"]
        if name in seen or name not in bounds or "slope" not in record:
            continue
        seen.add(name)
        if abs(record["slope"]) > bounds[name]:
            errors.append(f"Probe {name}: |slope| {abs(record['slope']):.3f} exceeds {bounds[name]}")
    return len(errors) == 0, errors


def validate_dyadic_decay(df: pd.DataFrame, factor: float, required: int = 3,
                          start_multiple: float = 4.0) -> Check:
    """
    ||P_k phi(s)|| drops by factor per quadrupling of s, for at least `required` k.

    Quadruplings are counted from s 2^(2k) = start_multiple on; the first one
    (from s 2^(2k) = 1) is reported in the table but not gated.
    """
    passing = []
    for k, rows in df.groupby("k"):
        rows = rows.sort_values("multiple")
        norms = rows["norm"].to_numpy(dtype=float)
        multiples = rows["multiple"].to_numpy(dtype=float)
        drops = [norms[i] / norms[i + 1] for i in range(len(norms) - 1)
                 if multiples[i] >= start_multiple and norms[i + 1] > 0]
        if drops and min(drops) >= factor:
            passing.append(int(k))
    if len(passing) < required:
        return False, [f"Dyadic decay by {factor}x holds for k={passing}, need {required} bands"]
    return True, []


def validate_lipschitz(df: pd.DataFrame, tolerance: float) -> Check:
    """Distance at h over distance at h/2 is 2 within tolerance."""
    rows = df.sort_values("h", ascending=False)
    errors = []
    hs = rows["h"].to_numpy(dtype=float)
    dist = rows["distance"].to_numpy(dtype=float)
    for i in range(len(hs) - 1):
        expected = hs[i] / hs[i + 1]
        ratio = dist[i] / dist[i + 1] if dist[i + 1] > 0 else np.inf
        if abs(ratio / expected - 1.0) > tolerance:
            errors.append(f"Distance ratio {ratio:.3f} for h={hs[i]:g}/{hs[i + 1]:g}, expected {expected:.3f}")
    return len(errors) == 0, errors


def validate_envelope(df: pd.DataFrame, ratio_limit: float, tolerance: float = 1e-12) -> Check:
    """
    Slowly varying envelopes dominating alpha; the energy ratio bound is
    checked on the random multi-band rows.
    """
    errors = []
    for kind, rows in df.groupby("kind"):
        k = rows["k"].to_numpy(dtype=float)
        gamma = rows["gamma"].to_numpy(dtype=float)
        alpha = rows["alpha"].to_numpy(dtype=float)
        delta = float(rows["delta"].iloc[0])
        growth = 2.0 ** (delta * np.abs(k[:, None] - k[None, :]))
        defect = float(np.max(gamma[:, None] - gamma[None, :] * growth))
        if defect > tolerance * max(gamma.max(), 1.0):
            errors.append(f"Envelope {kind} is not slowly varying (defect {defect:.3e})")
        if np.any(gamma < alpha * (1 - 1e-12)):
            errors.append(f"Envelope {kind} does not dominate alpha")
        alpha_sq = float(np.sum(alpha ** 2))
        if str(kind).startswith("random") and alpha_sq > 0 and np.sum(gamma ** 2) > ratio_limit * alpha_sq:
            errors.append(f"Envelope {kind}: sum gamma^2 exceeds {ratio_limit} sum alpha^2")
    return len(errors) == 0, errors


def validate_s_ordering(df: pd.DataFrame, constant: float = 2.0) -> Check:
    """S_k^omega' <= constant * S_k^omega whenever omega' <= omega."""
    errors = []
    rows = df[df["norm"].astype(str).str.startswith("S^")]
    for k, group in rows.groupby("k"):
        omegas = group["norm"].str.slice(2).astype(float).to_numpy()
        values = group["value"].to_numpy(dtype=float)
        for i in range(len(omegas)):
            for j in range(len(omegas)):
                if omegas[i] < omegas[j] and values[i] > constant * values[j]:
                    errors.append(f"k={k}: S^{omegas[i]:g} = {values[i]:.4g} above "
                                  f"{constant} x S^{omegas[j]:g} = {values[j]:.4g}")
    return len(errors) == 0, errors


def validate_refinement(coarse: float, fine: float, factor: float, floor: float = 0.0,
                        label: str = "error") -> Check:
    """Refining reduces the error by at least factor, unless it already sits below floor."""
    if coarse <= floor:
        return True, []
    ratio = coarse / fine if fine > 0 else np.inf
    if ratio < factor:
        return False, [f"Refinement reduced the {label} by {ratio:.2f}x ({coarse:.3e} -> {fine:.3e}), "
                       f"expected at least {factor:g}x"]
    return True, []


def validate_bound(value: float, limit: float, label: str = "error") -> Check:
    if not value <= limit:
        return False, [f"{label}: {value:.3e} exceeds {limit:.1e}"]
    return True, []


def record_check(results: Dict[str, Any], name: str, outcome: Check) -> None:
    is_valid, errors = outcome
    results["checks"][name] = {"valid": is_valid, "errors": errors}
    if not is_valid:
        results["is_valid"] = False


def validate_all(outputs: Dict[str, Any], gates: GateSpec) -> Dict[str, Any]:
    """
    Run every gate whose inputs are present.

    Args:
        outputs: One run's outputs (see extract_run_outputs)
        gates: Gate thresholds

    Returns:
        Dictionary {'is_valid': bool, 'checks': {name: {'valid', 'errors'}}}
    """
    results: Dict[str, Any] = {"is_valid": True, "checks": {}}
    record_check(results, "schema", validate_schema(outputs))
    summary = outputs.get("evolve_summary") or {}
    if "conservation" in outputs and summary.get("check_conservation", True):
        record_check(results, "conservation", validate_conservation(outputs["conservation"], gates.conservation_drift))
    if "helical_error" in summary:
        record_check(results, "helical", validate_helical(summary, gates.helical_error))
    if "residuals" in outputs:
        record_check(results, "identities", validate_identities(outputs["residuals"], gates.identity_linf))
    if "caloric" in outputs:
        record_check(results, "caloric_condition",
                     validate_caloric_condition(outputs["caloric"], gates.caloric_condition))
    if "connection" in outputs:
        record_check(results, "integral_representation", validate_integral(outputs["connection"], gates.aform_relative))
    if "covariance" in outputs:
        record_check(results, "covariance", validate_covariance(outputs["covariance"], gates.covariance))
    gauge_summary = (outputs.get("covariance") or {}).get("mass", {})
    if gauge_summary:
        record_check(results, "mass_identity", validate_mass_identity(gauge_summary, gates.mass_identity))
    if "probes" in outputs:
        record_check(results, "probe_slopes", validate_probe_slopes(outputs["probes"], gates.slope_bounds))
    if "dyadic_decay" in outputs:
        record_check(results, "dyadic_decay", validate_dyadic_decay(outputs["dyadic_decay"], gates.dyadic_decay_factor))
    if "lipschitz" in outputs:
        record_check(results, "lipschitz", validate_lipschitz(outputs["lipschitz"], gates.lipschitz_tolerance))
    if "envelope" in outputs:
        record_check(results, "envelope", validate_envelope(outputs["envelope"], gates.envelope_ratio))
    if "norms" in outputs:
        record_check(results, "s_ordering", validate_s_ordering(outputs["norms"]))
    return results


def first_failure(results: Dict[str, Any]) -> Optional[str]:
    for name, check in results["checks"].items():
        if not check["valid"]:
            return name
    return None


def enforce(results: Dict[str, Any]) -> None:
    """
    Raises:
        GateFailure: Naming the first failing gate
    """
    name = first_failure(results)
    if name is not None:
        raise GateFailure(name, "; ".join(results["checks"][name]["errors"]))


def print_validation_results(results: Dict[str, Any]) -> None:
    """Print gate results in a readable format."""
    print("=" * 60)
    print("GATE RESULTS")
    print("=" * 60)
    overall_status = "PASSED" if results["is_valid"] else "FAILED"
    print(f"\nOverall Status: {overall_status}\n")
    for check_name, check_result in results["checks"].items():
        status = "✓ PASS" if check_result["valid"] else "✗ FAIL"
        print(f"{check_name.upper()}: {status}")
        for error in check_result["errors"]:
            print(f"  - {error}")
        print()
    print("=" * 60)
