#!/usr/bin/env python3
"""
Experiment runner for the Schrödinger map laboratory.

Subcommands:
1. evolve  - evolve the scenario map, write checkpoints and conservation records
2. gauge   - heat flow, caloric frame, gauge fields and identity residuals
3. norms   - composite space-time norms and frequency envelopes
4. probe   - linear-estimate probes and the Duhamel ratio
5. verify  - run the scenario stages, then every acceptance gate
6. report  - plot-ready CSV tables, Parquet files and a DuckDB database
"""

import sys
import time
import logging
import argparse
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy.fft

sys.path.insert(0, str(Path(__file__).parent / "src"))

from smaplab.caloric import (ParabolicGrid, decay_hierarchy, dyadic_decay, energy_profile,  # noqa: E402
                             heat_evolve, transport_frame, transport_residual)
from smaplab.config import ScenarioConfig, load_config, write_config_reference  # noqa: E402
from smaplab.errors import EXIT_CONFIG_ERROR, EXIT_OK, ConfigError, LabError, exit_code_for  # noqa: E402
from smaplab.flow import (FlowState, SphereField, boundary_tail, energy_E0, energy_E1, evolve,  # noqa: E402
                          helical_wave, sobolev_distance, sphere_drift, tangent_derivative)
from smaplab.gauge import (a_from_integral, build_time_stencil, coulomb_comparison,  # noqa: E402
                           covariance_report, derivative_mass, extract_all, extract_gauge,
                           frame_derivative_residual, identity_residual, reconstruction_residual,
                           relative_l2, residual_rows)
from smaplab.probe import EnsembleSpec, duhamel_probe, probe, wave_packet_source  # noqa: E402
from smaplab.results.extract import extract_run_outputs, extract_runs  # noqa: E402
from smaplab.results.load import load_to_duckdb, load_to_parquet, write_csv, write_field_dump, write_json  # noqa: E402
from smaplab.results.transform import transform_all  # noqa: E402
from smaplab.results.validate import (enforce, print_validation_results, record_check,  # noqa: E402
                                      validate_all, validate_bound, validate_refinement)
from smaplab.spaces import (FrequencyEnvelope, NormParams, composite_norm, direction_refinement,  # noqa: E402
                            envelope_from_alpha, frequency_envelope)
from smaplab.spectral import DyadicWindow, GridSpec, SpaceTimeField, l2_norm, project_dyadic  # noqa: E402

from export_json import export_error, export_lab_summary, export_manifest  # noqa: E402
from generate_scenarios import build_initial, build_pairs, check_smallness  # noqa: E402

logger = logging.getLogger("run_lab")

COMMANDS = ("evolve", "gauge", "norms", "probe", "verify", "report")
DECAY_MULTIPLES = (1.0, 4.0, 16.0, 64.0)
SPATIAL_IDENTITIES = ("id1", "id3", "heatcov")
HELICAL_ORDER_FACTOR = 8.0
HELICAL_ORDER_KAPPA = 8.0
EXTENDED_S_MAX = 4.0
CALORIC_REFINEMENT_FACTOR = 4.0
STENCIL_ORDER_FACTOR = 3.5
ROUNDOFF_FLOOR = 1e-12


def run_dir_for(config: ScenarioConfig, command: str) -> Path:
    """Probes and reports get their own directories; every other command writes per scenario."""
    if command == "probe":
        return config.outputs.path / "probes"
    if command == "report":
        return config.outputs.path / "report"
    return config.outputs.path / config.scenario


def _frame_vectors(config: ScenarioConfig, d: int):
    shape = (3,) + (1,) * d
    e1 = np.asarray(config.physics.Q_prime).reshape(shape)
    e2 = np.cross(config.physics.Q, config.physics.Q_prime).reshape(shape)
    return e1, e2


def _gate(config: ScenarioConfig, run_dir: Path, strict: bool = True,
          extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Validate the outputs of run_dir, write gates.json and enforce in strict mode."""
    outputs = extract_run_outputs(str(run_dir))
    outputs.pop("gates", None)
    results = validate_all(outputs, config.gates)
    for name, outcome in (extra or {}).items():
        record_check(results, name, outcome)
    write_json(results, run_dir / "gates.json", quiet=True)
    if config.pipeline.get("verbose", True):
        print_validation_results(results)
    if strict and config.pipeline.get("fail_on_gate", True):
        enforce(results)
    return results


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------

def helical_error(config: ScenarioConfig, dt: Optional[float], final: Optional[FlowState] = None,
                  kappa: Optional[float] = None) -> float:
    """L2 distance from the exact helical solution at t = T (evolving unless final is given)."""
    p, grid = config.physics, config.grid
    kappa = p.kappa if kappa is None else kappa
    if final is None:
        final = evolve(FlowState(helical_wave(grid, kappa, p.theta)), config.run.T, dt)
    exact = helical_wave(grid, kappa, p.theta, config.run.T)
    return l2_norm(final.field.phi - exact.phi, grid)


def helical_order_kappa(grid: GridSpec) -> float:
    """Resolvable wavenumber near HELICAL_ORDER_KAPPA, at most half the Nyquist wavenumber."""
    base = 2.0 * np.pi / grid.box_length
    multiple = min(round(HELICAL_ORDER_KAPPA / base), int(0.5 * grid.k_nyquist / base))
    return max(multiple, 1) * base


def _sample_flow(initial: SphereField, t_end: float, dt: Optional[float], cadence: int) -> List[SphereField]:
    samples: List[SphereField] = []
    evolve(FlowState(initial), t_end, dt, [lambda state: samples.append(state.field)], cadence)
    return samples


def lipschitz_rows(config: ScenarioConfig) -> List[Dict[str, float]]:
    """sup over t <= min(T, 1) of the H^((d-2)/2) distance of each nearby pair."""
    t_end = min(config.run.T, 1.0)
    s = (config.grid.d - 2) / 2.0
    rows = []
    base_samples = None
    for h, (base, perturbed) in sorted(build_pairs(config).items(), reverse=True):
        if base_samples is None:
            base_samples = _sample_flow(base, t_end, config.run.dt, config.run.cadence)
        other = _sample_flow(perturbed, t_end, config.run.dt, config.run.cadence)
        distance = max(sobolev_distance(a, b, s) for a, b in zip(base_samples, other))
        rows.append({"h": h, "distance": distance})
        print(f"  ✓ h={h:g}: sup distance {distance:.6e}")
    return rows


def run_evolve(config: ScenarioConfig, run_dir: Path, strict: bool = True) -> Dict[str, Any]:
    print("\n[1/3] EVOLVING the Schrödinger map...")
    initial = build_initial(config)
    rows: List[Dict[str, float]] = []
    checkpoints = run_dir / "checkpoints"

    def record(state: FlowState) -> None:
        f = state.field
        rows.append({"t": state.t, "E0": energy_E0(f), "E1": energy_E1(f),
                     "sphere_drift": sphere_drift(f.phi), "boundary_tail": boundary_tail(f)})
        if config.outputs.checkpoints:
            write_field_dump(checkpoints / f"phi_{state.step_count:06d}", f.phi, f.grid, time=state.t,
                             extra={"base_point": list(f.base_point), "step_count": state.step_count})

    final = evolve(FlowState(initial), config.run.T, config.run.dt, [record], config.run.cadence)
    tail = max(row["boundary_tail"] for row in rows)
    if tail > 1e-3:
        logger.warning("Boundary tail reached %.3e; the box may be too small", tail)
    write_csv(rows, run_dir / "conservation.csv")
    print(f"  ✓ {final.step_count} steps to t={final.t:g}, {len(rows)} conservation samples")

    print("\n[2/3] CHECKING exact solutions and stability...")
    summary: Dict[str, Any] = {
        "scenario": config.scenario, "T": config.run.T, "steps": final.step_count,
        "dt": config.run.T / max(final.step_count, 1), "check_conservation": True,
        "E0_final": rows[-1]["E0"], "E1_final": rows[-1]["E1"], "max_boundary_tail": tail,
    }
    if config.scenario == "helical":
        summary["helical_error"] = helical_error(config, config.run.dt, final)
        print(f"  ✓ L2 error against the exact helical solution: {summary['helical_error']:.3e}")
    if config.scenario == "nearby_pair":
        lip = lipschitz_rows(config)
        write_csv(lip, run_dir / "lipschitz.csv")
        if len(lip) >= 2:
            hs = np.log([row["h"] for row in lip])
            ds = np.log([max(row["distance"], 1e-300) for row in lip])
            summary["lipschitz_exponent"] = float(np.polyfit(hs, ds, 1)[0])
    write_json(summary, run_dir / "evolve_summary.json")

    print("\n[3/3] VALIDATING evolution gates...")
    return _gate(config, run_dir, strict)


# ---------------------------------------------------------------------------
# gauge
# ---------------------------------------------------------------------------

def _heat_rows(trajectory, frame) -> List[Dict[str, float]]:
    energies = energy_profile(trajectory)
    hierarchy = decay_hierarchy(trajectory, frame)
    rows = []
    for i, s in enumerate(trajectory.pgrid.nodes):
        row = {"s": float(s), "E1": float(energies[i]),
               "equilibrium_distance": trajectory.equilibrium_distance(i)}
        row.update({name: float(values[i]) for name, values in hierarchy.items()})
        rows.append(row)
    return rows


def _decay_rows(initial: SphereField, pgrid: ParabolicGrid, substeps: int) -> List[Dict[str, float]]:
    rows = []
    for k in DyadicWindow.from_grid(initial.grid):
        if max(DECAY_MULTIPLES) * 4.0 ** (-k) > pgrid.S_max:
            continue
        for multiple, norm in dyadic_decay(initial, pgrid, k, DECAY_MULTIPLES, substeps).items():
            rows.append({"k": k, "multiple": multiple, "norm": norm})
    return rows


def schcov2_residual(initial: SphereField, pgrid: ParabolicGrid, config: ScenarioConfig,
                     spacing: float) -> float:
    """L-infinity residual of the modified Schrödinger equation with a given stencil spacing."""
    r = config.run
    stencil = build_time_stencil(FlowState(initial), pgrid, spacing, config.physics.Q_prime,
                                 r.stencil_order, r.dt, r.heat_substeps,
                                 initialization=r.frame_init)
    trajectory, frame = stencil.center
    g = extract_gauge(trajectory, frame, 0, stencil)
    return identity_residual(g, "schcov2", stencil)["Linf"]


def run_gauge(config: ScenarioConfig, run_dir: Path, strict: bool = True) -> Dict[str, Any]:
    p, r = config.physics, config.run
    grid = config.grid
    if not config.is_gauge_scenario:
        raise ConfigError(f"Scenario '{config.scenario}' is not a gauge scenario")
    initial = build_initial(config)
    size = check_smallness(initial)

    print("\n[1/5] RUNNING the harmonic map heat flow...")
    pgrid = ParabolicGrid.for_grid(grid, p.width, r.S_max_factor, r.s_ratio)
    trajectory = heat_evolve(initial, pgrid, r.heat_substeps)
    print(f"  ✓ E1^(1/2) = {size:.4f}, {len(pgrid)} parabolic nodes up to S_max = {pgrid.S_max:g}")
    print(f"  ✓ Distance from Q at S_max: {trajectory.equilibrium_distance():.3e}")

    print("\n[2/5] TRANSPORTING the caloric frame...")
    frame = transport_frame(trajectory, p.Q_prime, r.frame_init)
    a0 = transport_residual(trajectory, frame)
    write_csv([{"s": float(s), "transport_residual": float(v)}
               for s, v in zip(pgrid.nodes[1:-1], a0)], run_dir / "caloric.csv")
    write_csv(_heat_rows(trajectory, frame), run_dir / "heat_diagnostics.csv")
    write_csv(_decay_rows(initial, pgrid, r.heat_substeps), run_dir / "dyadic_decay.csv")
    print(f"  ✓ max |w . d_s v| = {float(a0.max()) if a0.size else 0.0:.3e}")

    print("\n[3/5] EXTRACTING gauge fields and identity residuals...")
    gauges = extract_all(trajectory, frame)
    rows: List[Dict[str, object]] = []
    for i, g in enumerate(gauges):
        names = SPATIAL_IDENTITIES + (("schcov",) if i == 0 else ())
        rows.extend(residual_rows(g, {name: identity_residual(g, name) for name in names}))
        if 0 < i < len(gauges) - 1:
            aux = (gauges[i - 1], gauges[i + 1])
            rows.extend(residual_rows(g, {"heatcov2": identity_residual(g, "heatcov2", aux)}))
    stencil = build_time_stencil(FlowState(initial), pgrid, r.stencil_spacing, p.Q_prime,
                                 r.stencil_order, r.dt, r.heat_substeps,
                                 phi_lin=tangent_derivative(initial, 0), initialization=r.frame_init)
    center_trajectory, center_frame = stencil.center
    timed = extract_all(center_trajectory, center_frame, stencil)
    rows.extend(residual_rows(timed[0], {name: identity_residual(timed[0], name, stencil)
                                         for name in ("schcov2", "schlin")}, dt=r.stencil_spacing))
    write_csv(rows, run_dir / "residuals.csv")

    print("\n[4/5] INTEGRATING the connection back from S_max...")
    connection = []
    for m in range(1, grid.d + 2):
        source = timed if m == grid.d + 1 else gauges
        for form in ("direct", "expanded"):
            integral = a_from_integral(source, m, 0, form)
            connection.append({"m": m, "form": form,
                               "relative_l2": relative_l2(integral.field, source[0].a[m], grid),
                               "tail_bound": integral.tail_bound, "S_max": pgrid.S_max})
    write_csv(connection, run_dir / "connection.csv")

    covariance = covariance_report(trajectory, r.covariance_theta, 0, p.Q_prime, r.frame_init)
    covariance["mass"] = {"derivative_mass": derivative_mass(gauges[0]), "E1": energy_E1(initial)}
    covariance["reconstruction"] = reconstruction_residual(gauges[0], trajectory, frame)
    covariance["frame_derivative"] = frame_derivative_residual(gauges[0], trajectory, frame)
    write_json(covariance, run_dir / "covariance.json")
    write_json(coulomb_comparison(gauges[0]), run_dir / "coulomb.json")
    print(f"  ✓ Gauge covariance: max |A - A'| = {covariance['max_a_diff']:.3e}")

    print("\n[5/5] VALIDATING gauge gates...")
    return _gate(config, run_dir, strict)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def scenario_space_time(config: ScenarioConfig) -> SpaceTimeField:
    """phi . Q' + i phi . (Q x Q') on a symmetric time grid around t = 0."""
    initial = build_initial(config)
    r = config.run
    times = np.linspace(-r.norm_half_width, r.norm_half_width, r.norm_time_nodes)
    centre = r.norm_time_nodes // 2
    fields: List[Optional[SphereField]] = [None] * times.size
    fields[centre] = initial
    for order in (range(centre + 1, times.size), range(centre - 1, -1, -1)):
        state = FlowState(initial)
        for i in order:
            state = evolve(state, times[i], r.dt)
            fields[i] = state.field
    e1, e2 = _frame_vectors(config, config.grid.d)
    values = np.stack([np.sum(f.phi * e1, axis=0) + 1j * np.sum(f.phi * e2, axis=0) for f in fields])
    return SpaceTimeField(values, times, config.grid)


def norm_params(config: ScenarioConfig, omega: float = 0.0) -> NormParams:
    d = config.grid.d
    return NormParams(d=d, K_cal=config.run.K_cal, omega=omega,
                      direction_count=config.run.direction_count if d == 2 else None,
                      max_velocities=config.probe.max_velocities, slabs=config.probe.slabs)


def _envelope_rows(kind: str, envelope: FrequencyEnvelope) -> List[Dict[str, object]]:
    return [{"kind": kind, "k": k, "alpha": envelope.alpha[k], "gamma": envelope.gamma[k],
             "sigma": envelope.sigma, "delta": envelope.delta} for k in sorted(envelope.alpha)]


def random_multiband_envelope(grid: GridSpec, sigma: float, seed: int) -> FrequencyEnvelope:
    """Envelope of alpha_k drawn uniformly from [1/2, 1] on every band of the window."""
    rng = np.random.default_rng(seed)
    alpha = {k: float(rng.uniform(0.5, 1.0)) for k in DyadicWindow.from_grid(grid)}
    return envelope_from_alpha(alpha, sigma, grid.d)


def run_norms(config: ScenarioConfig, run_dir: Path, strict: bool = True) -> Dict[str, Any]:
    r, grid = config.run, config.grid
    window = DyadicWindow.from_grid(grid)
    for k in r.norm_ks:
        window.check(k)

    print("\n[1/3] SAMPLING the scenario flow...")
    u = scenario_space_time(config)
    print(f"  ✓ {u.times.size} time nodes on [-{u.half_width:g}, {u.half_width:g}]")

    print("\n[2/3] EVALUATING composite norms...")
    names = ("F0", "F", "G", "N") if grid.d == 2 else ("F", "G", "N")
    rows, refinement = [], []
    params = norm_params(config)
    for k in r.norm_ks:
        u_k = u.with_values(project_dyadic(u.values, grid, k))
        for name in names:
            result = composite_norm(u_k, k, name, params)
            rows.append(result.row(config.scenario))
            print(f"  ✓ k={k} {name}: {result.value:.6e} ({result.candidate})")
        for omega in r.omegas:
            rows.append(composite_norm(u_k, k, "S", norm_params(config, omega)).row(config.scenario))
        refinement.append({"k": k, **direction_refinement(u_k, k, params)})
    write_csv(rows, run_dir / "norms.csv")
    write_csv(refinement, run_dir / "direction_refinement.csv")

    print("\n[3/3] BUILDING frequency envelopes...")
    initial = build_initial(config)
    deviation = initial.phi - initial.q
    envelopes = {
        "data": frequency_envelope(deviation, grid, r.envelope_sigma, window, gradient_of=True),
        "solution": frequency_envelope(u, grid, r.envelope_sigma, window),
        "random_multiband": random_multiband_envelope(grid, r.envelope_sigma, r.seed),
    }
    write_csv([row for kind, env in envelopes.items() for row in _envelope_rows(kind, env)],
              run_dir / "envelope.csv")
    for kind, env in envelopes.items():
        print(f"  ✓ {kind}: sum gamma^2 / sum alpha^2 = {env.energy_ratio():.4f}")
    return _gate(config, run_dir, strict)


# ---------------------------------------------------------------------------
# probe
# ---------------------------------------------------------------------------

def ensemble_spec(config: ScenarioConfig) -> EnsembleSpec:
    pr = config.probe
    return EnsembleSpec(size=pr.ensemble, seed=config.run.seed, rho=pr.rho, tau=pr.tau,
                        time_nodes=pr.time_nodes, K_cal=config.run.K_cal,
                        max_velocities=pr.max_velocities, slabs=pr.slabs)


def run_probe(config: ScenarioConfig, run_dir: Path, strict: bool = True) -> Dict[str, Any]:
    grid = config.probe_grid
    spec = ensemble_spec(config)

    print(f"\n[1/3] PROBING linear estimates on n={grid.n}, d={grid.d}...")
    records: List[Dict[str, object]] = []
    for name in config.probe.estimates:
        report = probe(name, config.probe.ks, grid, spec)
        records.extend(report.rows())
        print(f"  ✓ {name}: slope {report.slope:+.4f} (exponent {report.exponent:g})")
    write_json(records, run_dir / "probes.json")

    print("\n[2/3] PROBING the Duhamel bound...")
    rng = np.random.default_rng(config.run.seed)
    params = NormParams(d=grid.d, K_cal=config.run.K_cal, max_velocities=config.probe.max_velocities,
                        slabs=config.probe.slabs)
    duhamel = []
    for k in config.probe.duhamel_ks:
        source = wave_packet_source(grid, k, spec.times(k), rng, spec.rho)
        report = duhamel_probe(np.zeros(grid.shape, dtype=complex), source, k, params)
        duhamel.append(report.row())
        print(f"  ✓ k={k}: G/(||u0|| + N) = {report.ratio:.4f}")
    write_json(duhamel, run_dir / "duhamel.json")

    print("\n[3/3] VALIDATING probe gates...")
    return _gate(config, run_dir, strict)


# ---------------------------------------------------------------------------
# verify and report
# ---------------------------------------------------------------------------

def connection_error(initial: SphereField, config: ScenarioConfig, factor: float) -> float:
    """Largest relative L2 gap between the spatial A_m and their heat-time integrals at s = 0."""
    p, r = config.physics, config.run
    pgrid = ParabolicGrid.for_grid(config.grid, p.width, factor, r.s_ratio)
    trajectory = heat_evolve(initial, pgrid, r.heat_substeps)
    gauges = extract_all(trajectory, transport_frame(trajectory, p.Q_prime, r.frame_init))
    return max(relative_l2(a_from_integral(gauges, m).field, gauges[0].a[m], config.grid)
               for m in range(1, config.grid.d + 1))


def refinement_checks(config: ScenarioConfig) -> Dict[str, Any]:
    """Order-of-accuracy checks that need a second, refined solve."""
    checks = {}
    if config.scenario == "helical":
        dt = config.run.dt if config.run.dt is not None else config.grid.dt_hint
        kappa = helical_order_kappa(config.grid)
        coarse = helical_error(config, dt, kappa=kappa)
        fine = helical_error(config, dt / 2.0, kappa=kappa)
        checks["helical_order"] = validate_refinement(coarse, fine, HELICAL_ORDER_FACTOR,
                                                      label=f"helical error at kappa={kappa:g}")
    if config.is_gauge_scenario:
        p, r = config.physics, config.run
        initial = build_initial(config)
        pgrid = ParabolicGrid.for_grid(config.grid, p.width, r.S_max_factor, r.s_ratio)
        residuals = []
        for grid_s in (pgrid, pgrid.refined()):
            trajectory = heat_evolve(initial, grid_s, r.heat_substeps)
            values = transport_residual(trajectory, transport_frame(trajectory, p.Q_prime, r.frame_init))
            residuals.append(float(values.max()) if values.size else 0.0)
        checks["caloric_refinement"] = validate_refinement(*residuals, CALORIC_REFINEMENT_FACTOR,
                                                           ROUNDOFF_FLOOR, "transport residual")
        extended = connection_error(initial, config, EXTENDED_S_MAX * r.S_max_factor)
        checks["integral_representation_extended"] = validate_bound(
            extended, config.gates.aform_relative / 2.0,
            f"A_m integral representation at S_max factor {EXTENDED_S_MAX * r.S_max_factor:g}")
        spacing = r.stencil_spacing
        coarse = schcov2_residual(initial, pgrid, config, spacing)
        fine = schcov2_residual(initial, pgrid, config, spacing / 2.0)
        checks["schcov2_order"] = validate_refinement(coarse, fine, STENCIL_ORDER_FACTOR,
                                                      config.gates.identity_linf, "schcov2 residual")
    return checks


def run_verify(config: ScenarioConfig, run_dir: Path, strict: bool = True) -> Dict[str, Any]:
    stages: List[Callable[..., Dict[str, Any]]] = [run_evolve]
    if config.is_gauge_scenario:
        stages.append(run_gauge)
    stages.append(run_norms)
    for stage in stages:
        stage(config, run_dir, strict=False)
    print("\nRUNNING refinement checks...")
    return _gate(config, run_dir, strict, extra=refinement_checks(config))


def run_report(config: ScenarioConfig, run_dir: Path, strict: bool = True,
               reference: Optional[str] = None) -> Dict[str, Any]:
    if reference:
        write_config_reference(reference)
        return {"is_valid": True, "checks": {}}

    print("\n[1/3] EXTRACTING run outputs...")
    runs = extract_runs(str(config.outputs.path))
    runs.pop(run_dir.name, None)
    print(f"  ✓ Extracted {len(runs)} runs")

    print("\n[2/3] TRANSFORMING into result tables...")
    tables = transform_all(runs)
    for name, df in tables.items():
        write_csv(df, run_dir / f"{name}.csv", quiet=True)
        print(f"  ✓ {name}: {len(df)} rows")

    print("\n[3/3] LOADING into Parquet and DuckDB...")
    load_to_parquet(tables, str(run_dir / "parquet"))
    views = load_to_duckdb(tables, str(run_dir / config.outputs.duckdb))
    export_lab_summary(str(config.outputs.path), str(run_dir))
    print(f"  ✓ Views: {', '.join(views) if views else 'none'}")
    return {"is_valid": True, "checks": {}}


STAGES: Dict[str, Callable[..., Dict[str, Any]]] = {
    "evolve": run_evolve,
    "gauge": run_gauge,
    "norms": run_norms,
    "probe": run_probe,
    "verify": run_verify,
    "report": run_report,
}


def run_command(command: str, config: ScenarioConfig, reference: Optional[str] = None) -> int:
    """
    Run one subcommand and write its manifest (and error.json on failure).

    Returns:
        Process exit code
    """
    run_dir = run_dir_for(config, command)
    run_dir.mkdir(parents=True, exist_ok=True)
    print("=" * 70)
    print(f"SCHRÖDINGER MAP LAB: {command.upper()} ({config.scenario})")
    print("=" * 70)
    print(f"  Grid: d={config.grid.d}, n={config.grid.n}, L={config.grid.box_length:g}")
    print(f"  Output: {run_dir}")
    start = time.perf_counter()
    code = EXIT_OK
    try:
        with scipy.fft.set_workers(config.run.workers):
            if command == "report":
                run_report(config, run_dir, reference=reference)
            else:
                STAGES[command](config, run_dir)
    except (LabError, FileNotFoundError) as e:
        code = exit_code_for(e)
        print(f"\n  ERROR: {e}")
        export_error(str(run_dir), command, e, code)
    export_manifest(str(run_dir), command, config, time.perf_counter() - start)

    print("\n" + "=" * 70)
    if code == EXIT_OK:
        print(f"✓ {command.upper()} COMPLETED SUCCESSFULLY")
    else:
        print(f"✗ {command.upper()} FAILED (exit code {code})")
    print("=" * 70)
    return code


def build_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    run: Dict[str, Any] = {}
    if args.seed is not None:
        run["seed"] = args.seed
    if args.workers is not None:
        run["workers"] = args.workers
    if run:
        overrides["run"] = run
    if args.out is not None:
        overrides["outputs"] = {"dir": args.out}
    return overrides


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point."""
    parser = argparse.ArgumentParser(
        description="Numerical laboratory for the Schrödinger map flow",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Evolve the default scenario and check conservation
  python run_lab.py evolve --config config.yaml

  # Caloric gauge residuals into a custom directory
  python run_lab.py gauge --config config.yaml --out results/bump

  # Linear probes with four FFT workers
  python run_lab.py probe --workers 4

  # Every gate for the configured scenario
  python run_lab.py verify --seed 1

  # Result tables, Parquet and DuckDB
  python run_lab.py report

  # Configuration reference page
  python run_lab.py report --reference docs/CONFIG_REFERENCE.md
        """
    )
    parser.add_argument("command", choices=COMMANDS, help="Stage to run")
    parser.add_argument("--config", default=None, help="Scenario YAML file (default: built-in defaults)")
    parser.add_argument("--seed", type=int, default=None, help="Override run.seed")
    parser.add_argument("--workers", type=int, default=None, help="Override run.workers (FFT threads)")
    parser.add_argument("--out", default=None, help="Override outputs.dir")
    parser.add_argument("--reference", nargs="?", const="CONFIG_REFERENCE.md", default=None,
                        help="With report: write the configuration reference page instead")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config, build_overrides(args))
    except (LabError, FileNotFoundError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        out = Path(args.out or "results")
        out.mkdir(parents=True, exist_ok=True)
        export_error(str(out), args.command, e, EXIT_CONFIG_ERROR)
        return EXIT_CONFIG_ERROR

    logging.basicConfig(level=getattr(logging, str(config.pipeline.get("log_level", "INFO")).upper(),
                                      logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return run_command(args.command, config, args.reference)


if __name__ == "__main__":
    sys.exit(main())
