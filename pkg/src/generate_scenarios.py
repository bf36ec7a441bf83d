"""
Initial data for every lab scenario.

This module builds the sphere-valued initial maps used by the runner and
can write them to disk as field dumps for inspection or reuse.
"""

import sys
import argparse
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from smaplab.config import SCENARIOS, SMALLNESS_LIMIT, ScenarioConfig, load_config
from smaplab.errors import ConfigError, LabError
from smaplab.flow import SphereField, energy_E1, helical_wave, normalize
from smaplab.probe import random_band_data
from smaplab.results.load import write_field_dump
from smaplab.spectral import GridSpec


def _frame(q: Sequence[float], q_prime: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    q = np.asarray(q, dtype=float)
    e1 = np.asarray(q_prime, dtype=float)
    return e1, np.cross(q, e1), q


def _embed(grid: GridSpec, vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Stack three scalar fields times fixed vectors into a (3,)+shape array."""
    out = np.zeros((3,) + grid.shape)
    for scalar, vector in vectors:
        out += np.asarray(vector).reshape((3,) + (1,) * grid.d) * scalar
    return out


def gaussian(grid: GridSpec, width: float, centre: Optional[Sequence[float]] = None) -> np.ndarray:
    coords = grid.coordinates()
    centre = np.zeros(grid.d) if centre is None else np.asarray(centre, dtype=float)
    r2 = sum((x - c) ** 2 for x, c in zip(coords, centre))
    return np.exp(-0.5 * r2 / width ** 2)


def constant(grid: GridSpec, q: Sequence[float] = (0.0, 0.0, 1.0)) -> SphereField:
    return SphereField.constant(grid, q)


def gaussian_bump(grid: GridSpec, amplitude: float, width: float,
                  q: Sequence[float] = (0.0, 0.0, 1.0),
                  q_prime: Sequence[float] = (1.0, 0.0, 0.0)) -> SphereField:
    """
    Twisted bump normalize(Q + eps g (cos(x_2/w) Q' + sin(x_2/w) Q x Q')).

    g is a Gaussian of width w centred at the origin.
    """
    e1, e2, e3 = _frame(q, q_prime)
    g = amplitude * gaussian(grid, width)
    twist = grid.coordinates()[1] / width
    vectors = _embed(grid, [(g * np.cos(twist), e1), (g * np.sin(twist), e2), (np.ones(grid.shape), e3)])
    return SphereField.from_vectors(vectors, grid, tuple(q))


def tangent_bump(field: SphereField, width: float, q_prime: Sequence[float]) -> np.ndarray:
    """Gaussian multiple of Q', shifted by one width along x_1, projected onto T_phi S^2."""
    centre = np.zeros(field.grid.d)
    centre[0] = width
    b = _embed(field.grid, [(gaussian(field.grid, width, centre), np.asarray(q_prime))])
    return b - np.sum(field.phi * b, axis=0) * field.phi


def nearby_pair(grid: GridSpec, amplitude: float, width: float, h: float,
                q: Sequence[float] = (0.0, 0.0, 1.0),
                q_prime: Sequence[float] = (1.0, 0.0, 0.0)) -> Tuple[SphereField, SphereField]:
    """(phi_0, phi_0^h) with phi_0^h = normalize(phi_0 + h * tangent bump)."""
    base = gaussian_bump(grid, amplitude, width, q, q_prime)
    perturbed = normalize(base.phi + h * tangent_bump(base, width, q_prime))
    return base, base.with_phi(perturbed)


def random_band(grid: GridSpec, k: int, amplitude: float, seed: int,
                q: Sequence[float] = (0.0, 0.0, 1.0),
                q_prime: Sequence[float] = (1.0, 0.0, 0.0)) -> SphereField:
    """normalize(Q + eps (Re u Q' + Im u Q x Q')) for random u at frequency 2^k with sup |u| = 1."""
    e1, e2, e3 = _frame(q, q_prime)
    u = random_band_data(grid, k, np.random.default_rng(seed))
    u = amplitude * u / np.max(np.abs(u))
    vectors = _embed(grid, [(u.real, e1), (u.imag, e2), (np.ones(grid.shape), e3)])
    return SphereField.from_vectors(vectors, grid, tuple(q))


def check_smallness(field: SphereField, limit: float = SMALLNESS_LIMIT) -> float:
    """
    Raises:
        ConfigError: If E1^(1/2) exceeds the gauge smallness limit
    """
    size = float(np.sqrt(energy_E1(field)))
    if size > limit:
        raise ConfigError(f"E1^(1/2) = {size:.3f} exceeds the gauge smallness limit {limit}")
    return size


def build_initial(config: ScenarioConfig) -> SphereField:
    """Initial map of the configured scenario (the unperturbed member for nearby_pair)."""
    grid, p = config.grid, config.physics
    if config.scenario == "constant":
        return constant(grid, p.Q)
    if config.scenario == "helical":
        if tuple(p.Q) != (0.0, 0.0, 1.0):
            raise ConfigError("The helical scenario is defined for Q = (0, 0, 1)")
        return helical_wave(grid, p.kappa, p.theta)
    if config.scenario in ("gaussian_bump", "nearby_pair"):
        return gaussian_bump(grid, p.amplitude, p.width, p.Q, p.Q_prime)
    if config.scenario == "random_band":
        return random_band(grid, p.band_k, p.amplitude, config.run.seed, p.Q, p.Q_prime)
    raise ConfigError(f"Unknown scenario '{config.scenario}'")


def build_pairs(config: ScenarioConfig) -> Dict[float, Tuple[SphereField, SphereField]]:
    """Perturbed pairs for every configured h."""
    p = config.physics
    return {h: nearby_pair(config.grid, p.amplitude, p.width, h, p.Q, p.Q_prime) for h in p.h_values}


def write_scenario(config: ScenarioConfig, output_dir: str, quiet: bool = False) -> Dict[str, Path]:
    """Write the initial data of a scenario as field dumps."""
    out = Path(output_dir)
    fields = {config.scenario: build_initial(config)}
    if config.scenario == "nearby_pair":
        for h, (_, perturbed) in build_pairs(config).items():
            fields[f"{config.scenario}_h{h:g}"] = perturbed
    written = {}
    for name, field in fields.items():
        written[name] = write_field_dump(out / name, field.phi, field.grid, time=0.0,
                                         extra={"base_point": list(field.base_point), "scenario": name})
        if not quiet:
            print(f"  ✓ {name}: E1 = {energy_E1(field):.6e} -> {written[name]}")
    return written


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(
        description="Generate initial data for Schrödinger map scenarios",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Default scenario from config.yaml
  python src/generate_scenarios.py --config config.yaml

  # A specific scenario into a custom directory
  python src/generate_scenarios.py --scenario nearby_pair --output data/initial
        """
    )
    parser.add_argument("--config", default=None, help="Scenario YAML file (default: built-in defaults)")
    parser.add_argument("--scenario", choices=SCENARIOS, default=None, help="Override the scenario")
    parser.add_argument("--seed", type=int, default=None, help="Override run.seed")
    parser.add_argument("--output", default="data/initial", help="Output directory (default: data/initial)")
    parser.add_argument("--quiet", action="store_true", help="Suppress progress output")
    args = parser.parse_args()

    overrides = {}
    if args.scenario:
        overrides["scenario"] = args.scenario
    if args.seed is not None:
        overrides["run"] = {"seed": args.seed}

    try:
        config = load_config(args.config, overrides)
        if not args.quiet:
            print("=" * 70)
            print("SCHRÖDINGER MAP SCENARIO GENERATOR")
            print("=" * 70)
            print(f"\n  Scenario: {config.scenario}")
            print(f"  Grid: d={config.grid.d}, n={config.grid.n}, L={config.grid.box_length}")
            print(f"  Output: {args.output}\n")
        write_scenario(config, args.output, args.quiet)
    except (LabError, FileNotFoundError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        sys.exit(2)

    if not args.quiet:
        print("\n" + "=" * 70)
        print("✓ GENERATION COMPLETE")
        print("=" * 70)


if __name__ == "__main__":
    main()
