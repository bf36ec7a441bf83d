"""
Scenario configuration.

A YAML file is merged over DEFAULT_CONFIG and converted into a frozen
ScenarioConfig. Every physics default is listed in DEFAULT_CONFIG, and
write_config_reference renders it as a Markdown page.
"""

import copy
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml

from .errors import ConfigError
from .spectral import GridSpec

logger = logging.getLogger(__name__)

SCENARIOS = ("constant", "helical", "gaussian_bump", "nearby_pair", "random_band")
GAUGE_SCENARIOS = ("constant", "gaussian_bump", "nearby_pair")
SMALLNESS_LIMIT = 0.3

DEFAULT_CONFIG: Dict[str, Any] = {
    "scenario": "gaussian_bump",
    "grid": {
        "d": 2,
        "n": 64,
        "box_length": 16.0,
    },
    "physics": {
        "Q": [0.0, 0.0, 1.0],
        "Q_prime": [1.0, 0.0, 0.0],
        "theta": 0.7853981633974483,
        "kappa": 1.0,
        "amplitude": 0.05,
        "width": 1.0,
        "band_k": 2,
        "h_values": [1.0e-2, 5.0e-3],
    },
    "run": {
        "T": 1.0,
        "dt": None,
        "cadence": 10,
        "S_max_factor": 64.0,
        "s_ratio": 1.25,
        "heat_substeps": 4,
        "frame_init": "rotation",
        "stencil_spacing": 1.0e-4,
        "stencil_order": 2,
        "covariance_theta": 0.9,
        "K_cal": 2,
        "direction_count": 8,
        "omegas": [0.0, 0.25, 0.5],
        "norm_ks": [0, 1, 2],
        "norm_time_nodes": 17,
        "norm_half_width": 0.25,
        "envelope_sigma": 0.0,
        "seed": 0,
        "workers": 1,
    },
    "probe": {
        "estimates": ["locsmobound", "linst", "linmax", "linnew"],
        "ks": [2, 3, 4, 5],
        "ensemble": 32,
        "rho": 4.0,
        "tau": 1.0,
        "time_nodes": 33,
        "n": 256,
        "box_length": 12.566370614359172,
        "max_velocities": 33,
        "slabs": 4,
        "duhamel_ks": [2, 3, 4],
    },
    "gates": {
        "conservation_drift": 1.0e-6,
        "helical_error": 1.0e-4,
        "identity_linf": 1.0e-8,
        "caloric_condition": 1.0e-6,
        "aform_relative": 0.02,
        "covariance": 1.0e-8,
        "mass_identity": 1.0e-10,
        "slope_bounds": {
            "locsmobound": 0.15,
            "linst": 0.15,
            "linnew": 0.2,
            "linmax": 0.2,
            "latstc": 0.2,
            "latsta": 0.2,
            "latstb": 0.2,
        },
        "dyadic_decay_factor": 4.0,
        "lipschitz_tolerance": 0.2,
        "envelope_ratio": 4.0,
    },
    "outputs": {
        "dir": "results",
        "checkpoints": True,
        "duckdb": "lab.duckdb",
    },
    "pipeline": {
        "fail_on_gate": True,
        "log_level": "INFO",
        "verbose": True,
    },
}

Number = Union[int, float]


@dataclass(frozen=True)
class PhysicsSpec:
    Q: Tuple[float, float, float]
    Q_prime: Tuple[float, float, float]
    theta: float
    kappa: float
    amplitude: float
    width: float
    band_k: int
    h_values: Tuple[float, ...]


@dataclass(frozen=True)
class RunSpec:
    T: float
    dt: Optional[float]
    cadence: int
    S_max_factor: float
    s_ratio: float
    heat_substeps: int
    frame_init: str
    stencil_spacing: float
    stencil_order: int
    covariance_theta: float
    K_cal: int
    direction_count: int
    omegas: Tuple[float, ...]
    norm_ks: Tuple[int, ...]
    norm_time_nodes: int
    norm_half_width: float
    envelope_sigma: float
    seed: int
    workers: int


@dataclass(frozen=True)
class ProbeSpec:
    estimates: Tuple[str, ...]
    ks: Tuple[int, ...]
    ensemble: int
    rho: float
    tau: float
    time_nodes: int
    n: int
    box_length: float
    max_velocities: int
    slabs: int
    duhamel_ks: Tuple[int, ...]


@dataclass(frozen=True)
class GateSpec:
    conservation_drift: float
    helical_error: float
    identity_linf: float
    caloric_condition: float
    aform_relative: float
    covariance: float
    mass_identity: float
    slope_bounds: Dict[str, float]
    dyadic_decay_factor: float
    lipschitz_tolerance: float
    envelope_ratio: float


@dataclass(frozen=True)
class OutputSpec:
    dir: str
    checkpoints: bool
    duckdb: str

    @property
    def path(self) -> Path:
        return Path(self.dir)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    grid: GridSpec
    physics: PhysicsSpec
    run: RunSpec
    probe: ProbeSpec
    gates: GateSpec
    outputs: OutputSpec
    pipeline: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_gauge_scenario(self) -> bool:
        return self.scenario in GAUGE_SCENARIOS

    @property
    def probe_grid(self) -> GridSpec:
        return GridSpec(self.grid.d, self.probe.n, self.probe.box_length)

    def to_dict(self) -> Dict[str, Any]:
        """Plain nested dict (the resolved configuration)."""
        out = asdict(self)
        out["grid"] = {"d": self.grid.d, "n": self.grid.n, "box_length": self.grid.box_length}
        return out


def _merge(base: Dict[str, Any], override: Dict[str, Any], path: str = "") -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"Unknown configuration key '{where}'")
        if isinstance(base[key], dict) and key != "slope_bounds":
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}' must be a mapping")
            merged[key] = _merge(base[key], value, where)
        else:
            merged[key] = value
    return merged


def _typed(section: Dict[str, Any], name: str, kinds: tuple, where: str) -> Any:
    value = section[name]
    if isinstance(value, bool) and bool not in kinds:
        raise ConfigError(f"'{where}.{name}' must be {kinds[0].__name__}, got a boolean")
    if not isinstance(value, kinds):
        raise ConfigError(f"'{where}.{name}' must be {kinds[0].__name__}, got {type(value).__name__}")
    return value


def _vector(value: Any, where: str) -> Tuple[float, float, float]:
    try:
        vec = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"'{where}' must be a list of three numbers")
    if vec.shape != (3,):
        raise ConfigError(f"'{where}' must have three components")
    if abs(np.linalg.norm(vec) - 1.0) > 1e-10:
        raise ConfigError(f"'{where}' must be a unit vector, got {vec.tolist()}")
    return tuple(float(c) for c in vec)


def _build(raw: Dict[str, Any]) -> ScenarioConfig:
    scenario = raw["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(f"Unknown scenario '{scenario}', expected one of {SCENARIOS}")

    g = raw["grid"]
    grid = GridSpec(_typed(g, "d", (int,), "grid"), _typed(g, "n", (int,), "grid"),
                    float(_typed(g, "box_length", (float, int), "grid")))

    p = raw["physics"]
    q = _vector(p["Q"], "physics.Q")
    q_prime = _vector(p["Q_prime"], "physics.Q_prime")
    if abs(np.dot(q, q_prime)) > 1e-10:
        raise ConfigError("physics.Q_prime must be orthogonal to physics.Q")
    physics = PhysicsSpec(
        q, q_prime,
        float(_typed(p, "theta", (float, int), "physics")),
        float(_typed(p, "kappa", (float, int), "physics")),
        float(_typed(p, "amplitude", (float, int), "physics")),
        float(_typed(p, "width", (float, int), "physics")),
        _typed(p, "band_k", (int,), "physics"),
        tuple(float(h) for h in _typed(p, "h_values", (list,), "physics")),
    )
    if physics.width <= 0:
        raise ConfigError("physics.width must be positive")

    r = raw["run"]
    dt = r["dt"]
    if dt is not None and (isinstance(dt, bool) or not isinstance(dt, (int, float)) or dt <= 0):
        raise ConfigError("run.dt must be a positive number or null")
    run = RunSpec(
        float(_typed(r, "T", (float, int), "run")), None if dt is None else float(dt),
        _typed(r, "cadence", (int,), "run"),
        float(_typed(r, "S_max_factor", (float, int), "run")),
        float(_typed(r, "s_ratio", (float, int), "run")),
        _typed(r, "heat_substeps", (int,), "run"),
        _typed(r, "frame_init", (str,), "run"),
        float(_typed(r, "stencil_spacing", (float, int), "run")),
        _typed(r, "stencil_order", (int,), "run"),
        float(_typed(r, "covariance_theta", (float, int), "run")),
        _typed(r, "K_cal", (int,), "run"),
        _typed(r, "direction_count", (int,), "run"),
        tuple(float(w) for w in _typed(r, "omegas", (list,), "run")),
        tuple(int(k) for k in _typed(r, "norm_ks", (list,), "run")),
        _typed(r, "norm_time_nodes", (int,), "run"),
        float(_typed(r, "norm_half_width", (float, int), "run")),
        float(_typed(r, "envelope_sigma", (float, int), "run")),
        _typed(r, "seed", (int,), "run"),
        _typed(r, "workers", (int,), "run"),
    )
    if run.frame_init not in ("rotation", "projection"):
        raise ConfigError(f"run.frame_init must be 'rotation' or 'projection', got '{run.frame_init}'")
    if run.cadence < 1 or run.workers < 1 or run.heat_substeps < 1:
        raise ConfigError("run.cadence, run.workers and run.heat_substeps must be positive")
    if run.norm_time_nodes < 9 or run.norm_time_nodes % 2 == 0:
        raise ConfigError("run.norm_time_nodes must be odd and at least 9")
    if run.norm_half_width <= 0 or run.T <= 0:
        raise ConfigError("run.T and run.norm_half_width must be positive")

    pr = raw["probe"]
    probe = ProbeSpec(
        tuple(_typed(pr, "estimates", (list,), "probe")),
        tuple(int(k) for k in _typed(pr, "ks", (list,), "probe")),
        _typed(pr, "ensemble", (int,), "probe"),
        float(_typed(pr, "rho", (float, int), "probe")),
        float(_typed(pr, "tau", (float, int), "probe")),
        _typed(pr, "time_nodes", (int,), "probe"),
        _typed(pr, "n", (int,), "probe"),
        float(_typed(pr, "box_length", (float, int), "probe")),
        _typed(pr, "max_velocities", (int,), "probe"),
        _typed(pr, "slabs", (int,), "probe"),
        tuple(int(k) for k in _typed(pr, "duhamel_ks", (list,), "probe")),
    )

    gt = raw["gates"]
    gates = GateSpec(
        **{name: float(_typed(gt, name, (float, int), "gates"))
           for name in ("conservation_drift", "helical_error", "identity_linf", "caloric_condition",
                        "aform_relative", "covariance", "mass_identity", "dyadic_decay_factor",
                        "lipschitz_tolerance", "envelope_ratio")},
        slope_bounds={str(k): float(v) for k, v in _typed(gt, "slope_bounds", (dict,), "gates").items()},
    )

    o = raw["outputs"]
    outputs = OutputSpec(str(_typed(o, "dir", (str,), "outputs")),
                         bool(_typed(o, "checkpoints", (bool,), "outputs")),
                         str(_typed(o, "duckdb", (str,), "outputs")))

    return ScenarioConfig(scenario, grid, physics, run, probe, gates, outputs, dict(raw["pipeline"]))


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    """
    Load a YAML scenario file over the defaults.

    Args:
        path: YAML file (defaults only when None)
        overrides: Nested mapping applied after the file, e.g. {"run": {"seed": 3}}

    Returns:
        Frozen ScenarioConfig

    Raises:
        ConfigError: On unknown keys, wrong types or invalid values
        FileNotFoundError: If path does not exist
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        with open(path, "r") as f:
            try:
                raw = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"Invalid YAML in {path}: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"{path} must contain a mapping at the top level")
    merged = _merge(DEFAULT_CONFIG, raw)
    if overrides:
        merged = _merge(merged, overrides)
    config = _build(merged)
    logger.debug("Loaded scenario '%s' (hash %s)", config.scenario, config_hash(config)[:12])
    return config


def config_hash(config: ScenarioConfig) -> str:
    """SHA-256 of the canonical JSON of the resolved configuration."""
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _reference_lines(section: Dict[str, Any], prefix: str) -> List[str]:
    lines = []
    for key, value in section.items():
        name = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict) and value and not all(isinstance(v, (int, float)) for v in value.values()):
            lines.extend(_reference_lines(value, name))
        else:
            lines.append(f"| `{name}` | `{json.dumps(value)}` |")
    return lines


def write_config_reference(path: str) -> Path:
    """Write a Markdown table of every configuration key and its default."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "# Configuration reference",
        "",
        "Every key accepted in the scenario YAML file, with its default.",
        "",
        "| Key | Default |",
        "|-----|---------|",
    ]
    lines.extend(_reference_lines(DEFAULT_CONFIG, ""))
    out.write_text("\n".join(lines) + "\n")
    print(f"Saved configuration reference: {out}")
    return out
