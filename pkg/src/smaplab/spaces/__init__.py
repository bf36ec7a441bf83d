"""
Space-time norm evaluators.

Lateral norms L^{p,q}_e take L^p along the direction e and L^q over the
transverse variables and time. Directions are lattice directions of the
periodic grid, so the hyperplanes x.e = const are resampled exactly by
grouping grid points on (a . index) mod n. Galilean-shifted variants use
the boost T_{lambda e}; sum-type norms are reported as upper bounds over an
explicit family of candidate decompositions.
"""

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import BandLeakageError, ConfigError, DirectionSetError
from ..spectral import (
    DyadicWindow, GridSpec, SpaceTimeField, annulus_leakage, check_unit, chi_k,
    forward, galilean_transform, inverse, project_dyadic,
)

logger = logging.getLogger(__name__)

INF = float("inf")
MAX_LATTICE_HEIGHT = 8

_DIRECTIONS_2D = [
    (1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (2, -1), (1, 2), (1, -2),
    (3, 1), (3, -1), (1, 3), (1, -3), (3, 2), (3, -2), (2, 3), (2, -3),
]
_DIRECTIONS_3D = [
    (1, 0, 0), (0, 1, 0), (0, 0, 1),
    (1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1),
]


def strichartz_exponent(d: int) -> float:
    """p_d = (2d + 4) / d."""
    return (2.0 * d + 4.0) / d


def dual_exponent(p: float) -> float:
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    return p / (p - 1.0)


# ---------------------------------------------------------------------------
# Directions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeDirection:
    """Unit direction parallel to a primitive integer vector."""

    vector: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not any(self.vector):
            raise DirectionSetError("Zero lattice vector")
        if reduce(gcd, (abs(c) for c in self.vector)) != 1:
            raise DirectionSetError(f"Lattice vector {self.vector} is not primitive")
        if all(c % 2 == 0 for c in self.vector):
            raise DirectionSetError(f"Lattice vector {self.vector} has no odd entry")

    @property
    def length(self) -> float:
        return float(np.sqrt(sum(c * c for c in self.vector)))

    @property
    def unit(self) -> np.ndarray:
        return np.asarray(self.vector, dtype=float) / self.length

    def labels(self, grid: GridSpec) -> np.ndarray:
        """Leaf index (a . i) mod n of every grid point, flattened."""
        idx = np.indices(grid.shape).reshape(grid.d, -1)
        return np.mod(np.asarray(self.vector) @ idx, grid.n)


def direction_set(d: int, count: Optional[int] = None) -> List[LatticeDirection]:
    """
    Lattice direction set ordered by height.

    d=2 accepts 2, 4, 8 or 16 directions (default 8); d=3 accepts 3 or 9
    (default 9, the axes and face diagonals).
    """
    if d == 2:
        count = 8 if count is None else count
        if count not in (2, 4, 8, 16):
            raise ConfigError(f"d=2 direction sets have 2, 4, 8 or 16 members, got {count}")
        return [LatticeDirection(v) for v in _DIRECTIONS_2D[:count]]
    if d == 3:
        count = 9 if count is None else count
        if count not in (3, 9):
            raise ConfigError(f"d=3 direction sets have 3 or 9 members, got {count}")
        return [LatticeDirection(v) for v in _DIRECTIONS_3D[:count]]
    raise ConfigError(f"Unsupported dimension {d}")


def lattice_direction(e: Sequence[float], d: int) -> LatticeDirection:
    """
    Identify a unit vector with a lattice direction.

    Raises:
        InvalidDirectionError: If e is not a unit vector
        DirectionSetError: If e is not parallel to a small primitive integer vector
    """
    e = check_unit(e, d)
    pivot = int(np.argmax(np.abs(e)))
    ratios = [Fraction(float(c / e[pivot])).limit_denominator(MAX_LATTICE_HEIGHT) for c in e]
    denominator = reduce(lambda a, b: a * b // gcd(a, b), (r.denominator for r in ratios), 1)
    vector = [int(r * denominator) for r in ratios]
    common = reduce(gcd, (abs(c) for c in vector))
    vector = tuple(c // common for c in vector)
    candidate = np.asarray(vector, dtype=float)
    candidate /= np.linalg.norm(candidate)
    if candidate @ e < 0:
        candidate, vector = -candidate, tuple(-c for c in vector)
    if max(abs(c) for c in vector) > MAX_LATTICE_HEIGHT or np.max(np.abs(candidate - e)) > 1e-9:
        raise DirectionSetError(f"Direction {e.tolist()} is not a supported lattice direction")
    return LatticeDirection(vector)


def _as_direction(e: object, d: int) -> LatticeDirection:
    return e if isinstance(e, LatticeDirection) else lattice_direction(e, d)


# ---------------------------------------------------------------------------
# Iterated quadrature
# ---------------------------------------------------------------------------

def _power_sum(values: np.ndarray, weights: np.ndarray, exponent: float) -> np.ndarray:
    if exponent == INF:
        return np.max(values, axis=0)
    return np.tensordot(weights, values ** exponent, axes=(0, 0))


def _finish(total: np.ndarray, exponent: float) -> np.ndarray:
    return total if exponent == INF else total ** (1.0 / exponent)


def _lateral_from_modulus(modulus: np.ndarray, u: SpaceTimeField, p: float, q: float,
                          direction: LatticeDirection) -> float:
    """Iterated norm of a modulus array (nt, N) along the direction's leaves."""
    grid = u.grid
    labels = direction.labels(grid)
    inner_measure = grid.dx ** (grid.d - 1) * direction.length
    outer_measure = grid.dx / direction.length
    if q == INF:
        peak = modulus.max(axis=0)
        inner = np.zeros(grid.n)
        np.maximum.at(inner, labels, peak)
    else:
        per_point = np.tensordot(u.time_weights(), modulus ** q, axes=(0, 0)) * inner_measure
        inner = np.bincount(labels, weights=per_point, minlength=grid.n) ** (1.0 / q)
    if p == INF:
        return float(inner.max())
    return float((outer_measure * np.sum(inner ** p)) ** (1.0 / p))


def shifted_modulus(u: SpaceTimeField, e: np.ndarray, lam: float) -> np.ndarray:
    """|T_{lam e} u| flattened to shape (nt, N)."""
    values = galilean_transform(u, lam * np.asarray(e)).values if lam else u.values
    return np.abs(values).reshape(values.shape[0], -1)


def lateral_norm(u: SpaceTimeField, p: float, q: float, e: object, lam: float = 0.0) -> float:
    """
    ||T_{lam e} u||_{L^{p,q}_e}: inner L^q over transverse variables and t,
    outer L^p along e; infinite exponents are maxima over nodes.

    Raises:
        DirectionSetError: If e is not a lattice direction of the grid
    """
    _check_exponents(p, q)
    direction = _as_direction(e, u.grid.d)
    return _lateral_from_modulus(shifted_modulus(u, direction.unit, lam), u, p, q, direction)


def _check_exponents(*exponents: float) -> None:
    for r in exponents:
        if not (r == INF or r >= 1):
            raise ConfigError(f"Exponents must lie in [1, inf], got {r}")


def lebesgue_norm(u: SpaceTimeField, p: float) -> float:
    """Space-time L^p norm."""
    _check_exponents(p)
    modulus = np.abs(u.values).reshape(u.times.size, -1)
    if p == INF:
        return float(modulus.max())
    total = np.tensordot(u.time_weights(), modulus ** p, axes=(0, 0)).sum() * u.grid.cell_volume
    return float(total ** (1.0 / p))


def time_space_norm(u: SpaceTimeField, p_t: float, r_x: float) -> float:
    """L^{p_t}_t L^{r_x}_x (time outer)."""
    _check_exponents(p_t, r_x)
    modulus = np.abs(u.values).reshape(u.times.size, -1)
    if r_x == INF:
        inner = modulus.max(axis=1)
    else:
        inner = (np.sum(modulus ** r_x, axis=1) * u.grid.cell_volume) ** (1.0 / r_x)
    if p_t == INF:
        return float(inner.max())
    return float(np.sum(u.time_weights() * inner ** p_t) ** (1.0 / p_t))


def space_time_norm(u: SpaceTimeField, p_x: float, q_t: float) -> float:
    """L^{p_x}_x L^{q_t}_t (space outer)."""
    _check_exponents(p_x, q_t)
    modulus = np.abs(u.values).reshape(u.times.size, -1)
    inner = _finish(_power_sum(modulus, u.time_weights(), q_t), q_t)
    if p_x == INF:
        return float(inner.max())
    return float((np.sum(inner ** p_x) * u.grid.cell_volume) ** (1.0 / p_x))


def inner_product(u: SpaceTimeField, g: SpaceTimeField) -> complex:
    """Space-time pairing with the quadrature used by the norms."""
    pointwise = np.sum((u.values * np.conj(g.values)).reshape(u.times.size, -1), axis=1)
    return complex(np.sum(u.time_weights() * pointwise) * u.grid.cell_volume)


# ---------------------------------------------------------------------------
# Velocity sets, sum and intersection spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocitySet:
    """
    Speeds lambda in [-2^k, 2^k] with 2^(k + 2K) lambda integral.

    full_count is the size of the complete lattice; when it exceeds the
    evaluation cap the set is thinned to a symmetric sub-lattice that keeps
    0 and the endpoints, and |W| refers to the thinned set.
    """

    k: int
    K_cal: int
    lambdas: Tuple[float, ...]
    full_count: int

    @property
    def thinned(self) -> bool:
        return len(self.lambdas) < self.full_count

    def __len__(self) -> int:
        return len(self.lambdas)


def full_velocity_count(k: int, K_cal: int) -> int:
    exponent = 2 * k + 2 * K_cal
    return 2 * (2 ** exponent) + 1 if exponent >= 0 else 1


def velocity_set(k: int, K_cal: int = 2, max_count: Optional[int] = 33) -> VelocitySet:
    """Build W_k, thinned to at most max_count members (None keeps all)."""
    full = full_velocity_count(k, K_cal)
    half = (full - 1) // 2
    spacing = 2.0 ** (-(k + 2 * K_cal))
    stride = 1
    if max_count is not None:
        if max_count < 3:
            raise ConfigError("Velocity sets need room for at least 3 members")
        while half and 2 * (half // stride) + 1 > max_count:
            stride *= 2
    j = np.arange(-half, half + 1, stride)
    return VelocitySet(k, K_cal, tuple(float(v) for v in j * spacing), full)


@dataclass(frozen=True)
class SumNormBound:
    """Upper bound of a sum-space norm and the candidate that attains it."""

    value: float
    candidate: str
    candidates: Dict[str, float] = field(default_factory=dict)


def _time_slabs(nt: int, slabs: int) -> List[np.ndarray]:
    slabs = max(1, min(slabs, nt))
    return [np.asarray(s) for s in np.array_split(np.arange(nt), slabs)]


def _masked(modulus: np.ndarray, rows: np.ndarray) -> np.ndarray:
    out = np.zeros_like(modulus)
    out[rows] = modulus[rows]
    return out


def _combine(values: Sequence[float], size: int, r: float) -> float:
    values = np.asarray(values, dtype=float)
    if r == INF:
        return float(values.max())
    return float((size ** (r - 1.0) * np.sum(values ** r)) ** (1.0 / r))


def sum_space_norm(u: SpaceTimeField, p: float, q: float, e: object, W: VelocitySet,
                   r: float = 1.0, slabs: int = 4) -> SumNormBound:
    """
    Upper bound of ||u||_{Sigma^r} = (|W|^{r-1} inf sum ||u_lam||^r_{L^{p,q}_{e,lam}})^{1/r}.

    Candidates: all mass on a single lambda, the even split u_lam = u/|W|,
    and a greedy assignment of time slabs to their best lambda. The bound
    never exceeds the best single-lambda value.
    """
    _check_exponents(p, q, r)
    direction = _as_direction(e, u.grid.d)
    size = len(W)
    moduli = [shifted_modulus(u, direction.unit, lam) for lam in W.lambdas]
    norms = [_lateral_from_modulus(m, u, p, q, direction) for m in moduli]
    candidates = {"single": _combine([min(norms)], size, r)}
    if r != INF:
        candidates["even"] = float((np.mean(np.asarray(norms) ** r)) ** (1.0 / r))
    assignment: Dict[int, List[np.ndarray]] = {}
    for rows in _time_slabs(u.times.size, slabs):
        slab_norms = [_lateral_from_modulus(_masked(m, rows), u, p, q, direction) for m in moduli]
        assignment.setdefault(int(np.argmin(slab_norms)), []).append(rows)
    pieces = [_lateral_from_modulus(_masked(moduli[j], np.concatenate(rows)), u, p, q, direction)
              for j, rows in sorted(assignment.items())]
    candidates["greedy-slab"] = _combine(pieces, size, r)
    best = min(candidates, key=candidates.get)
    return SumNormBound(candidates[best], best, candidates)


def intersection_space_norm(u: SpaceTimeField, p: float, q: float, e: object,
                            W: VelocitySet, r: float = 2.0) -> float:
    """(|W|^{-1} sum_lam ||u||^r_{L^{p,q}_{e,lam}})^{1/r}, exact."""
    _check_exponents(p, q, r)
    direction = _as_direction(e, u.grid.d)
    norms = np.asarray([lateral_norm(u, p, q, direction, lam) for lam in W.lambdas])
    if r == INF:
        return float(norms.max())
    return float(np.mean(norms ** r) ** (1.0 / r))


# ---------------------------------------------------------------------------
# Composite norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormParams:
    """
    Parameters of the composite norms.

    The offsets replace the large fixed gaps of the continuum definitions
    (k+40 and friends) by values a desk-scale grid can resolve.
    """

    d: int
    K_cal: int = 2
    omega: float = 0.0
    direction_count: Optional[int] = None
    shell_gap: int = 20
    w_offset: int = 5
    n_offset: int = -5
    lambda_gap: int = 5
    max_velocities: int = 33
    fk_depth: int = 2
    slabs: int = 4
    leakage_limit: float = 0.01

    def __post_init__(self) -> None:
        if self.d not in (2, 3):
            raise ConfigError(f"Norm dimension must be 2 or 3, got {self.d}")
        if not 0.0 <= self.omega <= 0.5:
            raise ConfigError(f"omega must lie in [0, 1/2], got {self.omega}")
        if self.K_cal < 1:
            raise ConfigError("K_cal must be a positive integer")

    def directions(self) -> List[LatticeDirection]:
        return direction_set(self.d, self.direction_count)


@dataclass(frozen=True)
class NormResult:
    name: str
    k: int
    value: float
    components: Dict[str, float]
    candidate: str = "exact"
    direction_count: int = 0

    def row(self, scenario: str) -> Dict[str, object]:
        """CSV record {scenario, k, norm, directions, value, candidate}."""
        return {"scenario": scenario, "k": self.k, "norm": self.name,
                "directions": self.direction_count, "value": self.value,
                "candidate": self.candidate}


COMPOSITE_NORMS = ("F0", "F", "G", "N", "S")


def _check_localized(u: SpaceTimeField, k: int, params: NormParams) -> None:
    if params.d != u.grid.d:
        raise ConfigError(f"Norm parameters are for d={params.d}, field has d={u.grid.d}")
    if params.d == 2 and u.half_width > 2.0 ** (2 * params.K_cal) * (1 + 1e-12):
        raise ConfigError(f"d=2 norms need T <= 2^(2K) = {2.0 ** (2 * params.K_cal)}")
    leakage = annulus_leakage(u.values, u.grid, k)
    if leakage > params.leakage_limit:
        raise BandLeakageError(f"{100 * leakage:.2f}% of the spectral mass lies outside I_{k}")


def _map_slices(u: SpaceTimeField, fn: Callable[[np.ndarray], np.ndarray]) -> SpaceTimeField:
    return u.with_values(fn(u.values))


def _directional_piece(u: SpaceTimeField, j: int, e: np.ndarray) -> SpaceTimeField:
    multiplier = chi_k(u.grid.k_dot(e), j)
    return _map_slices(u, lambda f: inverse(forward(f, u.grid) * multiplier, u.grid))


def _strichartz_pieces(u: SpaceTimeField, k: int) -> Dict[str, float]:
    d = u.grid.d
    p_d = strichartz_exponent(d)
    return {
        "LinfL2": time_space_norm(u, INF, 2.0),
        "Lpd": lebesgue_norm(u, p_d),
        "LpdxLinft": 2.0 ** (-k * d / (d + 2.0)) * space_time_norm(u, p_d, INF),
    }


def _f0_components(u: SpaceTimeField, k: int, params: NormParams) -> Tuple[Dict[str, float], str]:
    comps = _strichartz_pieces(u, k)
    W = velocity_set(k + params.w_offset, params.K_cal, params.max_velocities)
    worst, family = 0.0, "single"
    for direction in params.directions():
        bound = sum_space_norm(u, 2.0, INF, direction, W, 1.0, params.slabs)
        if bound.value >= worst:
            worst, family = bound.value, bound.candidate
    comps["maximal_W"] = 2.0 ** (-k / 2.0) * worst
    return comps, family


def _f_components_high(u: SpaceTimeField, k: int, params: NormParams) -> Dict[str, float]:
    d = u.grid.d
    comps = _strichartz_pieces(u, k)
    comps["maximal"] = 2.0 ** (-k * (d - 1) / 2.0) * max(
        lateral_norm(u, 2.0, INF, direction) for direction in params.directions())
    return comps


def _shells(u: SpaceTimeField, k: int, params: NormParams) -> range:
    return DyadicWindow.from_grid(u.grid).clip(k - params.shell_gap, k + params.shell_gap)


def _smoothing_sup(u: SpaceTimeField, k: int, params: NormParams,
                   lambdas: Sequence[float]) -> float:
    best = 0.0
    for j in _shells(u, k, params):
        for direction in params.directions():
            piece = _directional_piece(u, j, direction.unit)
            for lam in lambdas:
                best = max(best, lateral_norm(piece, INF, 2.0, direction, lam))
    return best


def _g_components(u: SpaceTimeField, k: int, params: NormParams) -> Tuple[Dict[str, float], str]:
    if u.grid.d == 2:
        comps, family = _f0_components(u, k, params)
        directions = params.directions()
        comps["L36"] = 2.0 ** (-k / 6.0) * max(lateral_norm(u, 3.0, 6.0, e) for e in directions)
        comps["P_L63"] = 2.0 ** (k / 6.0) * max(
            lateral_norm(_directional_piece(u, j, e.unit), 6.0, 3.0, e)
            for j in _shells(u, k, params) for e in directions)
        reach = 2.0 ** (k - params.lambda_gap)
        comps["P_smoothing"] = 2.0 ** (k / 2.0) * _smoothing_sup(u, k, params, (0.0, -0.5 * reach, 0.5 * reach))
        return comps, family
    comps = _f_components_high(u, k, params)
    comps["P_smoothing"] = 2.0 ** (k / 2.0) * _smoothing_sup(u, k, params, (0.0,))
    return comps, "exact"


def _n_parts(u: SpaceTimeField, k: int, params: NormParams) -> List[Tuple[str, Callable[[SpaceTimeField], float]]]:
    d = u.grid.d
    directions = params.directions()
    if d == 2:
        W = velocity_set(k + params.n_offset, params.K_cal, params.max_velocities)

        def dual_smoothing(f: SpaceTimeField) -> float:
            return 2.0 ** (-k / 2.0) * max(
                sum_space_norm(f, 1.0, 2.0, e, W, 1.0, params.slabs).value for e in directions)

        return [
            ("L43", lambda f: lebesgue_norm(f, 4.0 / 3.0)),
            ("L32_e1", lambda f: 2.0 ** (k / 6.0) * lateral_norm(f, 1.5, 1.2, (1.0, 0.0))),
            ("L32_e2", lambda f: 2.0 ** (k / 6.0) * lateral_norm(f, 1.5, 1.2, (0.0, 1.0))),
            ("L12_W", dual_smoothing),
        ]
    p_dual = dual_exponent(strichartz_exponent(d))
    return [
        ("Lpd_dual", lambda f: lebesgue_norm(f, p_dual)),
        ("L12", lambda f: 2.0 ** (-k / 2.0) * max(lateral_norm(f, 1.0, 2.0, e) for e in directions)),
    ]


def _n_bound(u: SpaceTimeField, k: int, params: NormParams) -> Tuple[float, Dict[str, float], str]:
    parts = _n_parts(u, k, params)
    candidates = {f"all-{name}": fn(u) for name, fn in parts}
    assignment: Dict[int, List[np.ndarray]] = {}
    for rows in _time_slabs(u.times.size, params.slabs):
        piece = u.with_values(_masked(u.values, rows))
        costs = [fn(piece) for _, fn in parts]
        assignment.setdefault(int(np.argmin(costs)), []).append(rows)
    greedy = 0.0
    for j, rows in assignment.items():
        greedy += parts[j][1](u.with_values(_masked(u.values, np.concatenate(rows))))
    candidates["greedy-slab"] = greedy
    best = min(candidates, key=candidates.get)
    return candidates[best], candidates, best


def _s_components(u: SpaceTimeField, k: int, omega: float) -> Dict[str, float]:
    d = u.grid.d
    p_d = strichartz_exponent(d)
    two_omega = 1.0 / (0.5 + omega / d)
    p_omega = 1.0 / (1.0 / p_d + omega / d)
    scale = 2.0 ** (k * omega)
    return {
        "LinfL2w": scale * time_space_norm(u, INF, two_omega),
        "LpdLpw": scale * time_space_norm(u, p_d, p_omega),
        "LpwLinf": scale * 2.0 ** (-k * d / (d + 2.0)) * space_time_norm(u, p_omega, INF),
    }


def composite_norm(u: SpaceTimeField, k: int, which: str, params: NormParams) -> NormResult:
    """
    Evaluate F_k^0, F_k, G_k, N_k or S_k^omega of a field localized at 2^k.

    F_k (d=2) and N_k are upper bounds over candidate decompositions; the
    chosen candidate is reported.

    Raises:
        BandLeakageError: If more than 1% of the spectral mass is outside I_k
        ConfigError: If params do not match the field or T exceeds 2^(2K) in d=2
    """
    if which not in COMPOSITE_NORMS:
        raise ConfigError(f"Unknown composite norm '{which}', expected one of {COMPOSITE_NORMS}")
    _check_localized(u, k, params)
    count = len(params.directions())
    d = u.grid.d
    if which == "S":
        comps = _s_components(u, k, params.omega)
        return NormResult(f"S^{params.omega:g}", k, sum(comps.values()), comps, "exact", 0)
    if which == "N":
        value, comps, best = _n_bound(u, k, params)
        return NormResult("N", k, value, comps, best, count)
    if which == "G":
        comps, family = _g_components(u, k, params)
        return NormResult("G", k, sum(comps.values()), comps, family, count)
    if d == 3:
        comps = _f_components_high(u, k, params)
        return NormResult(which, k, sum(comps.values()), comps, "exact", count)
    if which == "F0":
        comps, family = _f0_components(u, k, params)
        return NormResult("F0", k, sum(comps.values()), comps, family, count)
    candidates = {}
    for m in range(params.fk_depth + 1):
        comps, _ = _f0_components(u, k + m, params)
        candidates[f"m={m}"] = 2.0 ** m * sum(comps.values())
    best = min(candidates, key=candidates.get)
    return NormResult("F", k, candidates[best], candidates, best, count)


def direction_refinement(u: SpaceTimeField, k: int, params: NormParams) -> Dict[str, float]:
    """G_k with the coarse and the refined direction set (d=2: 8 and 16)."""
    coarse, fine = (8, 16) if params.d == 2 else (3, 9)
    g_coarse = composite_norm(u, k, "G", replace(params, direction_count=coarse)).value
    g_fine = composite_norm(u, k, "G", replace(params, direction_count=fine)).value
    return {"coarse": g_coarse, "fine": g_fine,
            "relative_change": abs(g_fine - g_coarse) / max(g_coarse, 1e-300)}


# ---------------------------------------------------------------------------
# Frequency envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyEnvelope:
    """gamma_k = sup_k' 2^(-delta |k - k'|) alpha_k' over a dyadic window."""

    gamma: Dict[int, float]
    alpha: Dict[int, float]
    sigma: float
    delta: float

    def slowly_varying_defect(self) -> float:
        """Largest gamma_k - gamma_j 2^(delta |k-j|) over all pairs (<= 0 when valid)."""
        worst = -INF
        for k, gk in self.gamma.items():
            for j, gj in self.gamma.items():
                worst = max(worst, gk - gj * 2.0 ** (self.delta * abs(k - j)))
        return worst

    def energy_ratio(self) -> float:
        """sum gamma_k^2 / sum alpha_k^2."""
        alpha_sq = sum(a * a for a in self.alpha.values())
        return sum(g * g for g in self.gamma.values()) / alpha_sq if alpha_sq else 0.0

    @staticmethod
    def geometric_constant(delta: float) -> float:
        """(1 + 2^(-2 delta)) / (1 - 2^(-2 delta)), the a priori bound on energy_ratio."""
        q = 2.0 ** (-2.0 * delta)
        return (1.0 + q) / (1.0 - q)


def envelope_from_alpha(alpha: Dict[int, float], sigma: float, d: int) -> FrequencyEnvelope:
    delta = 1.0 / (20.0 * d)
    gamma = {k: max(2.0 ** (-delta * abs(k - kp)) * a for kp, a in alpha.items()) for k in alpha}
    return FrequencyEnvelope(gamma, dict(alpha), sigma, delta)


def frequency_envelope(source: object, grid: GridSpec, sigma: float,
                       window: Optional[DyadicWindow] = None, gradient_of: bool = False) -> FrequencyEnvelope:
    """
    Envelope of alpha_k = 2^(sigma k) ||P_k u||_{L^inf_t L^2_x}.

    Args:
        source: SpaceTimeField, or an array with spatial axes last
        grid: Grid of the source
        sigma: Regularity index
        window: Dyadic window (defaults to the grid's)
        gradient_of: Use ||P_k grad u|| (data envelope c_k) instead of ||P_k u||
    """
    window = DyadicWindow.from_grid(grid) if window is None else window
    values = source.values if isinstance(source, SpaceTimeField) else np.asarray(source)
    if not isinstance(source, SpaceTimeField):
        values = values[None]
    alpha = {}
    for k in window:
        piece = project_dyadic(values, grid, k)
        if gradient_of:
            kabs = grid.k_abs()
            piece = inverse(forward(piece, grid) * kabs, grid)
        per_time = np.sqrt(np.sum(np.abs(piece.reshape(piece.shape[0], -1)) ** 2, axis=1)
                           * grid.cell_volume)
        alpha[k] = 2.0 ** (sigma * k) * float(per_time.max())
    return envelope_from_alpha(alpha, sigma, grid.d)


def rescale_field(u: SpaceTimeField, mu: float) -> SpaceTimeField:
    """Same samples on the grid shrunk by mu and times shrunk by mu^2."""
    return SpaceTimeField(u.values.copy(), u.times / mu ** 2, u.grid.rescaled(mu))


__all__ = [
    "LatticeDirection", "VelocitySet", "SumNormBound", "NormParams", "NormResult",
    "FrequencyEnvelope", "direction_set", "lattice_direction", "lateral_norm",
    "lebesgue_norm", "time_space_norm", "space_time_norm", "inner_product",
    "velocity_set", "full_velocity_count", "sum_space_norm", "intersection_space_norm",
    "composite_norm", "direction_refinement", "frequency_envelope", "envelope_from_alpha",
    "strichartz_exponent", "dual_exponent", "rescale_field", "shifted_modulus",
    "SpaceTimeField", "COMPOSITE_NORMS",
]
