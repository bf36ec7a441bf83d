"""
Linear estimate probes.

Random band-limited data f at frequency 2^k is evolved by the exact free
propagator; each probe divides a space-time norm of the evolution by the
dyadic power its estimate predicts. The estimates are scale invariant, so
the normalized ratio should be flat in k; the fitted log2-slope is what the
gates check.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import BandLeakageError, ConfigError, InsufficientDataError
from ..spaces import (
    INF, NormParams, composite_norm, lateral_norm, lebesgue_norm, space_time_norm,
    strichartz_exponent, sum_space_norm, velocity_set,
)
from ..spectral import (
    DyadicWindow, GridSpec, SpaceTimeField, annulus_leakage, check_unit, forward,
    inverse, l2_norm,
)

logger = logging.getLogger(__name__)

MIN_ENSEMBLE = 16
MIN_SLOPE_POINTS = 3
CORE_BAND = (0.75, 1.5)


@dataclass(frozen=True)
class Estimate:
    """
    A probed linear estimate ||u||_X <= C 2^(exponent k) ||f||_2.

    norm is one of "lateral", "lebesgue", "maximal" or "sum"; (p, q) are its
    exponents and dims the admissible dimensions.
    """

    name: str
    norm: str
    p: float
    q: float
    dims: Tuple[int, ...]
    directional: bool = False
    lambda_gap: Optional[int] = None
    w_offset: Optional[int] = None

    def exponent(self, d: int) -> float:
        """Dyadic power fixed by parabolic scaling of the left side."""
        if self.norm == "lebesgue":
            return d / 2.0 - (d + 2.0) / self.p
        if self.norm == "maximal":
            return d / 2.0 - d / self.p
        return d / 2.0 - 1.0 / self.p - (d + 1.0) / self.q


ESTIMATES: Dict[str, Estimate] = {
    "locsmobound": Estimate("locsmobound", "lateral", INF, 2.0, (2, 3), directional=True, lambda_gap=5),
    "latstc": Estimate("latstc", "lateral", 2.0, INF, (3,)),
    "linnew": Estimate("linnew", "sum", 2.0, INF, (2,), w_offset=5),
    "linst": Estimate("linst", "lebesgue", 4.0, 4.0, (2, 3)),
    "linmax": Estimate("linmax", "maximal", 4.0, INF, (2, 3)),
    "latsta": Estimate("latsta", "lateral", 6.0, 3.0, (2, 3), directional=True),
    "latstb": Estimate("latstb", "lateral", 3.0, 6.0, (2, 3)),
}


def get_estimate(name: str, d: int) -> Estimate:
    """
    Raises:
        ConfigError: If the estimate is unknown or stated for another dimension
    """
    if name not in ESTIMATES:
        raise ConfigError(f"Unknown estimate '{name}', expected one of {sorted(ESTIMATES)}")
    estimate = ESTIMATES[name]
    if d not in estimate.dims:
        raise ConfigError(f"Estimate '{name}' is stated for d in {estimate.dims}, not d={d}")
    if estimate.norm in ("lebesgue", "maximal"):
        p_d = strichartz_exponent(d)
        q = INF if estimate.norm == "maximal" else p_d
        estimate = Estimate(name, estimate.norm, p_d, q, estimate.dims)
    return estimate


@dataclass(frozen=True)
class EnsembleSpec:
    """Random data and time window of a probe."""

    size: int = 32
    seed: int = 0
    rho: float = 4.0
    tau: float = 1.0
    time_nodes: int = 33
    K_cal: int = 2
    max_velocities: int = 33
    slabs: int = 4

    def __post_init__(self) -> None:
        if self.size < MIN_ENSEMBLE:
            raise ConfigError(f"Probe ensembles need at least {MIN_ENSEMBLE} members, got {self.size}")
        if self.time_nodes < 9 or self.time_nodes % 2 == 0:
            raise ConfigError("Probe time grids need an odd number (>= 9) of nodes")
        if self.rho <= 0 or self.tau <= 0:
            raise ConfigError("rho and tau must be positive")

    def half_width(self, k: int) -> float:
        """T_k = tau 4^(-k)."""
        return self.tau * 4.0 ** (-k)

    def times(self, k: int) -> np.ndarray:
        T = self.half_width(k)
        return np.linspace(-T, T, self.time_nodes)


@dataclass
class ProbeReport:
    estimate: str
    d: int
    K_cal: int
    ks: List[int]
    max_ratio: List[float]
    mean_ratio: List[float]
    exponent: float
    slope: float
    ensemble: int
    seed: int
    half_widths: List[float] = field(default_factory=list)

    def rows(self) -> List[Dict[str, object]]:
        """One JSON record per k."""
        return [
            {"estimate": self.estimate, "d": self.d, "K_cal": self.K_cal, "k": k,
             "max_ratio": mx, "mean_ratio": mn, "slope": self.slope,
             "ensemble": self.ensemble, "seed": self.seed, "T": T,
             "exponent": self.exponent}
            for k, mx, mn, T in zip(self.ks, self.max_ratio, self.mean_ratio, self.half_widths)
        ]


def free_evolution(f: np.ndarray, grid: GridSpec, times: Sequence[float]) -> SpaceTimeField:
    """u(t) = e^{it Delta} f, the Fourier multiplier e^{-it|xi|^2}, at every node."""
    times = np.asarray(times, dtype=float)
    t = times.reshape((-1,) + (1,) * grid.d)
    values = inverse(forward(np.asarray(f, dtype=complex), grid)[None] * np.exp(-1j * t * grid.k_squared()), grid)
    return SpaceTimeField(values, times, grid)


def band_mask(grid: GridSpec, k: int, band: Tuple[float, float] = (0.5, 2.0),
              e: Optional[Sequence[float]] = None) -> np.ndarray:
    """Indicator of band[0] 2^k <= |xi| <= band[1] 2^k, and of xi.e >= band[0] 2^k when e is given."""
    kabs = grid.k_abs()
    mask = (kabs >= band[0] * 2.0 ** k) & (kabs <= band[1] * 2.0 ** k)
    if e is not None:
        mask &= grid.k_dot(check_unit(e, grid.d)) >= band[0] * 2.0 ** k
    return mask


def random_band_data(grid: GridSpec, k: int, rng: np.random.Generator, rho: float = 4.0,
                     e: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Unit-L2 random datum localized at frequency 2^k and at distance rho 2^(-k) of the origin.

    Raises:
        BandOutOfRangeError: If k is outside the grid's dyadic window
    """
    DyadicWindow.from_grid(grid).check(k)
    shape = grid.shape
    coefficients = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * band_mask(grid, k, CORE_BAND, e)
    f = inverse(coefficients, grid)
    radius = rho * 2.0 ** (-k)
    r2 = sum(x ** 2 for x in grid.coordinates())
    f = f * np.exp(-0.5 * r2 / radius ** 2)
    f = inverse(forward(f, grid) * band_mask(grid, k, e=e), grid)
    norm = l2_norm(f, grid)
    if norm == 0.0:
        raise ConfigError(f"Band {k} holds no lattice frequencies on this grid")
    return f / norm


def _left_side(estimate: Estimate, u: SpaceTimeField, k: int, spec: EnsembleSpec,
               e: np.ndarray) -> float:
    if estimate.norm == "lebesgue":
        return lebesgue_norm(u, estimate.p)
    if estimate.norm == "maximal":
        return space_time_norm(u, estimate.p, INF)
    if estimate.norm == "sum":
        W = velocity_set(k + estimate.w_offset, spec.K_cal, spec.max_velocities)
        return sum_space_norm(u, estimate.p, estimate.q, e, W, r=2.0, slabs=spec.slabs).value
    lambdas = [0.0]
    if estimate.lambda_gap is not None:
        reach = 2.0 ** (k - estimate.lambda_gap)
        lambdas += [-reach, reach]
    return max(lateral_norm(u, estimate.p, estimate.q, e, lam) for lam in lambdas)


def log2_slope(ks: Sequence[int], ratios: Sequence[float]) -> float:
    """Least-squares slope of log2(ratio) against k."""
    if len(ks) < MIN_SLOPE_POINTS:
        raise InsufficientDataError(f"Slopes need at least {MIN_SLOPE_POINTS} k values, got {len(ks)}")
    return float(np.polyfit(np.asarray(ks, dtype=float), np.log2(np.asarray(ratios)), 1)[0])


def probe(estimate_name: str, ks: Sequence[int], grid: GridSpec,
          spec: Optional[EnsembleSpec] = None) -> ProbeReport:
    """
    Run one linear-estimate probe over an ensemble at each k.

    Args:
        estimate_name: Key of ESTIMATES
        ks: Dyadic indices to probe
        grid: Spatial grid
        spec: Ensemble and time-window settings

    Returns:
        ProbeReport with per-k ratio statistics and the log2-slope

    Raises:
        ConfigError: If the estimate does not apply in grid.d or T_k exceeds 2^(2K) in d=2
        InsufficientDataError: If fewer than 3 k values are given
    """
    spec = EnsembleSpec() if spec is None else spec
    estimate = get_estimate(estimate_name, grid.d)
    ks = sorted(int(k) for k in ks)
    if len(ks) < MIN_SLOPE_POINTS:
        raise InsufficientDataError(f"Probes need at least {MIN_SLOPE_POINTS} k values, got {len(ks)}")
    window = DyadicWindow.from_grid(grid)
    for k in ks:
        window.check(k)
        if grid.d == 2 and spec.half_width(k) > 2.0 ** (2 * spec.K_cal):
            raise ConfigError(f"T_{k} = {spec.half_width(k)} exceeds 2^(2K) = {2.0 ** (2 * spec.K_cal)}")
    e = np.eye(grid.d)[0]
    exponent = estimate.exponent(grid.d)
    rng = np.random.default_rng(spec.seed)
    max_ratio, mean_ratio, half_widths = [], [], []
    for k in ks:
        times = spec.times(k)
        ratios = []
        for _ in range(spec.size):
            f = random_band_data(grid, k, rng, spec.rho, e if estimate.directional else None)
            u = free_evolution(f, grid, times)
            ratios.append(_left_side(estimate, u, k, spec, e) / 2.0 ** (exponent * k))
        max_ratio.append(float(np.max(ratios)))
        mean_ratio.append(float(np.mean(ratios)))
        half_widths.append(spec.half_width(k))
        logger.info("%s k=%d: max ratio %.4g, mean %.4g", estimate_name, k, max_ratio[-1], mean_ratio[-1])
    slope = log2_slope(ks, max_ratio)
    logger.info("%s slope %.4f (predicted exponent %.4g)", estimate_name, slope, exponent)
    return ProbeReport(estimate_name, grid.d, spec.K_cal, ks, max_ratio, mean_ratio,
                       exponent, slope, spec.size, spec.seed, half_widths)


# ---------------------------------------------------------------------------
# Inhomogeneous problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DuhamelReport:
    k: int
    ratio: float
    g_norm: float
    data_norm: float
    n_bound: float
    n_candidate: str
    quadrature_error: float

    def row(self) -> Dict[str, object]:
        return {"estimate": "duhamel", "k": self.k, "ratio": self.ratio, "G": self.g_norm,
                "data_L2": self.data_norm, "N_bound": self.n_bound,
                "candidate": self.n_candidate, "quadrature_error": self.quadrature_error}


def _propagator(grid: GridSpec, tau: float) -> np.ndarray:
    return np.exp(-1j * tau * grid.k_squared())


def _march(u_hat: np.ndarray, h_hat: np.ndarray, indices: Sequence[int], delta: float,
           grid: GridSpec, substeps: int, out: np.ndarray) -> None:
    """Exponential midpoint steps from indices[0] through the rest; delta is signed."""
    tau = delta / substeps
    full = _propagator(grid, tau)
    half = _propagator(grid, 0.5 * tau)
    for a, b in zip(indices[:-1], indices[1:]):
        for m in range(substeps):
            h0 = h_hat[a] + (h_hat[b] - h_hat[a]) * (m / substeps)
            h1 = h_hat[a] + (h_hat[b] - h_hat[a]) * ((m + 1) / substeps)
            u_hat = full * u_hat - 1j * tau * half * 0.5 * (h0 + h1)
        out[b] = u_hat


def solve_duhamel(u0: np.ndarray, h: SpaceTimeField, substeps: int = 1) -> SpaceTimeField:
    """
    Solve (i d_t + Delta) u = h with u(0) = u0 on the nodes of h.

    u(t) = e^{it Delta} u0 - i int_0^t e^{i(t-s) Delta} h(s) ds by the exponential
    midpoint rule, marching forward and backward from the node t = 0 with
    substeps sub-intervals per node spacing and h interpolated linearly.

    Raises:
        ConfigError: If t = 0 is not a node of h
    """
    grid = h.grid
    centre = int(np.argmin(np.abs(h.times)))
    if abs(h.times[centre]) > 1e-12 * max(h.half_width, 1.0):
        raise ConfigError("Duhamel time grids must contain t = 0")
    h_hat = forward(h.values, grid)
    out = np.empty_like(h_hat)
    out[centre] = forward(np.asarray(u0, dtype=complex), grid)
    nt = h.times.size
    _march(out[centre], h_hat, list(range(centre, nt)), h.dt, grid, substeps, out)
    _march(out[centre], h_hat, list(range(centre, -1, -1)), -h.dt, grid, substeps, out)
    return h.with_values(inverse(out, grid))


def duhamel_probe(u0: np.ndarray, h: SpaceTimeField, k: int,
                  params: Optional[NormParams] = None, substeps: int = 2) -> DuhamelReport:
    """
    G_k(u) / (||u0||_2 + N_k(h)) for the solution of (i d_t + Delta) u = h.

    The quadrature error is the Richardson estimate |u_fine - u_coarse| / 3
    between substeps and substeps/2 (or 2 substeps and 1).

    Raises:
        BandLeakageError: If u0 or h is not localized at 2^k
    """
    params = NormParams(d=h.grid.d) if params is None else params
    leakage = annulus_leakage(np.asarray(u0), h.grid, k)
    if leakage > params.leakage_limit:
        raise BandLeakageError(f"{100 * leakage:.2f}% of the initial datum lies outside I_{k}")
    fine_steps = max(2, substeps)
    u = solve_duhamel(u0, h, fine_steps)
    coarse = solve_duhamel(u0, h, fine_steps // 2)
    error = float(np.max(np.abs(u.values - coarse.values))) / 3.0
    g = composite_norm(u, k, "G", params)
    data = l2_norm(np.asarray(u0), h.grid)
    n_bound = 0.0
    n_candidate = "zero"
    if np.any(h.values):
        n_result = composite_norm(h, k, "N", params)
        n_bound, n_candidate = n_result.value, n_result.candidate
    denominator = data + n_bound
    if denominator == 0.0:
        raise ConfigError("Duhamel probe needs nonzero data or forcing")
    logger.info("Duhamel k=%d: G=%.4g, data=%.4g, N<=%.4g (%s), quadrature error %.2e",
                k, g.value, data, n_bound, n_candidate, error)
    return DuhamelReport(k, g.value / denominator, g.value, data, n_bound, n_candidate, error)


def wave_packet_source(grid: GridSpec, k: int, times: Sequence[float], rng: np.random.Generator,
                       rho: float = 4.0) -> SpaceTimeField:
    """Forcing moving along e_1 at group velocity about 2^(k+1): a free evolution of directional data."""
    f = random_band_data(grid, k, rng, rho, np.eye(grid.d)[0])
    return free_evolution(f, grid, times)


__all__ = [
    "Estimate", "ESTIMATES", "EnsembleSpec", "ProbeReport", "DuhamelReport",
    "get_estimate", "free_evolution", "band_mask", "random_band_data", "probe",
    "log2_slope", "solve_duhamel", "duhamel_probe", "wave_packet_source",
]
