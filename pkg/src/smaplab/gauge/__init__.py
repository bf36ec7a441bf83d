"""
Differentiated fields and connection coefficients in the caloric gauge.

psi_m = v . d_m phi + i w . d_m phi and A_m = w . d_m v, with the index
convention m = 0 for the parabolic direction s, 1..d for space and d+1 for
time. The residual functions evaluate the structure equations of the
gauge as L2 / Linf norms of left-minus-right.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from ..caloric import (
    CALORIC_STENCIL, FrameField, HeatTrajectory, ParabolicGrid, check_frame, heat_evolve,
    heat_rhs, s_derivative, transport_frame,
)
from ..errors import ConfigError, InsufficientDataError
from ..flow import FlowState, evolve, evolve_linearized, smap_rhs
from ..spectral import GridSpec, forward, gradient, inverse, l2_norm, spectral_derivative

logger = logging.getLogger(__name__)

IDENTITIES = ("id1", "id3", "schcov", "heatcov", "schcov2", "heatcov2", "schlin")
STENCIL_OFFSETS = (-2, -1, 0, 1, 2)


@dataclass(frozen=True)
class GaugeData:
    """
    psi (complex) and a (real) stacked over m = 0..d+1 at one parabolic node.

    The time components are only meaningful when has_time_psi / has_time_a.
    """

    psi: np.ndarray
    a: np.ndarray
    grid: GridSpec
    s_node: int
    s: float
    has_time_psi: bool = False
    has_time_a: bool = False

    def __post_init__(self) -> None:
        expected = (self.grid.d + 2,) + self.grid.shape
        if self.psi.shape != expected or self.a.shape != expected:
            raise ConfigError(f"Gauge arrays must have shape {expected}")
        if not (np.all(np.isfinite(self.psi)) and np.all(np.isfinite(self.a))):
            raise ConfigError("Gauge fields have non-finite entries")

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def time_index(self) -> int:
        return self.grid.d + 1

    def spatial(self) -> range:
        return range(1, self.grid.d + 1)


@dataclass(frozen=True)
class TimeStencil:
    """
    Caloric gauges of the Schrödinger flow at t0 + j*spacing, j = -2..2.

    phi_lin optionally carries a linearized solution at the same times.
    """

    spacing: float
    trajectories: Tuple[HeatTrajectory, ...]
    frames: Tuple[FrameField, ...]
    phi_lin: Optional[Tuple[np.ndarray, ...]] = None
    order: int = 2

    def __post_init__(self) -> None:
        if len(self.trajectories) != len(STENCIL_OFFSETS) or len(self.frames) != len(STENCIL_OFFSETS):
            raise InsufficientDataError("A time stencil needs five snapshots")
        if self.order not in (2, 4):
            raise ConfigError(f"Stencil order must be 2 or 4, got {self.order}")

    @property
    def center(self) -> Tuple[HeatTrajectory, FrameField]:
        return self.trajectories[2], self.frames[2]

    def derivative(self, values: Sequence[np.ndarray]) -> np.ndarray:
        """Central difference in t of values sampled at the five offsets."""
        h = self.spacing
        if self.order == 2:
            return (values[3] - values[1]) / (2.0 * h)
        return (values[0] - 8.0 * values[1] + 8.0 * values[3] - values[4]) / (12.0 * h)

    def with_order(self, order: int) -> "TimeStencil":
        return TimeStencil(self.spacing, self.trajectories, self.frames, self.phi_lin, order)


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

def _complex_coordinates(vector: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.sum(v * vector, axis=0) + 1j * np.sum(w * vector, axis=0)


def _spatial_psi(phi: np.ndarray, v: np.ndarray, w: np.ndarray, grid: GridSpec) -> np.ndarray:
    grads = gradient(phi, grid)
    return np.stack([_complex_coordinates(grads[m], v, w) for m in range(grid.d)])


def extract_gauge(trajectory: HeatTrajectory, frame: FrameField, i: int,
                  time_source: object = None) -> GaugeData:
    """
    Differentiated fields and connection coefficients at parabolic node i.

    Args:
        trajectory: Heat flow of the map
        frame: Transported frame along the trajectory
        i: Node index
        time_source: None, "flow" (d_t phi from the Schrödinger map, s=0 only)
            or a TimeStencil supplying discrete time derivatives

    Raises:
        InvalidFrameError: If the frame violates its invariants at node i
        InsufficientDataError: If "flow" is requested away from s = 0
    """
    check_frame(trajectory, frame, i)
    grid = trajectory.grid
    d = grid.d
    s_nodes = trajectory.pgrid.nodes
    i = i % len(s_nodes)
    phi = trajectory.phi(i)
    v, w = frame.node(i)

    psi = np.zeros((d + 2,) + grid.shape, dtype=complex)
    a = np.zeros((d + 2,) + grid.shape)
    psi[1:d + 1] = _spatial_psi(phi, v, w, grid)
    grad_v = gradient(v, grid)
    for m in range(d):
        a[m + 1] = np.sum(w * grad_v[m], axis=0)
    psi[0] = _complex_coordinates(heat_rhs(trajectory.snapshots[i]), v, w)
    a[0] = np.sum(w * s_derivative(frame.v, s_nodes, i, CALORIC_STENCIL), axis=0)

    has_psi = has_a = False
    if isinstance(time_source, str):
        if time_source != "flow":
            raise ConfigError(f"Unknown time source '{time_source}'")
        if i != 0:
            raise InsufficientDataError("The flow time derivative is only available at s=0")
        psi[d + 1] = _complex_coordinates(smap_rhs(trajectory.snapshots[0]), v, w)
        has_psi = True
    elif isinstance(time_source, TimeStencil):
        trajs, frames = time_source.trajectories, time_source.frames
        if i == 0:
            dphi = smap_rhs(trajectory.snapshots[0])
        else:
            dphi = time_source.derivative([tr.phi(i) for tr in trajs])
        psi[d + 1] = _complex_coordinates(dphi, v, w)
        a[d + 1] = np.sum(w * time_source.derivative([fr.v[i] for fr in frames]), axis=0)
        has_psi = has_a = True
    elif time_source is not None:
        raise ConfigError(f"Unsupported time source {type(time_source).__name__}")
    return GaugeData(psi, a, grid, i, float(s_nodes[i]), has_psi, has_a)


def extract_all(trajectory: HeatTrajectory, frame: FrameField,
                time_source: Optional["TimeStencil"] = None) -> List[GaugeData]:
    """Gauge data at every parabolic node."""
    out = []
    for i in range(len(trajectory.pgrid)):
        source = time_source if time_source is not None else ("flow" if i == 0 else None)
        out.append(extract_gauge(trajectory, frame, i, source))
    return out


def covariant_derivative(g: GaugeData, psi: np.ndarray, l: int) -> np.ndarray:
    """D_l psi = d_l psi + i A_l psi for a spatial index l in 1..d."""
    if not 1 <= l <= g.d:
        raise ConfigError(f"Covariant derivative index must be in 1..{g.d}, got {l}")
    return spectral_derivative(psi, g.grid, l - 1) + 1j * g.a[l] * psi


def covariant_divergence(g: GaugeData, field: Optional[np.ndarray] = None) -> np.ndarray:
    """sum_l D_l psi_l (or D_l of the given stack of d fields)."""
    stack = g.psi[1:g.d + 1] if field is None else field
    return sum(covariant_derivative(g, stack[l - 1], l) for l in g.spatial())


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------

def _report(residual: np.ndarray, grid: GridSpec) -> Dict[str, float]:
    return {"L2": l2_norm(residual, grid), "Linf": float(np.max(np.abs(residual))) if residual.size else 0.0}


def _schrodinger_rhs(g: GaugeData, target: np.ndarray) -> np.ndarray:
    """Right side of the covariant Schrödinger equation applied to target."""
    out = (g.a[g.time_index]) * target
    for l in g.spatial():
        out = out - 2j * g.a[l] * spectral_derivative(target, g.grid, l - 1)
        out = out + (g.a[l] ** 2 - 1j * spectral_derivative(g.a[l], g.grid, l - 1)) * target
        out = out - 1j * g.psi[l] * np.imag(np.conj(g.psi[l]) * target)
    return out


def _laplacian(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return inverse(forward(f, grid) * (-grid.k_squared()), grid)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InsufficientDataError(message)


def identity_residual(g: GaugeData, which: str, aux: object = None) -> Dict[str, float]:
    """
    L2 and Linf norms of an identity's left-minus-right.

    Args:
        g: Gauge data at one node
        which: One of id1, id3, schcov, heatcov, schcov2, heatcov2, schlin
        aux: TimeStencil for schcov2 / schlin; a (previous, next) pair of
            GaugeData at neighbouring nodes for heatcov2

    Raises:
        InsufficientDataError: If required auxiliary data is missing
    """
    d, grid = g.d, g.grid
    if which == "id1":
        parts = [covariant_derivative(g, g.psi[m], l) - covariant_derivative(g, g.psi[l], m)
                 for l in g.spatial() for m in g.spatial() if l < m]
        return _report(np.stack(parts), grid)
    if which == "id3":
        parts = [spectral_derivative(g.a[m], grid, l - 1) - spectral_derivative(g.a[l], grid, m - 1)
                 - np.imag(g.psi[l] * np.conj(g.psi[m]))
                 for l in g.spatial() for m in g.spatial() if l < m]
        return _report(np.stack(parts), grid)
    if which == "schcov":
        _require(g.has_time_psi, "schcov needs the time component of psi")
        return _report(g.psi[d + 1] - 1j * covariant_divergence(g), grid)
    if which == "heatcov":
        return _report(g.psi[0] - covariant_divergence(g), grid)
    if which == "schcov2":
        _require(isinstance(aux, TimeStencil), "schcov2 needs a TimeStencil")
        _require(g.has_time_a, "schcov2 needs A_{d+1}")
        psi_t = _stencil_psi(aux, g.s_node)
        parts = []
        for m in g.spatial():
            lhs = 1j * psi_t[m - 1] + _laplacian(g.psi[m], grid)
            parts.append(lhs - _schrodinger_rhs(g, g.psi[m]))
        return _report(np.stack(parts), grid)
    if which == "schlin":
        _require(isinstance(aux, TimeStencil) and aux.phi_lin is not None,
                 "schlin needs a TimeStencil carrying linearized fields")
        _require(g.has_time_a, "schlin needs A_{d+1}")
        psi_lin = [_complex_coordinates(lin, fr.v[0], fr.w[0])
                   for lin, fr in zip(aux.phi_lin, aux.frames)]
        lhs = 1j * aux.derivative(psi_lin) + _laplacian(psi_lin[2], grid)
        return _report(lhs - _schrodinger_rhs(g, psi_lin[2]), grid)
    if which == "heatcov2":
        _require(isinstance(aux, (tuple, list)) and len(aux) == 2,
                 "heatcov2 needs gauge data at the neighbouring nodes")
        prev, nxt = aux
        s = np.asarray([prev.s, g.s, nxt.s])
        stack = np.stack([prev.psi, g.psi, nxt.psi])
        psi_s = s_derivative(stack, s, 1)
        parts = []
        for m in g.spatial():
            lhs = psi_s[m] - _laplacian(g.psi[m], grid)
            rhs = np.zeros_like(lhs)
            for l in g.spatial():
                rhs = rhs + 2j * g.a[l] * spectral_derivative(g.psi[m], grid, l - 1)
                rhs = rhs - (g.a[l] ** 2 - 1j * spectral_derivative(g.a[l], grid, l - 1)) * g.psi[m]
                rhs = rhs + 1j * np.imag(g.psi[m] * np.conj(g.psi[l])) * g.psi[l]
            parts.append(lhs - rhs)
        return _report(np.stack(parts), grid)
    raise ConfigError(f"Unknown identity '{which}', expected one of {IDENTITIES}")


def _stencil_psi(stencil: TimeStencil, i: int) -> np.ndarray:
    samples = []
    for trajectory, frame in zip(stencil.trajectories, stencil.frames):
        v, w = frame.node(i)
        samples.append(_spatial_psi(trajectory.phi(i), v, w, trajectory.grid))
    return stencil.derivative(samples)


def reconstruction_residual(g: GaugeData, trajectory: HeatTrajectory, frame: FrameField) -> float:
    """max |d_m phi - (v Re psi_m + w Im psi_m)| over spatial m."""
    v, w = frame.node(g.s_node)
    grads = gradient(trajectory.phi(g.s_node), g.grid)
    worst = 0.0
    for m in g.spatial():
        rebuilt = v * g.psi[m].real + w * g.psi[m].imag
        worst = max(worst, float(np.max(np.abs(grads[m - 1] - rebuilt))))
    return worst


def frame_derivative_residual(g: GaugeData, trajectory: HeatTrajectory, frame: FrameField) -> float:
    """max |d_m v - (-phi Re psi_m + w A_m)| over spatial m."""
    v, w = frame.node(g.s_node)
    phi = trajectory.phi(g.s_node)
    grad_v = gradient(v, g.grid)
    worst = 0.0
    for m in g.spatial():
        expected = -phi * g.psi[m].real + w * g.a[m]
        worst = max(worst, float(np.max(np.abs(grad_v[m - 1] - expected))))
    return worst


def derivative_mass(g: GaugeData) -> float:
    """sum over spatial m of ||psi_m||_{L2}^2."""
    return float(sum(l2_norm(g.psi[m], g.grid) ** 2 for m in g.spatial()))


# ---------------------------------------------------------------------------
# Integral representation of the connection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectionIntegral:
    """A_m recovered from the heat-time integral, with the truncation estimate."""

    field: np.ndarray
    m: int
    node: int
    tail_bound: float


def a_from_integral(gauges: Sequence[GaugeData], m: int, node: int = 0,
                    form: str = "direct", rule: str = "spline") -> ConnectionIntegral:
    """
    A_m(s) = -int_s^{S_max} Im(psi_0 conj(psi_m)) dr over the parabolic nodes.

    rule="spline" integrates the not-a-knot cubic spline through the nodal
    integrand, fourth order on the graded grid; rule="trapezoid" is second
    order. form="expanded" replaces psi_0 with sum_l D_l psi_l. The tail
    bound ||Im(psi_0 conj(psi_m))(S_max)||_inf * S_max is reported, not added.

    Raises:
        ConfigError: If m is not a spatial or time index, or form or rule is unknown
        InsufficientDataError: If psi_{d+1} is missing at some node
    """
    if not gauges:
        raise InsufficientDataError("No gauge data supplied")
    d = gauges[0].d
    if not 1 <= m <= d + 1:
        raise ConfigError(f"Integral representation needs m in 1..{d + 1}, got {m}")
    if m == d + 1:
        _require(all(g.has_time_psi for g in gauges), "psi_{d+1} is missing at some node")
    s = np.asarray([g.s for g in gauges])
    if form == "direct":
        integrand = np.stack([np.imag(g.psi[0] * np.conj(g.psi[m])) for g in gauges])
    elif form == "expanded":
        integrand = np.stack([np.imag(covariant_divergence(g) * np.conj(g.psi[m])) for g in gauges])
    else:
        raise ConfigError(f"Unknown integral form '{form}'")
    if rule == "spline":
        total = -CubicSpline(s, integrand, axis=0).integrate(s[node], s[-1])
    elif rule == "trapezoid":
        total = np.zeros_like(integrand[0])
        for j in range(len(gauges) - 2, node - 1, -1):
            total = total - 0.5 * (integrand[j] + integrand[j + 1]) * (s[j + 1] - s[j])
    else:
        raise ConfigError(f"Unknown quadrature rule '{rule}'")
    tail = float(np.max(np.abs(integrand[-1]))) * s[-1]
    if tail > 1e-3:
        logger.warning("Connection integral tail bound %.3e for m=%d", tail, m)
    return ConnectionIntegral(total, m, node, tail)


def relative_l2(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    """||a - b|| / ||b|| (absolute when b vanishes)."""
    ref = l2_norm(b, grid)
    diff = l2_norm(a - b, grid)
    return diff / ref if ref > 0 else diff


# ---------------------------------------------------------------------------
# Time stencils, covariance, Coulomb comparison
# ---------------------------------------------------------------------------

def build_time_stencil(state: FlowState, pgrid: ParabolicGrid, spacing: float,
                       q_prime: Optional[Sequence[float]] = None, order: int = 2,
                       dt: Optional[float] = None, substeps: int = 4,
                       phi_lin: Optional[np.ndarray] = None,
                       initialization: str = "rotation") -> TimeStencil:
    """
    Evolve to t0 + j*spacing (j = -2..2), run the heat flow and transport a
    frame at each time; optionally carry a linearized field along.
    """
    step = min(spacing, dt) if dt is not None else spacing
    trajectories, frames, lins = [], [], []
    for j in STENCIL_OFFSETS:
        target = state.t + j * spacing
        if phi_lin is not None:
            current, lin = evolve_linearized(state, phi_lin, target, step) if j else (state, phi_lin)
            lins.append(lin)
        else:
            current = evolve(state, target, step) if j else state
        trajectory = heat_evolve(current.field, pgrid, substeps)
        trajectories.append(trajectory)
        frames.append(transport_frame(trajectory, q_prime, initialization))
    return TimeStencil(spacing, tuple(trajectories), tuple(frames),
                       tuple(lins) if phi_lin is not None else None, order)


def covariance_report(trajectory: HeatTrajectory, theta: float, node: int = 0,
                      q_prime: Optional[Sequence[float]] = None,
                      initialization: str = "rotation") -> Dict[str, float]:
    """Compare gauges transported from Q' and from Q' rotated by theta about Q."""
    frame = transport_frame(trajectory, q_prime, initialization)
    q = trajectory.base_point
    qp = np.asarray(frame.q_prime)
    rotated_q_prime = np.cos(theta) * qp + np.sin(theta) * np.cross(q, qp)
    other = transport_frame(trajectory, rotated_q_prime, initialization)
    g = extract_gauge(trajectory, frame, node)
    h = extract_gauge(trajectory, other, node)
    spatial = slice(1, g.d + 1)
    phase = np.exp(-1j * theta) * g.psi[spatial]
    return {
        "max_a_diff": float(np.max(np.abs(g.a[spatial] - h.a[spatial]))),
        "max_abs_psi_diff": float(np.max(np.abs(np.abs(g.psi[spatial]) - np.abs(h.psi[spatial])))),
        "max_phase_diff": float(np.max(np.abs(phase - h.psi[spatial]))),
    }


def coulomb_connection(g: GaugeData) -> np.ndarray:
    """A_m = Lap^{-1} sum_l d_l Im(conj(psi_l) psi_m), mean mode removed."""
    k2 = g.grid.k_squared()
    inverse_lap = np.where(k2 > 0, -1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    out = np.zeros((g.d,) + g.grid.shape)
    for m in g.spatial():
        source = sum(spectral_derivative(np.imag(np.conj(g.psi[l]) * g.psi[m]), g.grid, l - 1)
                     for l in g.spatial())
        out[m - 1] = inverse(forward(source, g.grid) * inverse_lap, g.grid).real
    return out


def coulomb_comparison(g: GaugeData) -> Dict[str, float]:
    """Divergence of the caloric and Coulomb connections and their distance."""
    coulomb = coulomb_connection(g)
    caloric = g.a[1:g.d + 1]

    def divergence(stack: np.ndarray) -> float:
        div = sum(spectral_derivative(stack[l], g.grid, l) for l in range(g.d))
        return l2_norm(div, g.grid)

    return {
        "div_caloric": divergence(caloric),
        "div_coulomb": divergence(coulomb),
        "l2_difference": l2_norm(caloric - coulomb, g.grid),
    }


def residual_rows(g: GaugeData, residuals: Dict[str, Dict[str, float]],
                  dt: Optional[float] = None) -> List[Dict[str, object]]:
    """Residual records {identity, s, L2, Linf, n, dt}."""
    return [{"identity": name, "s": g.s, "L2": r["L2"], "Linf": r["Linf"],
             "n": g.grid.n, "dt": dt} for name, r in residuals.items()]


__all__ = [
    "GaugeData", "TimeStencil", "ConnectionIntegral", "IDENTITIES",
    "extract_gauge", "extract_all", "covariant_derivative", "covariant_divergence",
    "identity_residual", "reconstruction_residual", "frame_derivative_residual",
    "derivative_mass", "a_from_integral", "relative_l2", "build_time_stencil",
    "covariance_report", "coulomb_connection", "coulomb_comparison", "residual_rows",
]
