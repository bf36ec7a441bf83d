"""
Schrödinger map flow d_t phi = phi x Laplacian(phi) on the periodic box.

This module holds the sphere-valued field types, the explicit RK4
integrator with projection back to the sphere, the linearized flow,
the conserved energies and the helical exact solutions.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, ConstraintError, DivergenceError, StabilityError
from ..spectral import (
    GridSpec, forward, gradient, integrate, spectral_derivative, spectral_laplacian,
)

logger = logging.getLogger(__name__)

SPHERE_TOLERANCE = 1e-10
DRIFT_LIMIT = 1e-6
TANGENCY_TOLERANCE = 1e-8
# RK4 stability interval on the imaginary axis
RK4_IMAGINARY_BOUND = 2.0 * np.sqrt(2.0)
SCHEME = "rk4-projected"

DEFAULT_Q = (0.0, 0.0, 1.0)


def sphere_drift(phi: np.ndarray) -> float:
    """Largest deviation of |phi| from 1 over the grid."""
    return float(np.max(np.abs(np.linalg.norm(phi, axis=0) - 1.0)))


def normalize(phi: np.ndarray) -> np.ndarray:
    return phi / np.linalg.norm(phi, axis=0, keepdims=True)


@dataclass(frozen=True)
class SphereField:
    """
    Map from the grid into the unit sphere of R^3.

    phi has shape (3,) + grid.shape; base_point is the constant Q the map
    relaxes to away from the bump.
    """

    phi: np.ndarray
    grid: GridSpec
    base_point: Tuple[float, float, float] = DEFAULT_Q

    def __post_init__(self) -> None:
        q = np.asarray(self.base_point, dtype=float)
        if q.shape != (3,) or abs(np.linalg.norm(q) - 1.0) > 1e-12:
            raise ConfigError(f"Base point must be a unit vector in R^3, got {self.base_point}")
        object.__setattr__(self, "base_point", tuple(float(c) for c in q))
        if self.phi.shape != (3,) + self.grid.shape:
            raise ConfigError(f"Field shape {self.phi.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.phi)):
            raise ConstraintError("Sphere field has non-finite entries")
        drift = sphere_drift(self.phi)
        if drift > SPHERE_TOLERANCE:
            raise ConstraintError(f"Field leaves the sphere by {drift:.3e}")

    @classmethod
    def from_vectors(cls, vectors: np.ndarray, grid: GridSpec,
                     base_point: Sequence[float] = DEFAULT_Q) -> "SphereField":
        """Project an arbitrary nonvanishing R^3-valued field onto the sphere."""
        return cls(normalize(np.asarray(vectors, dtype=float)), grid, tuple(base_point))

    @classmethod
    def constant(cls, grid: GridSpec, base_point: Sequence[float] = DEFAULT_Q) -> "SphereField":
        q = np.asarray(base_point, dtype=float).reshape((3,) + (1,) * grid.d)
        return cls(np.broadcast_to(q, (3,) + grid.shape).copy(), grid, tuple(base_point))

    @property
    def q(self) -> np.ndarray:
        return np.asarray(self.base_point).reshape((3,) + (1,) * self.grid.d)

    def with_phi(self, phi: np.ndarray) -> "SphereField":
        return SphereField(phi, self.grid, self.base_point)


@dataclass(frozen=True)
class FlowState:
    """Sphere field at physical time t after step_count accepted steps."""

    field: SphereField
    t: float = 0.0
    step_count: int = 0

    def __post_init__(self) -> None:
        if not np.isfinite(self.t):
            raise ConfigError("Flow time must be finite")

    def metadata(self, dt: float) -> Dict[str, object]:
        """Checkpoint metadata record."""
        return {"t": self.t, "step_count": self.step_count, "scheme": SCHEME, "dt": dt}


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------

def _smap(phi: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.cross(phi, spectral_laplacian(phi, grid), axis=0)


def smap_rhs(field: SphereField) -> np.ndarray:
    """phi x Laplacian(phi), pointwise orthogonal to phi."""
    return _smap(field.phi, field.grid)


def _linearized(phi: np.ndarray, phi_lin: np.ndarray, grid: GridSpec) -> np.ndarray:
    return (np.cross(phi_lin, spectral_laplacian(phi, grid), axis=0)
            + np.cross(phi, spectral_laplacian(phi_lin, grid), axis=0))


def linearized_rhs(field: SphereField, phi_lin: np.ndarray) -> np.ndarray:
    """
    Linearized flow phi_lin x Lap(phi) + phi x Lap(phi_lin).

    Raises:
        ConstraintError: If phi_lin is not tangent to the sphere at phi
    """
    tangency = float(np.max(np.abs(np.sum(field.phi * phi_lin, axis=0))))
    if tangency > TANGENCY_TOLERANCE:
        raise ConstraintError(f"Linearized field is not tangent: |phi . phi_lin| = {tangency:.3e}")
    return _linearized(field.phi, phi_lin, field.grid)


# ---------------------------------------------------------------------------
# Conserved quantities and monitors
# ---------------------------------------------------------------------------

def energy_E0(field: SphereField) -> float:
    """Mass about the base point, integral of |phi - Q|^2."""
    return float(integrate(np.sum((field.phi - field.q) ** 2, axis=0), field.grid))


def energy_E1(field: SphereField) -> float:
    """Dirichlet energy, integral of sum_m |d_m phi|^2."""
    grads = gradient(field.phi, field.grid)
    return float(integrate(np.sum(grads ** 2, axis=(0, 1)), field.grid))


def boundary_tail(field: SphereField, fraction: float = 0.375) -> float:
    """Largest |phi - Q| on the outer frame max_m |x_m| >= fraction * L."""
    coords = field.grid.coordinates()
    outer = np.zeros(field.grid.shape, dtype=bool)
    for xm in coords:
        outer |= np.abs(xm) >= fraction * field.grid.box_length
    deviation = np.linalg.norm(field.phi - field.q, axis=0)
    return float(np.max(deviation[outer])) if outer.any() else 0.0


def sobolev_distance(a: SphereField, b: SphereField, s: float) -> float:
    """Homogeneous H^s seminorm of a - b (the mean mode is dropped for s > 0)."""
    grid = a.grid
    diff_hat = forward(a.phi - b.phi, grid)
    kabs = grid.k_abs()
    weight = np.where(kabs > 0, kabs, 0.0) ** (2.0 * s) if s > 0 else np.ones_like(kabs)
    total = np.sum(weight * np.abs(diff_hat) ** 2) * grid.cell_volume / grid.n ** grid.d
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# Exact solutions
# ---------------------------------------------------------------------------

def helical_wave(grid: GridSpec, kappa: float, theta: float, t: float = 0.0) -> SphereField:
    """
    Exact helical solution (sin th cos u, sin th sin u, cos th), u = kappa x_1 - omega t.

    omega = kappa^2 cos(theta) and Q = (0, 0, 1).

    Raises:
        ConfigError: If kappa is not a resolvable multiple of 2*pi/L
    """
    base = 2.0 * np.pi / grid.box_length
    ratio = kappa / base
    if abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError(f"kappa={kappa} is not a multiple of 2*pi/L={base}")
    if abs(kappa) >= grid.k_nyquist:
        raise ConfigError(f"kappa={kappa} is not resolved below Nyquist {grid.k_nyquist}")
    x1 = grid.coordinates()[0]
    omega = kappa ** 2 * np.cos(theta)
    u = kappa * x1 - omega * t + np.zeros(grid.shape)
    phi = np.stack([
        np.sin(theta) * np.cos(u),
        np.sin(theta) * np.sin(u),
        np.full(grid.shape, np.cos(theta)),
    ])
    return SphereField(phi, grid)


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

Callback = Callable[[FlowState], None]


def stability_number(grid: GridSpec, dt: float) -> float:
    """|dt| * max |xi|^2 on the grid."""
    return abs(dt) * grid.d * grid.k_nyquist ** 2


def _check_step(grid: GridSpec, dt: float) -> None:
    if dt == 0 or not np.isfinite(dt):
        raise ConfigError(f"Time step must be finite and nonzero, got {dt}")
    if stability_number(grid, dt) > RK4_IMAGINARY_BOUND:
        raise ConfigError(
            f"dt={dt:.3e} exceeds the RK4 stability bound "
            f"{RK4_IMAGINARY_BOUND / (grid.d * grid.k_nyquist ** 2):.3e} on this grid"
        )


def _rk4(rhs: Callable[[np.ndarray], np.ndarray], y: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _project(phi: np.ndarray, step: int) -> np.ndarray:
    if not np.all(np.isfinite(phi)):
        raise DivergenceError(f"Non-finite values at step {step}", step=step)
    drift = sphere_drift(phi)
    if drift > DRIFT_LIMIT:
        raise StabilityError(f"Sphere drift {drift:.3e} before renormalization at step {step}")
    return normalize(phi)


def _step_plan(t0: float, t_end: float, dt: Optional[float], grid: GridSpec) -> Tuple[int, float]:
    span = t_end - t0
    if span == 0:
        return 0, 0.0
    dt = grid.dt_hint if dt is None else abs(dt)
    steps = int(np.ceil(abs(span) / dt - 1e-9))
    h = span / steps
    _check_step(grid, h)
    return steps, h


def evolve(state: FlowState, t_end: float, dt: Optional[float] = None,
           callbacks: Iterable[Callback] = (), cadence: int = 1) -> FlowState:
    """
    Advance the Schrödinger map with RK4 and per-step sphere projection.

    The step is adjusted so that the final time equals t_end; negative
    spans integrate backwards.

    Args:
        state: Initial flow state
        t_end: Target time
        dt: Step size (defaults to the grid's dt_hint)
        callbacks: Diagnostics invoked with the state every `cadence` steps
        cadence: Callback cadence in steps

    Raises:
        DivergenceError: If non-finite values appear
        StabilityError: If the drift off the sphere exceeds 1e-6 before projection
        ConfigError: If dt violates the RK4 stability bound
    """
    grid = state.field.grid
    callbacks = list(callbacks)
    steps, h = _step_plan(state.t, t_end, dt, grid)
    phi = state.field.phi
    rhs = lambda y: _smap(y, grid)  # noqa: E731
    for callback in callbacks:
        callback(state)
    for i in range(1, steps + 1):
        phi = _project(_rk4(rhs, phi, h), state.step_count + i)
        if callbacks and (i % cadence == 0 or i == steps):
            current = FlowState(state.field.with_phi(phi), state.t + i * h, state.step_count + i)
            for callback in callbacks:
                callback(current)
    logger.debug("Evolved %d steps of size %.3e to t=%.6f", steps, h, t_end)
    return FlowState(state.field.with_phi(phi), float(t_end) if steps else state.t,
                     state.step_count + steps)


def evolve_linearized(state: FlowState, phi_lin: np.ndarray, t_end: float,
                      dt: Optional[float] = None) -> Tuple[FlowState, np.ndarray]:
    """
    Advance (phi, phi_lin) together; phi_lin is kept tangent at each step.

    Returns:
        Tuple of (final flow state, final linearized field)
    """
    grid = state.field.grid
    linearized_rhs(state.field, phi_lin)
    steps, h = _step_plan(state.t, t_end, dt, grid)
    y = np.concatenate([state.field.phi, phi_lin])

    def rhs(z: np.ndarray) -> np.ndarray:
        return np.concatenate([_smap(z[:3], grid), _linearized(z[:3], z[3:], grid)])

    for i in range(1, steps + 1):
        y = _rk4(rhs, y, h)
        phi = _project(y[:3], state.step_count + i)
        lin = y[3:]
        lin = lin - np.sum(phi * lin, axis=0) * phi
        y = np.concatenate([phi, lin])
    final = FlowState(state.field.with_phi(y[:3]), float(t_end) if steps else state.t,
                      state.step_count + steps)
    return final, y[3:]


def time_stencil(state: FlowState, offsets: Sequence[float],
                 dt: Optional[float] = None) -> Dict[float, FlowState]:
    """States at state.t + offset for each offset (0 maps to the input)."""
    out = {}
    for offset in offsets:
        out[offset] = state if offset == 0 else evolve(state, state.t + offset, dt)
    return out


def reversal_error(state: FlowState, t_end: float, dt: Optional[float] = None) -> float:
    """L2 distance after evolving to t_end and back."""
    forward_state = evolve(state, t_end, dt)
    back = evolve(replace(forward_state, step_count=0), state.t, dt)
    diff = back.field.phi - state.field.phi
    return float(np.sqrt(integrate(np.sum(diff ** 2, axis=0), state.field.grid)))


def tangent_derivative(field: SphereField, axis: int) -> np.ndarray:
    """d_m phi, a tangent symmetry direction of the flow."""
    return spectral_derivative(field.phi, field.grid, axis)


__all__ = [
    "SphereField", "FlowState", "smap_rhs", "linearized_rhs", "evolve",
    "evolve_linearized", "energy_E0", "energy_E1", "helical_wave",
    "boundary_tail", "sphere_drift", "sobolev_distance", "time_stencil",
    "reversal_error", "stability_number", "tangent_derivative", "normalize",
    "DEFAULT_Q", "SCHEME",
]
