"""
Caloric gauge construction.

The covariant (harmonic map) heat flow is solved in parabolic time s on a
geometrically graded grid, and an orthonormal tangent frame is carried back
from s = S_max to s = 0 by parallel transport along the flow.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import (
    ConfigError, DivergenceError, FarFromEquilibriumError, InvalidFrameError, StabilityError,
)
from ..flow import SphereField, energy_E1, normalize, sphere_drift
from ..spectral import (
    DyadicWindow, GridSpec, forward, gradient, inverse, l2_norm, project_dyadic,
    spectral_laplacian,
)

logger = logging.getLogger(__name__)

MAX_GRADING = 1.25
DRIFT_LIMIT = 1e-6
FRAME_TOLERANCE = 1e-8
EQUILIBRIUM_LIMIT = 0.5
MAX_REFINEMENTS = 10
CALORIC_STENCIL = 7
HEAT_SCHEMES = ("rk4", "euler")


@dataclass(frozen=True)
class ParabolicGrid:
    """Strictly increasing heat-time nodes starting at 0 and ending at S_max."""

    s_nodes: Tuple[float, ...]

    def __post_init__(self) -> None:
        s = np.asarray(self.s_nodes, dtype=float)
        object.__setattr__(self, "s_nodes", tuple(float(v) for v in s))
        if s.size < 2 or s[0] != 0.0:
            raise ConfigError("Parabolic grid must start at s=0 and have at least two nodes")
        if np.any(np.diff(s) <= 0):
            raise ConfigError("Parabolic nodes must be strictly increasing")
        ratios = s[2:] / s[1:-1]
        if ratios.size and ratios.max() > MAX_GRADING * (1 + 1e-12):
            raise ConfigError(f"Parabolic grading ratio {ratios.max():.4f} exceeds {MAX_GRADING}")

    @classmethod
    def graded(cls, S_max: float, first: float, ratio: float = MAX_GRADING,
               count: Optional[int] = None) -> "ParabolicGrid":
        """
        Nodes 0, first, first*r, ..., S_max with r <= ratio.

        Args:
            S_max: Final heat time
            first: First positive node
            ratio: Largest admissible ratio between consecutive positive nodes
            count: Number of geometric intervals (derived from ratio if omitted)
        """
        if not 0 < first < S_max:
            raise ConfigError(f"Need 0 < first node ({first}) < S_max ({S_max})")
        if count is None:
            count = int(np.ceil(np.log(S_max / first) / np.log(ratio) - 1e-12))
        positive = first * (S_max / first) ** (np.arange(count + 1) / count)
        positive[-1] = S_max
        return cls((0.0,) + tuple(positive))

    @classmethod
    def for_grid(cls, grid: GridSpec, width: float, factor: float = 64.0,
                 ratio: float = MAX_GRADING) -> "ParabolicGrid":
        """Default grid: S_max = factor * width^2, first node 2^(-2 k_max)."""
        window = DyadicWindow.from_grid(grid)
        return cls.graded(factor * width ** 2, 2.0 ** (-2 * window.k_max), ratio)

    @property
    def S_max(self) -> float:
        return self.s_nodes[-1]

    @property
    def nodes(self) -> np.ndarray:
        return np.asarray(self.s_nodes)

    def __len__(self) -> int:
        return len(self.s_nodes)

    def geometric_count(self) -> int:
        return len(self.s_nodes) - 2

    def refined(self) -> "ParabolicGrid":
        """Half the first node and the square root of the grading ratio."""
        first = self.s_nodes[1]
        count = self.geometric_count()
        ratio = (self.S_max / first) ** (1.0 / count) if count else MAX_GRADING
        return ParabolicGrid.graded(self.S_max, 0.5 * first, float(np.sqrt(ratio)))

    def with_nodes(self, extra: Sequence[float]) -> "ParabolicGrid":
        """Merge additional nodes in (0, S_max]."""
        merged = sorted(set(self.s_nodes) | {float(s) for s in extra if 0 < s <= self.S_max})
        return ParabolicGrid(tuple(merged))

    def index_of(self, s: float) -> int:
        matches = np.nonzero(np.isclose(self.nodes, s, rtol=1e-12, atol=0.0))[0]
        if not matches.size:
            raise ConfigError(f"s={s} is not a node of the parabolic grid")
        return int(matches[0])


@dataclass(frozen=True)
class HeatTrajectory:
    """Heat-flow snapshots, one per parabolic node."""

    snapshots: Tuple[SphereField, ...]
    pgrid: ParabolicGrid

    def __post_init__(self) -> None:
        if len(self.snapshots) != len(self.pgrid):
            raise ConfigError("One snapshot per parabolic node is required")

    @property
    def grid(self) -> GridSpec:
        return self.snapshots[0].grid

    @property
    def base_point(self) -> np.ndarray:
        return np.asarray(self.snapshots[0].base_point)

    def phi(self, i: int) -> np.ndarray:
        return self.snapshots[i].phi

    def equilibrium_distance(self, i: int = -1) -> float:
        """Sup-norm distance of the snapshot from Q."""
        snap = self.snapshots[i]
        return float(np.max(np.linalg.norm(snap.phi - snap.q, axis=0)))


@dataclass(frozen=True)
class FrameField:
    """
    Orthonormal tangent frames (v, w) at every parabolic node.

    v and w have shape (nodes, 3) + grid.shape.
    """

    v: np.ndarray
    w: np.ndarray
    q_prime: Tuple[float, float, float]
    initialization: str = "rotation"

    def node(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        return self.v[i], self.w[i]

    def rotated(self, theta: float) -> "FrameField":
        """Frame obtained from rotating Q' by theta in the tangent plane at Q."""
        c, s = np.cos(theta), np.sin(theta)
        return FrameField(c * self.v + s * self.w, c * self.w - s * self.v,
                          self.q_prime, self.initialization)


# ---------------------------------------------------------------------------
# Heat flow
# ---------------------------------------------------------------------------

def _gradient_energy_density(phi: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.sum(gradient(phi, grid) ** 2, axis=(0, 1))


def _heat_nonlinear(phi: np.ndarray, grid: GridSpec) -> np.ndarray:
    return phi * _gradient_energy_density(phi, grid)


def heat_rhs(field: SphereField) -> np.ndarray:
    """Laplacian(phi) + phi * sum_m |d_m phi|^2, pointwise tangent to the sphere."""
    phi, grid = field.phi, field.grid
    return spectral_laplacian(phi, grid) + _heat_nonlinear(phi, grid)


def _heat_substeps(phi: np.ndarray, grid: GridSpec, span: float, substeps: int,
                   k2: np.ndarray, scheme: str = "rk4") -> np.ndarray:
    h = span / substeps
    half = np.exp(-0.5 * h * k2)
    full = half * half

    def propagate(f: np.ndarray, factor: np.ndarray) -> np.ndarray:
        return inverse(forward(f, grid) * factor, grid).real

    for _ in range(substeps):
        n1 = _heat_nonlinear(phi, grid)
        if scheme == "euler":
            phi = propagate(phi + h * n1, full)
        else:
            phi_half, phi_full = propagate(phi, half), propagate(phi, full)
            n2 = _heat_nonlinear(phi_half + 0.5 * h * propagate(n1, half), grid)
            n3 = _heat_nonlinear(phi_half + 0.5 * h * n2, grid)
            n4 = _heat_nonlinear(phi_full + h * propagate(n3, half), grid)
            phi = (phi_full + (h / 6.0) * (propagate(n1, full) + n4)
                   + (h / 3.0) * propagate(n2 + n3, half))
        if not np.all(np.isfinite(phi)):
            raise DivergenceError(f"Non-finite heat flow at span {span:.3e}")
        if sphere_drift(phi) > DRIFT_LIMIT:
            raise StabilityError(f"Heat step drift {sphere_drift(phi):.3e}")
        phi = normalize(phi)
    return phi


def heat_evolve(initial: SphereField, pgrid: ParabolicGrid, substeps: int = 4,
                scheme: str = "rk4") -> HeatTrajectory:
    """
    Solve the covariant heat flow and record a snapshot at every node.

    u_s = Lap u + N(u), N(u) = u |grad u|^2, with the heat semigroup applied
    exactly. scheme="rk4" takes fourth-order integrating-factor Runge-Kutta
    substeps; scheme="euler" takes u <- exp(ds Lap)(u + ds N(u)), which is
    first order in s. Every substep ends with renormalization, and the
    number of substeps is doubled on an interval whenever the drift off the
    sphere exceeds 1e-6.

    Raises:
        ConfigError: If the scheme is unknown
        DivergenceError: If non-finite values appear
        StabilityError: If the drift persists after repeated refinement
    """
    if scheme not in HEAT_SCHEMES:
        raise ConfigError(f"Unknown heat scheme '{scheme}', expected one of {HEAT_SCHEMES}")
    grid = initial.grid
    k2 = grid.k_squared()
    snapshots: List[SphereField] = [initial]
    phi = initial.phi
    s = pgrid.nodes
    for i in range(len(s) - 1):
        span = s[i + 1] - s[i]
        count = substeps
        for attempt in range(MAX_REFINEMENTS + 1):
            try:
                phi_next = _heat_substeps(phi, grid, span, count, k2, scheme)
                break
            except StabilityError:
                if attempt == MAX_REFINEMENTS:
                    raise StabilityError(
                        f"Heat flow drift persists on [{s[i]:.3e}, {s[i + 1]:.3e}] "
                        f"with {count} substeps"
                    )
                count *= 2
        phi = phi_next
        snapshots.append(initial.with_phi(phi))
    logger.debug("Heat flow reached S_max=%.3f over %d nodes", pgrid.S_max, len(pgrid))
    return HeatTrajectory(tuple(snapshots), pgrid)


def _antisymmetric(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a b^T - b a^T pointwise."""
    outer = np.einsum("a...,b...->ab...", a, b)
    return outer - np.swapaxes(outer, 0, 1)


def r_matrix(trajectory: HeatTrajectory, i: int) -> np.ndarray:
    """
    R = Lap(phi) phi^T - phi Lap(phi)^T at node i, shape (3, 3) + grid shape.
    """
    phi = trajectory.phi(i)
    return _antisymmetric(spectral_laplacian(phi, trajectory.grid), phi)


def r_matrix_rate(trajectory: HeatTrajectory, i: int) -> np.ndarray:
    """d_s R at node i, with d_s phi taken from the heat right-hand side."""
    grid = trajectory.grid
    phi = trajectory.phi(i)
    rate = heat_rhs(trajectory.snapshots[i])
    return (_antisymmetric(spectral_laplacian(rate, grid), phi)
            + _antisymmetric(spectral_laplacian(phi, grid), rate))


def r_matrix_from_flow(trajectory: HeatTrajectory, i: int) -> np.ndarray:
    """d_s phi phi^T - phi d_s phi^T with d_s from the heat right-hand side."""
    return _antisymmetric(heat_rhs(trajectory.snapshots[i]), trajectory.phi(i))


def r_matrix_discrete(trajectory: HeatTrajectory, i: int) -> np.ndarray:
    """R built from a one-sided difference quotient of the snapshots."""
    j = i + 1 if i + 1 < len(trajectory.pgrid) else i - 1
    ds = (trajectory.phi(j) - trajectory.phi(i)) / (trajectory.pgrid.nodes[j] - trajectory.pgrid.nodes[i])
    return _antisymmetric(ds, trajectory.phi(i))


# ---------------------------------------------------------------------------
# Frame transport
# ---------------------------------------------------------------------------

def default_q_prime(q: Sequence[float]) -> np.ndarray:
    """Deterministic unit vector orthogonal to Q (e1 or e2 projected)."""
    q = np.asarray(q, dtype=float)
    e = np.array([1.0, 0.0, 0.0]) if abs(q[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e = e - (e @ q) * q
    return e / np.linalg.norm(e)


def _rotation_onto(q: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Rotation matrices taking q to phi pointwise: I + K + K^2/(1+c)."""
    a = np.cross(q.reshape((3,) + (1,) * (phi.ndim - 1)), phi, axis=0)
    c = np.einsum("a,a...->...", q, phi)
    zero = np.zeros_like(c)
    k = np.stack([
        np.stack([zero, -a[2], a[1]]),
        np.stack([a[2], zero, -a[0]]),
        np.stack([-a[1], a[0], zero]),
    ])
    k2 = np.einsum("ab...,bc...->ac...", k, k)
    eye = np.eye(3).reshape((3, 3) + (1,) * c.ndim)
    return eye + k + k2 / (1.0 + c)


def _apply(matrix: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Apply a pointwise 3x3 matrix field to a stack (p, 3, ...) of vector fields."""
    return np.einsum("ab...,pb...->pa...", matrix, vectors)


def _orthonormalize(pair: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Project (v, w) onto the tangent plane and apply symmetric orthonormalization."""
    pair = pair - np.einsum("pa...,a...->p...", pair, phi)[:, None] * phi[None]
    v, w = pair
    g11 = np.sum(v * v, axis=0)
    g12 = np.sum(v * w, axis=0)
    g22 = np.sum(w * w, axis=0)
    root_det = np.sqrt(g11 * g22 - g12 ** 2)
    scale = np.sqrt(g11 + g22 + 2.0 * root_det)
    m11, m12, m22 = (g11 + root_det) / scale, g12 / scale, (g22 + root_det) / scale
    det = m11 * m22 - m12 ** 2
    x11, x12, x22 = m22 / det, -m12 / det, m11 / det
    return np.stack([x11 * v + x12 * w, x12 * v + x22 * w])


def _rk4_propagate(pair: np.ndarray, h: float, r_start: np.ndarray, r_mid: np.ndarray,
                   r_end: np.ndarray) -> np.ndarray:
    k1 = _apply(r_start, pair)
    k2 = _apply(r_mid, pair + 0.5 * h * k1)
    k3 = _apply(r_mid, pair + 0.5 * h * k2)
    k4 = _apply(r_end, pair + h * k3)
    return pair + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def transport_frame(trajectory: HeatTrajectory, q_prime: Optional[Sequence[float]] = None,
                    initialization: str = "rotation") -> FrameField:
    """
    Parallel-transport a frame from S_max back to s = 0.

    At S_max the pair (Q', Q x Q') is moved to the tangent plane at
    phi(S_max), either by the rotation taking Q to phi(S_max) or by
    projection. The pair then follows d_s v = R v backwards with RK4 and is
    re-orthonormalized against phi at every node. R at interval midpoints
    comes from the cubic Hermite interpolant of R and d_s R.

    Raises:
        ConfigError: If Q' is not a unit vector orthogonal to Q
        FarFromEquilibriumError: If |phi(S_max) - Q| > 0.5 somewhere
    """
    q = trajectory.base_point
    q_prime = default_q_prime(q) if q_prime is None else np.asarray(q_prime, dtype=float)
    if abs(np.linalg.norm(q_prime) - 1.0) > 1e-10 or abs(q_prime @ q) > 1e-10:
        raise ConfigError(f"Q' must be a unit vector orthogonal to Q, got {q_prime.tolist()}")
    distance = trajectory.equilibrium_distance(-1)
    if distance > EQUILIBRIUM_LIMIT:
        raise FarFromEquilibriumError(
            f"Heat flow ends {distance:.3f} away from Q at S_max={trajectory.pgrid.S_max}"
        )
    grid = trajectory.grid
    ones = np.ones(grid.shape)
    pair = np.stack([
        q_prime.reshape((3,) + (1,) * grid.d) * ones,
        np.cross(q, q_prime).reshape((3,) + (1,) * grid.d) * ones,
    ])
    phi_end = trajectory.phi(-1)
    if initialization == "rotation":
        pair = _apply(_rotation_onto(q, phi_end), pair)
    elif initialization == "projection":
        v = normalize(pair[0] - np.sum(phi_end * pair[0], axis=0) * phi_end)
        pair = np.stack([v, np.cross(phi_end, v, axis=0)])
    else:
        raise ConfigError(f"Unknown frame initialization '{initialization}'")
    pair = _orthonormalize(pair, phi_end)

    s = trajectory.pgrid.nodes
    count = len(s)
    v = np.empty((count, 3) + grid.shape)
    w = np.empty_like(v)
    v[-1], w[-1] = pair
    r_next, rate_next = r_matrix(trajectory, count - 1), r_matrix_rate(trajectory, count - 1)
    for i in range(count - 2, -1, -1):
        r_here, rate_here = r_matrix(trajectory, i), r_matrix_rate(trajectory, i)
        span = s[i + 1] - s[i]
        r_mid = 0.5 * (r_here + r_next) + 0.125 * span * (rate_here - rate_next)
        pair = _rk4_propagate(pair, -span, r_next, r_mid, r_here)
        pair = _orthonormalize(pair, trajectory.phi(i))
        v[i], w[i] = pair
        r_next, rate_next = r_here, rate_here
    return FrameField(v, w, tuple(float(c) for c in q_prime), initialization)


def frame_defects(trajectory: HeatTrajectory, frame: FrameField,
                  nodes: Optional[Sequence[int]] = None) -> Dict[str, float]:
    """Largest violations of the orthonormal-tangent-frame conditions."""
    nodes = range(len(trajectory.pgrid)) if nodes is None else nodes
    out = {"unit_v": 0.0, "unit_w": 0.0, "v_dot_w": 0.0, "v_dot_phi": 0.0,
           "w_dot_phi": 0.0, "w_cross": 0.0}
    for i in nodes:
        v, w = frame.node(i)
        phi = trajectory.phi(i)
        out["unit_v"] = max(out["unit_v"], float(np.max(np.abs(np.linalg.norm(v, axis=0) - 1))))
        out["unit_w"] = max(out["unit_w"], float(np.max(np.abs(np.linalg.norm(w, axis=0) - 1))))
        out["v_dot_w"] = max(out["v_dot_w"], float(np.max(np.abs(np.sum(v * w, axis=0)))))
        out["v_dot_phi"] = max(out["v_dot_phi"], float(np.max(np.abs(np.sum(v * phi, axis=0)))))
        out["w_dot_phi"] = max(out["w_dot_phi"], float(np.max(np.abs(np.sum(w * phi, axis=0)))))
        out["w_cross"] = max(out["w_cross"],
                             float(np.max(np.abs(w - np.cross(phi, v, axis=0)))))
    return out


def check_frame(trajectory: HeatTrajectory, frame: FrameField, i: int) -> None:
    """
    Raises:
        InvalidFrameError: If the frame at node i violates any frame condition
    """
    defects = frame_defects(trajectory, frame, [i])
    worst = max(defects, key=defects.get)
    if defects[worst] > FRAME_TOLERANCE:
        raise InvalidFrameError(f"Frame condition '{worst}' violated by {defects[worst]:.3e} at node {i}")


def s_derivative(stack: np.ndarray, s: np.ndarray, i: int, points: int = 3) -> np.ndarray:
    """
    Derivative along the node axis at node i on a nonuniform grid.

    Uses the Lagrange interpolant through `points` consecutive nodes,
    centred on i where possible, so the error is O(h^(points - 1)).
    """
    s = np.asarray(s, dtype=float)
    last = len(s) - 1
    if last == 0:
        raise ConfigError("Need at least two nodes for an s-derivative")
    points = min(points, last + 1)
    start = min(max(i - points // 2, 0), last + 1 - points)
    offsets = s[start:start + points] - s[i]
    scale = float(np.max(np.abs(offsets)))
    vandermonde = np.vander(offsets / scale, points, increasing=True).T
    unit = np.zeros(points)
    unit[1] = 1.0
    weights = np.linalg.solve(vandermonde, unit) / scale
    return np.tensordot(weights, stack[start:start + points], axes=1)


def transport_residual(trajectory: HeatTrajectory, frame: FrameField) -> np.ndarray:
    """max_x |w . d_s v| at each interior node (the caloric condition A_0 = 0)."""
    s = trajectory.pgrid.nodes
    out = []
    for i in range(1, len(s) - 1):
        dv = s_derivative(frame.v, s, i, CALORIC_STENCIL)
        out.append(float(np.max(np.abs(np.sum(frame.w[i] * dv, axis=0)))))
    return np.asarray(out)


# ---------------------------------------------------------------------------
# Heat-flow diagnostics
# ---------------------------------------------------------------------------

def dyadic_decay(initial: SphereField, pgrid: ParabolicGrid, k: int,
                 multiples: Sequence[float] = (1.0, 4.0, 16.0),
                 substeps: int = 4) -> Dict[float, float]:
    """||P_k phi(s)||_{L2} at s = 2^(-2k) * multiple."""
    targets = [2.0 ** (-2 * k) * m for m in multiples]
    if max(targets) > pgrid.S_max:
        raise ConfigError(f"Sample times for k={k} exceed S_max={pgrid.S_max}")
    merged = pgrid.with_nodes(targets)
    trajectory = heat_evolve(initial, merged, substeps)
    return {m: l2_norm(project_dyadic(trajectory.phi(merged.index_of(t)), initial.grid, k),
                       initial.grid)
            for m, t in zip(multiples, targets)}


def energy_profile(trajectory: HeatTrajectory) -> np.ndarray:
    """E1 of every snapshot."""
    return np.asarray([energy_E1(snap) for snap in trajectory.snapshots])


def decay_hierarchy(trajectory: HeatTrajectory, frame: FrameField) -> Dict[str, np.ndarray]:
    """
    sup_x |d^alpha F(s)| for |alpha| <= 2 at every node, for
    F in {phi - Q, v - Q', w - Q x Q'}.
    """
    grid = trajectory.grid
    q = trajectory.base_point.reshape((3,) + (1,) * grid.d)
    qp = np.asarray(frame.q_prime).reshape((3,) + (1,) * grid.d)
    qw = np.cross(trajectory.base_point, frame.q_prime).reshape((3,) + (1,) * grid.d)
    sources = {
        "phi": lambda i: trajectory.phi(i) - q,
        "v": lambda i: frame.v[i] - qp,
        "w": lambda i: frame.w[i] - qw,
    }
    out = {}
    for name, fn in sources.items():
        for order in range(3):
            rows = []
            for i in range(len(trajectory.pgrid)):
                f = fn(i)
                for _ in range(order):
                    f = gradient(f, grid)
                rows.append(float(np.max(np.abs(f))))
            out[f"{name}_d{order}"] = np.asarray(rows)
    return out


__all__ = [
    "ParabolicGrid", "HeatTrajectory", "FrameField", "heat_rhs", "heat_evolve",
    "r_matrix", "r_matrix_from_flow", "r_matrix_discrete", "transport_frame",
    "default_q_prime", "frame_defects", "check_frame", "s_derivative",
    "transport_residual", "dyadic_decay", "energy_profile", "decay_hierarchy",
    "r_matrix_rate", "HEAT_SCHEMES", "CALORIC_STENCIL",
]
