"""
Spectral infrastructure on the periodic box.

This module provides the grid description, Fourier transforms, the smooth
dyadic and directional Littlewood-Paley projectors, spectral derivatives
and the Galilean boost of space-time fields.

Field arrays carry the d spatial axes last; any leading axes (vector
components, time nodes) are treated as batch dimensions.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Tuple, Union

import numpy as np
import scipy.fft

from ..errors import BandOutOfRangeError, ConfigError, InvalidDirectionError

logger = logging.getLogger(__name__)

ETA_PLATEAU = 5.0 / 4.0
ETA_SUPPORT = 8.0 / 5.0
UNIT_TOLERANCE = 1e-12

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform periodic grid on the box [-L/2, L/2)^d.

    Args:
        d: Spatial dimension (2 or 3)
        n: Points per axis (power of two, at least 8)
        box_length: Side length L of the box
    """

    d: int
    n: int
    box_length: float
    dx: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.d not in (2, 3):
            raise ConfigError(f"Spatial dimension must be 2 or 3, got {self.d}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ConfigError(f"Points per axis must be a power of two >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ConfigError(f"Box length must be positive, got {self.box_length}")
        object.__setattr__(self, "dx", self.box_length / self.n)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def axes(self) -> Tuple[int, ...]:
        """Array axes holding the spatial dimensions (always the last d)."""
        return tuple(range(-self.d, 0))

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.d

    @property
    def volume(self) -> float:
        return self.box_length ** self.d

    @property
    def dt_hint(self) -> float:
        """Default Schrödinger-map step 0.25*(L/(pi n))^2."""
        return 0.25 * (self.box_length / (np.pi * self.n)) ** 2

    @property
    def k_nyquist(self) -> float:
        return np.pi * self.n / self.box_length

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis."""
        x1 = -0.5 * self.box_length + self.dx * np.arange(self.n)
        return tuple(_along_axis(x1, m, self.d) for m in range(self.d))

    def wavenumbers(self) -> Tuple[np.ndarray, ...]:
        """Broadcastable angular wavenumber arrays 2*pi*fftfreq(n, L/n)."""
        k1 = 2.0 * np.pi * scipy.fft.fftfreq(self.n, d=self.dx)
        return tuple(_along_axis(k1, m, self.d) for m in range(self.d))

    def k_squared(self) -> np.ndarray:
        return sum(km ** 2 for km in self.wavenumbers())

    def k_abs(self) -> np.ndarray:
        return np.sqrt(self.k_squared())

    def k_dot(self, e: Sequence[float]) -> np.ndarray:
        return sum(float(em) * km for em, km in zip(e, self.wavenumbers()))

    def rescaled(self, mu: float) -> "GridSpec":
        """Same resolution on a box shrunk by the factor mu."""
        return GridSpec(self.d, self.n, self.box_length / mu)


def _along_axis(values: np.ndarray, axis: int, d: int) -> np.ndarray:
    shape = [1] * d
    shape[axis] = values.size
    return values.reshape(shape)


def forward(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Forward FFT over the spatial axes (scipy.fft honours set_workers)."""
    return scipy.fft.fftn(f, axes=grid.axes)


def inverse(f_hat: np.ndarray, grid: GridSpec) -> np.ndarray:
    return scipy.fft.ifftn(f_hat, axes=grid.axes)


def apply_multiplier(f: np.ndarray, grid: GridSpec, multiplier: np.ndarray) -> np.ndarray:
    """Apply a Fourier multiplier; real input with a real even multiplier stays real."""
    out = inverse(forward(f, grid) * multiplier, grid)
    if np.isrealobj(f) and np.isrealobj(multiplier):
        return out.real
    return out


# ---------------------------------------------------------------------------
# Littlewood-Paley cutoffs
# ---------------------------------------------------------------------------

def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t<=0, 1 for t>=1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        g_t = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        g_c = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return g_t / (g_t + g_c)


def eta0(mu: ArrayLike) -> ArrayLike:
    """
    Smooth even bump equal to 1 on |mu| <= 5/4 and 0 on |mu| >= 8/5.

    Args:
        mu: Scalar or array of real frequencies

    Returns:
        Values in [0, 1] with the shape of mu
    """
    a = np.abs(np.asarray(mu, dtype=float))
    out = _smooth_step((ETA_SUPPORT - a) / (ETA_SUPPORT - ETA_PLATEAU))
    out = np.where(a <= ETA_PLATEAU, 1.0, out)
    return float(out) if np.ndim(out) == 0 else out


def chi_k(mu: ArrayLike, k: int) -> ArrayLike:
    """Dyadic annulus cutoff eta0(mu/2^k) - eta0(mu/2^(k-1))."""
    mu = np.asarray(mu, dtype=float)
    out = np.asarray(eta0(mu / 2.0 ** k)) - np.asarray(eta0(mu / 2.0 ** (k - 1)))
    out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DyadicWindow:
    """Dyadic indices k whose annulus |xi| ~ 2^k is resolved by the grid."""

    k_min: int
    k_max: int

    @classmethod
    def from_grid(cls, grid: GridSpec) -> "DyadicWindow":
        k_min = int(np.ceil(np.log2(2.0 * np.pi / grid.box_length) - 1e-12))
        k_max = int(np.floor(np.log2(grid.k_nyquist / 2.0) + 1e-12))
        if k_max < k_min:
            raise ConfigError(
                f"Grid n={grid.n}, L={grid.box_length} resolves no dyadic band"
            )
        return cls(k_min, k_max)

    def __contains__(self, k: int) -> bool:
        return self.k_min <= k <= self.k_max

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.k_min, self.k_max + 1))

    def __len__(self) -> int:
        return self.k_max - self.k_min + 1

    def check(self, k: int) -> int:
        if k not in self:
            raise BandOutOfRangeError(
                f"Dyadic index {k} outside window [{self.k_min}, {self.k_max}]"
            )
        return k

    def clip(self, k_low: int, k_high: int) -> range:
        return range(max(k_low, self.k_min), min(k_high, self.k_max) + 1)


def check_unit(e: Sequence[float], d: int) -> np.ndarray:
    """Validate a unit direction in R^d."""
    e = np.asarray(e, dtype=float)
    if e.shape != (d,):
        raise InvalidDirectionError(f"Direction must have {d} components, got shape {e.shape}")
    if abs(np.linalg.norm(e) - 1.0) > UNIT_TOLERANCE:
        raise InvalidDirectionError(f"Direction {e.tolist()} is not a unit vector")
    return e


def project_dyadic(f: np.ndarray, grid: GridSpec, k: int) -> np.ndarray:
    """
    Apply P_k, the Fourier multiplier chi_k(|xi|), componentwise.

    Raises:
        BandOutOfRangeError: If k is outside the grid's dyadic window
    """
    DyadicWindow.from_grid(grid).check(k)
    return apply_multiplier(f, grid, chi_k(grid.k_abs(), k))


def project_directional(f: np.ndarray, grid: GridSpec, k: int,
                        e: Sequence[float]) -> np.ndarray:
    """
    Apply P_{k,e}, the Fourier multiplier chi_k(xi . e).

    Raises:
        InvalidDirectionError: If e is not a unit vector
        BandOutOfRangeError: If k is outside the grid's dyadic window
    """
    e = check_unit(e, grid.d)
    DyadicWindow.from_grid(grid).check(k)
    return apply_multiplier(f, grid, chi_k(grid.k_dot(e), k))


def mean_mode(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return f.mean(axis=grid.axes, keepdims=True) * np.ones(grid.shape)


def annulus_leakage(f: np.ndarray, grid: GridSpec, k: int) -> float:
    """Fraction of spectral mass outside 2^(k-1) <= |xi| <= 2^(k+1)."""
    power = np.abs(forward(f, grid)) ** 2
    kabs = grid.k_abs()
    inside = (kabs >= 2.0 ** (k - 1)) & (kabs <= 2.0 ** (k + 1))
    total = float(power.sum())
    if total == 0.0:
        return 0.0
    return float((power * ~inside).sum()) / total


# ---------------------------------------------------------------------------
# Derivatives and quadrature
# ---------------------------------------------------------------------------

def spectral_derivative(f: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """
    Exact periodic derivative along spatial axis 0..d-1 (Nyquist mode dropped).
    """
    if not 0 <= axis < grid.d:
        raise ConfigError(f"Axis {axis} outside 0..{grid.d - 1}")
    k1 = 2.0 * np.pi * scipy.fft.fftfreq(grid.n, d=grid.dx)
    k1[grid.n // 2] = 0.0
    out = inverse(forward(f, grid) * (1j * _along_axis(k1, axis, grid.d)), grid)
    return out.real if np.isrealobj(f) else out


def gradient(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Stack of spectral derivatives; new leading axis indexes m=0..d-1."""
    return np.stack([spectral_derivative(f, grid, m) for m in range(grid.d)])


def spectral_laplacian(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = inverse(forward(f, grid) * (-grid.k_squared()), grid)
    return out.real if np.isrealobj(f) else out


def integrate(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Trapezoid (exact for band-limited integrands) over the spatial axes."""
    return f.sum(axis=grid.axes) * grid.cell_volume


def l2_norm(f: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(np.sum(np.abs(f) ** 2) * grid.cell_volume))


def parseval_norm(f: np.ndarray, grid: GridSpec) -> float:
    """L2 norm computed on the Fourier side."""
    f_hat = forward(f, grid)
    return float(np.sqrt(np.sum(np.abs(f_hat) ** 2) * grid.cell_volume / grid.n ** grid.d))


def fourier_shift(f: np.ndarray, grid: GridSpec, shift: Sequence[float]) -> np.ndarray:
    """Return f(x + shift) by a Fourier phase (exact for band-limited f)."""
    phase = np.exp(1j * grid.k_dot(shift))
    out = inverse(forward(f, grid) * phase, grid)
    return out.real if np.isrealobj(f) else out


# ---------------------------------------------------------------------------
# Space-time fields and the Galilean boost
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceTimeField:
    """
    Complex scalar field sampled on grid x uniform time nodes.

    values has shape (len(times),) + grid.shape.
    """

    values: np.ndarray
    times: np.ndarray
    grid: GridSpec

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 9:
            raise ConfigError(f"Space-time fields need at least 9 time nodes, got {times.size}")
        steps = np.diff(times)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(abs(steps[0]), 1e-300):
            raise ConfigError("Time nodes must be strictly increasing and uniform")
        if self.values.shape != (times.size,) + self.grid.shape:
            raise ConfigError(
                f"Values shape {self.values.shape} does not match "
                f"{(times.size,) + self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("Space-time field has non-finite entries")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def half_width(self) -> float:
        return float(np.max(np.abs(self.times)))

    def time_weights(self) -> np.ndarray:
        """Trapezoid weights in t."""
        w = np.full(self.times.size, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    def with_values(self, values: np.ndarray) -> "SpaceTimeField":
        return SpaceTimeField(values, self.times, self.grid)

    def scaled(self, factor: complex) -> "SpaceTimeField":
        return self.with_values(self.values * factor)


def galilean_transform(u: SpaceTimeField, w: Sequence[float]) -> SpaceTimeField:
    """
    Galilean boost T_w u(x,t) = e^{-ix.w/2} e^{-it|w|^2/4} u(x+tw, t).

    The shift by tw is a Fourier phase per time node. The output is periodic
    when w/2 lies on the dual lattice; moduli are exact for any w.
    """
    grid = u.grid
    w = np.asarray(w, dtype=float)
    if w.shape != (grid.d,):
        raise ConfigError(f"Velocity must have {grid.d} components")
    if not np.any(w):
        return u
    x = grid.coordinates()
    x_dot_w = sum(float(wm) * xm for wm, xm in zip(w, x))
    kw = grid.k_dot(w)
    u_hat = forward(u.values, grid)
    t = u.times.reshape((-1,) + (1,) * grid.d)
    shifted = inverse(u_hat * np.exp(1j * kw * t), grid)
    prefactor = np.exp(-0.5j * x_dot_w) * np.exp(-0.25j * t * float(w @ w))
    return u.with_values(prefactor * shifted)


__all__ = [
    "GridSpec", "DyadicWindow", "SpaceTimeField",
    "eta0", "chi_k", "project_dyadic", "project_directional",
    "spectral_derivative", "spectral_laplacian", "gradient",
    "galilean_transform", "fourier_shift", "apply_multiplier",
    "forward", "inverse", "integrate", "l2_norm", "parseval_norm",
    "annulus_leakage", "mean_mode", "check_unit",
]
