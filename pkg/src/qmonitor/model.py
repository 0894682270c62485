"""Physical parameters, readouts, grids and the complex effective potential.

All lengths default to natural units where hbar = m = omega = 1, so the
oscillator length sqrt(hbar / (m omega)) is one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .errors import GridTooNarrow, ValidationError

# Boundary magnitude allowed for a sampled ground state, relative to its peak.
GROUND_STATE_EDGE_TOL = 1e-10


def _positive(name, value):
    if not (isinstance(value, (int, float, np.floating)) and math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a finite positive number, got {value!r}")


@dataclass(frozen=True)
class PhysicalSystem:
    """Oscillator with potential m omega^2 x^2 / 2 + beta x^4 / 4."""

    mass: float = 1.0
    omega: float = 1.0
    beta: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        _positive("mass", self.mass)
        _positive("omega", self.omega)
        _positive("hbar", self.hbar)
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValidationError(f"beta must be finite and non-negative, got {self.beta!r}")

    @classmethod
    def from_beta_tilde(cls, beta_tilde, mass=1.0, omega=1.0, hbar=1.0):
        """Build a system from the dimensionless quartic strength beta hbar / (m^2 omega^3)."""
        if not (math.isfinite(beta_tilde) and beta_tilde >= 0):
            raise ValidationError(f"beta_tilde must be finite and non-negative, got {beta_tilde!r}")
        return cls(mass=mass, omega=omega, beta=beta_tilde * mass**2 * omega**3 / hbar, hbar=hbar)

    @property
    def beta_tilde(self):
        return self.beta * self.hbar / (self.mass**2 * self.omega**3)

    @property
    def quantum_scale(self):
        return math.sqrt(self.hbar / (self.mass * self.omega))

    def real_potential(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.mass * self.omega**2 * x**2 + 0.25 * self.beta * x**4


@dataclass(frozen=True)
class MeasurementSetup:
    """Measurement window tau, instrumental error delta_a and readout mode n.

    ``delta_a = math.inf`` switches the measurement off.
    """

    tau: float
    delta_a: float
    mode_index: int = 1

    def __post_init__(self):
        _positive("tau", self.tau)
        if not (self.delta_a == math.inf or (math.isfinite(self.delta_a) and self.delta_a > 0)):
            raise ValidationError(f"delta_a must be positive or +inf, got {self.delta_a!r}")
        if isinstance(self.mode_index, bool) or not isinstance(self.mode_index, (int, np.integer)):
            raise ValidationError(f"mode_index must be an integer, got {self.mode_index!r}")
        if self.mode_index < 1:
            raise ValidationError(f"mode_index must be >= 1, got {self.mode_index}")

    @property
    def mode_frequency(self):
        return self.mode_index * math.pi / self.tau

    @property
    def measurement_rate(self):
        """Coefficient 1 / (tau delta_a^2) of the Gaussian weight; zero when unmeasured."""
        if self.delta_a == math.inf:
            return 0.0
        return 1.0 / (self.tau * self.delta_a**2)

    def with_delta_a(self, delta_a):
        return MeasurementSetup(self.tau, delta_a, self.mode_index)


@dataclass(frozen=True)
class ReadoutWaveform:
    """Measurement record a(t) = epsilon sin(Omega_n t) on [0, tau]."""

    epsilon: float
    setup: MeasurementSetup

    def value_at(self, t):
        t = np.asarray(t, dtype=float)
        n = self.setup.mode_index
        # sin(n pi t / tau) evaluated through the phase fraction so a(tau) is exactly 0.
        out = self.epsilon * np.sin(math.pi * ((n * t / self.setup.tau) % 2.0))
        frac = n * t / self.setup.tau
        out = np.where(frac == np.round(frac), 0.0, out)
        return out if out.ndim else float(out)

    def velocity_at(self, t):
        om = self.setup.mode_frequency
        return self.epsilon * om * np.cos(om * np.asarray(t, dtype=float))

    def acceleration_at(self, t):
        return -self.setup.mode_frequency**2 * self.value_at(t)


def make_readout(epsilon, setup):
    return ReadoutWaveform(float(epsilon), setup)


def _even_fast_intervals(n_intervals):
    """Smallest even n >= n_intervals for which a DST-I of n - 1 interior points is fast."""
    n = max(int(n_intervals), 2)
    while True:
        n = next_fast_len(n)
        if n % 2 == 0:
            return n
        n += 1


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float
    x_max: float
    num_points: int

    def __post_init__(self):
        if not (self.x_min < 0 < self.x_max):
            raise ValidationError("grid must satisfy x_min < 0 < x_max")
        if self.num_points < 3 or self.num_points % 2 == 0:
            raise ValidationError(f"num_points must be odd and >= 3, got {self.num_points}")
        center = self.x_min + (self.num_points // 2) * self.dx
        if abs(center) > 0.5 * self.dx:
            raise ValidationError("grid has no point within half a spacing of x = 0")

    @classmethod
    def symmetric(cls, half_width, num_points):
        return cls(-float(half_width), float(half_width), int(num_points))

    @classmethod
    def with_spacing(cls, half_width, max_spacing):
        """Symmetric grid no coarser than ``max_spacing`` with an FFT-friendly size."""
        intervals = _even_fast_intervals(math.ceil(2 * half_width / max_spacing))
        return cls.symmetric(half_width, intervals + 1)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.num_points - 1)

    @property
    def x(self):
        x = np.linspace(self.x_min, self.x_max, self.num_points)
        if self.x_min == -self.x_max:
            # Exact mirror symmetry, so parity tests hold sample-wise.
            half = self.num_points // 2
            x[half] = 0.0
            x[:half] = -x[:half:-1]
        return x

    def refined(self, factor):
        """Same extent with ``factor`` times as many intervals."""
        return SpatialGrid(self.x_min, self.x_max, (self.num_points - 1) * int(factor) + 1)

    def trapezoid_weights(self):
        w = np.full(self.num_points, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Samples psi_j on ``grid``; the physical state is ``exp(log_scale) * values``.

    The separate logarithmic scale keeps strongly absorbed states representable:
    their norms routinely fall below the smallest double.
    """

    grid: SpatialGrid
    values: np.ndarray
    log_scale: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.num_points,):
            raise ValidationError(
                f"values has shape {values.shape}, grid expects ({self.grid.num_points},)"
            )
        if values[0] != 0 or values[-1] != 0:
            raise ValidationError("wavefunction must vanish at both grid endpoints")
        object.__setattr__(self, "values", values)

    def norm_squared(self):
        """Trapezoid norm of the physical state (may underflow to 0)."""
        return math.exp(2 * self.log_scale) * self.mantissa_norm_squared()

    def mantissa_norm_squared(self):
        return float(np.sum(np.abs(self.values) ** 2 * self.grid.trapezoid_weights()))

    def log_norm(self):
        """Natural log of the trapezoid norm sqrt(N)."""
        return self.log_scale + 0.5 * math.log(self.mantissa_norm_squared())

    def physical_values(self):
        return math.exp(self.log_scale) * self.values

    def reflected(self):
        return WaveFunction(self.grid, self.values[::-1].copy(), self.log_scale)


def ground_state(grid, system):
    """Harmonic ground state sampled on ``grid`` with the walls clamped to zero.

    The same state is used at both ends of the window even when beta > 0.
    """
    x = grid.x
    mw = system.mass * system.omega / system.hbar
    peak = (mw / math.pi) ** 0.25
    values = peak * np.exp(-0.5 * mw * x**2)
    edge = max(values[0], values[-1])
    if edge > GROUND_STATE_EDGE_TOL * peak:
        raise GridTooNarrow(
            f"ground state is {edge / peak:.2e} of its peak at the grid edge "
            f"(limit {GROUND_STATE_EDGE_TOL:.0e}); widen the grid"
        )
    values = values.astype(complex)
    values[0] = values[-1] = 0.0
    return WaveFunction(grid, values)


def effective_potential(x, t, system, setup, readout):
    """V(x) - i hbar (x - a(t))^2 / (tau delta_a^2)."""
    x = np.asarray(x, dtype=float)
    v = system.real_potential(x).astype(complex)
    rate = setup.measurement_rate
    if rate:
        v = v - 1j * system.hbar * rate * (x - readout.value_at(t)) ** 2
    return v if v.ndim else complex(v)


def default_half_width(system, eps_max=0.0):
    """Grid half-width covering the ground state and any readout excursion."""
    qs = system.quantum_scale
    half = max(7.0, abs(eps_max) / qs + 7.0) * qs
    if system.beta > 0:
        half *= 1.5
    return half


def default_grid(system, eps_max=0.0, points_per_scale=20):
    half = default_half_width(system, eps_max)
    return SpatialGrid.with_spacing(half, system.quantum_scale / points_per_scale)
