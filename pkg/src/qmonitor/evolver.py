"""Time integration of i hbar dpsi/dt = [-hbar^2/(2m) d^2/dx^2 + V_eff(x, t)] psi.

Two integrators share one contract (lab-frame psi in, lab-frame psi out):

``cayley``
    Crank-Nicolson / Cayley step with a three-point Laplacian and a Thomas
    solve. Exactly unitary for real potentials and a contraction otherwise.
    Stiff absorbing potentials defeat it: every high-energy mode is mapped to
    a factor close to -1, so packets of such modes parked inside the
    measurement corridor outlive the physical state.

``split``
    Symmetric (Strang) splitting. The complex potential is applied as an exact
    diagonal exponential and the kinetic term as an exact exponential in the
    sine basis (DST-I), which diagonalises both the three-point Laplacian and
    its spectral counterpart under Dirichlet walls. The state is carried in a
    frame that follows ``frame * a(t)``; the gauge transformation is exact and
    is undone at t = tau where a(tau) = 0. In the strongly measured regime the
    packet rides on a(t), and the co-moving frame keeps it nearly at rest,
    which is what keeps readout-dependent lattice errors small.

Both paths renormalise the working array every step and keep the logarithm of
the discarded factor, because absorbed norms underflow double precision.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.fft import dst

from .errors import BoundaryLeak, GridMismatch, NumericalInstability, SpectralLeak, ValidationError
from .model import WaveFunction, effective_potential

METHODS = ("cayley", "split")
KINETICS = ("fd3", "spectral")

# Fraction of the grid, at each end, watched by the boundary-leak guard.
OUTER_BAND = 0.05
# Fraction of the sine modes, at the top of the band, watched by the spectral guard.
TOP_BAND = 0.10


@dataclass(frozen=True)
class EvolutionConfig:
    """Discretisation of [0, tau] into ``num_steps`` midpoint-sampled steps.

    ``frame`` is the fraction of a(t) followed by the split integrator's moving
    frame; ``None`` picks it from the measurement strength (see
    :func:`tracking_fraction`).
    """

    tau: float
    num_steps: int
    omega: float = 1.0
    max_omega_dt: float = 0.05
    method: str = "split"
    kinetic: str = "spectral"
    frame: float | None = None
    leak_tol: float = 1e-8
    spectral_tol: float = 1e-10
    growth_tol: float = 1e-9

    def __post_init__(self):
        if isinstance(self.num_steps, bool) or int(self.num_steps) != self.num_steps or self.num_steps < 1:
            raise ValidationError(f"num_steps must be a positive integer, got {self.num_steps!r}")
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.kinetic not in KINETICS:
            raise ValidationError(f"kinetic must be one of {KINETICS}, got {self.kinetic!r}")
        if self.method == "cayley" and self.kinetic != "fd3":
            raise ValidationError("the cayley integrator needs the tridiagonal fd3 kinetic operator")
        if self.frame is not None and not (0.0 <= self.frame <= 1.0):
            raise ValidationError(f"frame must lie in [0, 1], got {self.frame!r}")
        if self.dt * self.omega > self.max_omega_dt * (1 + 1e-12):
            raise ValidationError(
                f"omega*dt = {self.dt * self.omega:.3g} exceeds {self.max_omega_dt}; raise num_steps"
            )

    @property
    def dt(self):
        return self.tau / self.num_steps

    @classmethod
    def auto(cls, system, setup, *, omega_dt=0.01, rate_dt=0.2, refine=1, **kwargs):
        """Step count resolving omega, Omega_n and the measurement relaxation rate.

        ``rate_dt`` bounds |omega_r| dt, where omega_r is the renormalised
        complex frequency of the harmonic part.
        """
        rate = abs(complex_frequency(system, setup))
        dt = min(omega_dt / system.omega, omega_dt / setup.mode_frequency, rate_dt / rate)
        steps = math.ceil(setup.tau / dt - 1e-9) * int(refine)
        return cls(tau=setup.tau, num_steps=steps, omega=system.omega, **kwargs)


def complex_frequency(system, setup):
    """Principal root of omega^2 - 2 i hbar / (m tau delta_a^2)."""
    w2 = system.omega**2 - 2j * system.hbar * setup.measurement_rate / system.mass
    return cmath.sqrt(w2)


def tracking_fraction(system, setup):
    """How closely the measured packet follows a(t): 1 - exp(-|Im omega_r| tau)."""
    gamma = abs(complex_frequency(system, setup).imag)
    return -math.expm1(-gamma * setup.tau)


@dataclass(frozen=True)
class Amplitude:
    """Complex amplitude stored as ``mantissa * exp(log_scale)``."""

    mantissa: complex
    log_scale: float = 0.0

    @property
    def value(self):
        return self.mantissa * math.exp(self.log_scale)

    @property
    def log_abs(self):
        return math.log(abs(self.mantissa)) + self.log_scale if self.mantissa else -math.inf

    def __abs__(self):
        return abs(self.value)


@numba.njit(cache=True)
def solve_tridiagonal(lower, diag, upper, rhs):
    """Thomas algorithm for a complex tridiagonal system.

    ``lower[i]`` couples row i + 1 to column i and ``upper[i]`` row i to
    column i + 1, so both have length n - 1. No pivoting: the Cayley matrices
    solved here are diagonally dominant for every time step.
    """
    n = diag.size
    cp = np.empty(n, np.complex128)
    dp = np.empty(n, np.complex128)
    cp[0] = upper[0] / diag[0] if n > 1 else 0.0
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - lower[i - 1] * cp[i - 1]
        if i < n - 1:
            cp[i] = upper[i] / den
        dp[i] = (rhs[i] - lower[i - 1] * dp[i - 1]) / den
    out = np.empty(n, np.complex128)
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return out


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatch(f"{a.grid} vs {b.grid}")


def _outer_fraction(values):
    """Share of |values|^2 in the outer band at either end of the last axis."""
    n = values.shape[-1]
    band = max(1, int(math.ceil(OUTER_BAND * n)))
    dens = np.abs(values) ** 2
    total = dens.sum(axis=-1)
    outer = dens[..., :band].sum(axis=-1) + dens[..., -band:].sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, outer / total, 0.0)


def step(psi, t, system, setup, readout, config):
    """One Cayley step from t to t + dt with V_eff sampled at t + dt/2.

    Solves (1 + i dt H / 2 hbar) psi' = (1 - i dt H / 2 hbar) psi on the
    interior points; the walls stay at zero.
    """
    dt = config.dt
    if t + dt > setup.tau + 1e-12 * max(1.0, setup.tau):
        raise ValidationError(f"step would run past tau: t + dt = {t + dt} > {setup.tau}")
    grid = psi.grid
    x = grid.x[1:-1]
    u = psi.values[1:-1]
    kin = system.hbar**2 / (2 * system.mass * grid.dx**2)
    c = 0.5j * dt / system.hbar
    v = effective_potential(x, t + 0.5 * dt, system, setup, readout)
    h_diag = 2 * kin + v
    off = np.full(x.size - 1, -kin, dtype=complex)

    rhs = (1 - c * h_diag) * u
    rhs[1:] -= c * off * u[:-1]
    rhs[:-1] -= c * off * u[1:]
    new = solve_tridiagonal(c * off, 1 + c * h_diag, c * off, rhs)

    before = float(np.sum(np.abs(u) ** 2))
    after = float(np.sum(np.abs(new) ** 2))
    if after > before * (1 + 2 * config.growth_tol):
        raise NumericalInstability(
            f"norm grew by {math.sqrt(after / before) - 1:.3e} in one step at t = {t:.6g}"
        )
    values = np.zeros(grid.num_points, dtype=complex)
    values[1:-1] = new
    return WaveFunction(grid, values, psi.log_scale)


def _renormalised(psi):
    m = psi.mantissa_norm_squared()
    if m == 0.0:
        return psi
    s = math.sqrt(m)
    return WaveFunction(psi.grid, psi.values / s, psi.log_scale + math.log(s))


def _evolve_cayley(phi1, system, setup, readout, config, diagnostics):
    psi = _renormalised(phi1)
    leak = 0.0
    for k in range(config.num_steps):
        psi = step(psi, k * config.dt, system, setup, readout, config)
        frac = float(_outer_fraction(psi.values))
        leak = max(leak, frac)
        if frac > config.leak_tol:
            raise BoundaryLeak(f"{frac:.2e} of the probability in the outer band at step {k + 1}")
        psi = _renormalised(psi)
    if diagnostics is not None:
        diagnostics.update(leak_max=leak, spectral_max=0.0, frame=0.0)
    return psi


def _kinetic_energies(num_interior, dx, system, kinetic):
    k = np.arange(1, num_interior + 1)
    if kinetic == "spectral":
        wavenumber = math.pi * k / ((num_interior + 1) * dx)
        return system.hbar**2 * wavenumber**2 / (2 * system.mass)
    return 2 * system.hbar**2 / (system.mass * dx**2) * np.sin(0.5 * math.pi * k / (num_interior + 1)) ** 2


@numba.njit(cache=True)
def _half_step_factor(y, eps, frame, sin_t, om, m, mw2, beta, dt_over_hbar, rate_dt, out):
    """exp(-i V dt / 2 hbar) in the moving frame, one row per readout amplitude.

    V = V_real(y + d) - m Omega^2 d y - i hbar rate (y + d - a)^2 with
    a = eps sin(Omega t) and d = frame * a.
    """
    for r in range(eps.size):
        a = eps[r] * sin_t
        d = frame * a
        fd = m * om * om * d
        for j in range(y.size):
            xs = y[j] + d
            x2 = xs * xs
            v = 0.5 * mw2 * x2 + 0.25 * beta * x2 * x2 - fd * y[j]
            g = xs - a
            amp = math.exp(-0.5 * rate_dt * g * g)
            ph = -0.5 * dt_over_hbar * v
            out[r, j] = complex(amp * math.cos(ph), amp * math.sin(ph))


def split_evolve_batch(phi1, system, setup, epsilons, config, frame=None):
    """Evolve one initial state under many readout amplitudes at once.

    Returns ``(values, log_scale, diagnostics)`` where row r of ``values``
    times ``exp(log_scale[r])`` is the lab-frame psi(x, tau) for
    ``epsilons[r]``. ``frame`` overrides ``config.frame``.
    """
    grid = phi1.grid
    eps = np.atleast_1d(np.asarray(epsilons, dtype=float))[:, None]
    lam = config.frame if frame is None else frame
    if lam is None:
        lam = tracking_fraction(system, setup)
    m, hbar = system.mass, system.hbar
    om = setup.mode_frequency
    rate = setup.measurement_rate
    dt = config.dt
    y = grid.x[1:-1]
    num = y.size
    kinetic_phase = np.exp(-1j * _kinetic_energies(num, grid.dx, system, config.kinetic) * dt / hbar)
    top = max(1, int(math.ceil(TOP_BAND * num)))

    chi = np.repeat(phi1.values[None, 1:-1], eps.shape[0], axis=0).astype(complex)
    # Boost into the frame moving with velocity lam * a'(0).
    chi *= np.exp(-1j * m * lam * eps * om * y / hbar)
    s0 = np.sqrt(np.sum(np.abs(chi) ** 2, axis=1))
    chi /= s0[:, None]
    log_scale = np.log(s0) + phi1.log_scale + 0.5 * math.log(grid.dx)
    chi *= math.sqrt(1 / grid.dx)

    mw2 = m * system.omega**2
    rows = eps[:, 0].copy()
    half = np.empty((rows.size, num), dtype=complex)
    leak_max = 0.0
    spectral_max = 0.0
    ref_sq = np.sum(chi.real**2 + chi.imag**2, axis=1)
    band = max(1, int(math.ceil(OUTER_BAND * num)))
    _half_step_factor(y, rows, lam, math.sin(0.5 * om * dt), om, m, mw2, system.beta,
                      dt / hbar, rate * dt, half)
    for k in range(config.num_steps):
        chi *= half
        spec = dst(chi, type=1, axis=1, norm="ortho", overwrite_x=True)
        tail = spec[:, -top:]
        # Parseval: the orthonormal transform keeps sum |chi|^2, which is at most ref_sq.
        sfrac = np.sum(tail.real**2 + tail.imag**2, axis=1) / ref_sq
        spectral_max = max(spectral_max, float(sfrac.max()))
        spec *= kinetic_phase
        chi = dst(spec, type=1, axis=1, norm="ortho", overwrite_x=True)
        chi *= half
        if k + 1 < config.num_steps:
            _half_step_factor(y, rows, lam, math.sin(om * (k + 1.5) * dt), om, m, mw2,
                              system.beta, dt / hbar, rate * dt, half)

        dens = chi.real**2 + chi.imag**2
        sq = dens.sum(axis=1)
        if np.any(sq > ref_sq * (1 + 2 * config.growth_tol)):
            r = int(np.argmax(sq / ref_sq))
            raise NumericalInstability(
                f"norm grew by {math.sqrt(sq[r] / ref_sq[r]) - 1:.3e} at step {k + 1} "
                f"(epsilon = {rows[r]:.6g})"
            )
        outer = dens[:, :band].sum(axis=1) + dens[:, -band:].sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(sq > 0, outer / sq, 0.0)
        leak_max = max(leak_max, float(frac.max()))
        if frac.max() > config.leak_tol:
            r = int(np.argmax(frac))
            raise BoundaryLeak(
                f"{frac[r]:.2e} of the probability in the outer band at step {k + 1} "
                f"(epsilon = {rows[r]:.6g})"
            )
        if sfrac.max() > config.spectral_tol:
            r = int(np.argmax(sfrac))
            raise SpectralLeak(
                f"{sfrac[r]:.2e} of the weight in the top sine modes at step {k + 1} "
                f"(epsilon = {rows[r]:.6g}); refine the grid"
            )
        with np.errstate(divide="ignore"):
            log_scale += 0.5 * np.log(sq / ref_sq)
        nonzero = sq > 0
        chi[nonzero] /= np.sqrt(sq[nonzero] / ref_sq[nonzero])[:, None]

    # Back to the lab frame: d(tau) = 0 but d'(tau) and the action phase remain.
    vel_end = lam * eps * om * math.cos(om * setup.tau)
    action = 0.25 * m * (lam * eps[:, 0] * om) ** 2 * setup.tau
    chi *= np.exp(1j * (m * vel_end * y + action[:, None]) / hbar)

    values = np.zeros((eps.shape[0], grid.num_points), dtype=complex)
    values[:, 1:-1] = chi
    diagnostics = {"leak_max": leak_max, "spectral_max": spectral_max, "frame": lam}
    return values, log_scale, diagnostics


def evolve(phi1, system, setup, readout, config, diagnostics=None):
    """psi_[a](x, tau) starting from ``phi1`` at t = 0.

    The norm is not restored: its decay is the probability weight of the
    readout. Pass a dict as ``diagnostics`` to receive leak statistics.
    """
    if abs(config.tau - setup.tau) > 1e-12 * setup.tau:
        raise ValidationError(f"config.tau = {config.tau} does not match setup.tau = {setup.tau}")
    if config.method == "cayley":
        return _evolve_cayley(phi1, system, setup, readout, config, diagnostics)
    values, log_scale, diag = split_evolve_batch(phi1, system, setup, [readout.epsilon], config)
    if diagnostics is not None:
        diagnostics.update(diag)
    return WaveFunction(phi1.grid, values[0], float(log_scale[0]))


def overlap(phi2, psi):
    """Trapezoid inner product <phi2|psi>."""
    _check_same_grid(phi2, psi)
    w = phi2.grid.trapezoid_weights()
    mantissa = complex(np.sum(np.conj(phi2.values) * psi.values * w))
    return Amplitude(mantissa, phi2.log_scale + psi.log_scale)
