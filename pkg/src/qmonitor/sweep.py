"""Readout-probability profiles P(epsilon) and effective-width extraction.

The measure over readouts is restricted to the sinusoidal family, so the
normalisation integral runs over the amplitude epsilon alone.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .errors import (
    BoundaryLeak,
    DegenerateProfile,
    FitDiverged,
    QMonitorError,
    SpectralLeak,
    ValidationError,
    ZeroPeak,
)
from .evolver import (
    EvolutionConfig,
    complex_frequency,
    split_evolve_batch,
    evolve,
    overlap,
    tracking_fraction,
)
from .model import MeasurementSetup, SpatialGrid, WaveFunction, ground_state, make_readout


@dataclass(frozen=True, eq=False)
class EpsilonGrid:
    """Odd, symmetric, ascending samples of the readout amplitude with an exact 0."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 3 or v.size % 2 == 0:
            raise ValidationError("epsilon grid needs an odd number (>= 3) of samples")
        if np.any(np.diff(v) <= 0):
            raise ValidationError("epsilon grid must be strictly ascending")
        if not np.array_equal(v, -v[::-1]):
            raise ValidationError("epsilon grid must be symmetric about 0")
        object.__setattr__(self, "values", v)

    @classmethod
    def symmetric(cls, eps_max, count=129):
        if count % 2 == 0 or count < 3:
            raise ValidationError(f"count must be odd and >= 3, got {count}")
        half = count // 2
        pos = eps_max * np.arange(1, half + 1) / half
        return cls(np.concatenate([-pos[::-1], [0.0], pos]))

    @property
    def eps_max(self):
        return float(self.values[-1])

    @property
    def center(self):
        return self.values.size // 2

    @property
    def spacing(self):
        return float(self.values[1] - self.values[0])

    def __len__(self):
        return self.values.size

    def refined(self, factor=2):
        return EpsilonGrid.symmetric(self.eps_max, (len(self) - 1) * factor + 1)


def simpson_weights(count, spacing):
    """Composite Simpson weights for an odd number of equally spaced samples."""
    if count % 2 == 0:
        raise ValidationError("Simpson's rule needs an odd number of samples")
    w = np.ones(count)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * spacing / 3.0


@dataclass(frozen=True)
class Numerics:
    """Resolution policy for one profile; every field is a knob in the run config."""

    eps_count: int = 129
    eps_factor: float = 6.0
    tail_tol: float = 1e-6
    max_doublings: int = 4
    omega_dt: float = 0.01
    rate_dt: float = 0.2
    refine: int = 1
    method: str = "split"
    kinetic: str = "spectral"
    frame: float | None = None
    half_width: float | None = None
    dx: float | None = None
    num_steps: int | None = None
    modes_per_width: float = 9.0
    max_retries: int = 6
    exploit_parity: bool = True


@dataclass(frozen=True, eq=False)
class ProfileAmplitudes:
    """I(epsilon) = amplitudes * exp(log_scale), in epsilon-grid order."""

    epsilon: EpsilonGrid
    amplitudes: np.ndarray
    log_scale: float
    diagnostics: dict

    @property
    def values(self):
        return self.amplitudes * math.exp(self.log_scale)


@dataclass(frozen=True, eq=False)
class SweepResult:
    epsilon: EpsilonGrid
    amplitudes: np.ndarray
    log_scale: float
    profile: np.ndarray
    width_equivalent: float
    width_gauss_fit: float
    diagnostics: dict = field(default_factory=dict)


def choose_grid(system, setup, eps_max, numerics, frame):
    """Spatial grid for the split integrator in a frame following ``frame * a(t)``.

    Extent: the ground state plus the packet's excursion relative to the
    frame. Resolution: the narrower of the oscillator and measurement lengths,
    plus the momentum the frame boost and residual forces impart.
    """
    m, hbar = system.mass, system.hbar
    qs = system.quantum_scale
    wr = complex_frequency(system, setup)
    ell = min(qs, math.sqrt(hbar / (m * abs(wr))))
    rate = hbar * setup.measurement_rate / m
    om = setup.mode_frequency
    tau = setup.tau

    if numerics.half_width is not None:
        half = numerics.half_width
    else:
        response = 2j * rate / (om**2 - wr**2) if rate else 0.0
        relative = min(abs(response - frame), rate * tau**2 + frame, 1.0 + frame)
        half = 7.0 * qs + relative * eps_max + 2.0 * qs
        if system.beta > 0:
            half *= 1.5

    if numerics.dx is not None:
        dx = numerics.dx
    else:
        k_max = numerics.modes_per_width / ell
        k_max += (m / hbar) * eps_max * (
            frame * om
            + frame * abs(om**2 - system.omega**2) / abs(wr)
            + (1 - frame) * min(2 * rate * tau, om)
            + frame * system.beta * eps_max**2 / (m * abs(wr))
        )
        dx = math.pi / k_max
        if numerics.kinetic == "fd3":
            dx /= 4.0
    return SpatialGrid.with_spacing(half, dx / numerics.refine)


def amplitude_profile(eps_grid, system, setup, config=None, grid=None, numerics=None):
    """I(epsilon) = <phi|psi_[a](tau)> for every epsilon of ``eps_grid``.

    phi is the harmonic ground state at both ends of the window. With the
    split integrator all epsilons evolve together; if a guard trips, the grid
    is widened or refined and the whole profile is recomputed.
    """
    numerics = numerics or Numerics()
    eps = eps_grid.values
    frame = numerics.frame if numerics.frame is not None else tracking_fraction(system, setup)
    if config is None:
        if numerics.num_steps is not None:
            config = EvolutionConfig(
                tau=setup.tau, num_steps=numerics.num_steps * numerics.refine, omega=system.omega,
                method=numerics.method, kinetic=numerics.kinetic, frame=frame,
            )
        else:
            config = EvolutionConfig.auto(
                system, setup, omega_dt=numerics.omega_dt, rate_dt=numerics.rate_dt,
                refine=numerics.refine, method=numerics.method, kinetic=numerics.kinetic, frame=frame,
            )
    if config.method == "split" and config.frame is not None:
        frame = config.frame
    if grid is None:
        grid = choose_grid(system, setup, eps_grid.eps_max, numerics, frame)

    parity = numerics.exploit_parity
    run_eps = eps[eps_grid.center:] if parity else eps
    retries = 0
    started = time.perf_counter()
    while True:
        try:
            phi = ground_state(grid, system)
            logs, phases, diag = _run_profile(phi, system, setup, run_eps, config, frame)
            break
        except (BoundaryLeak, SpectralLeak) as exc:
            if retries >= numerics.max_retries:
                raise
            retries += 1
            if isinstance(exc, BoundaryLeak):
                half = grid.x_max * 1.5
                grid = SpatialGrid.with_spacing(half, grid.dx)
            else:
                grid = SpatialGrid.with_spacing(grid.x_max, grid.dx / 1.5)
    if parity:
        logs = np.concatenate([logs[:0:-1], logs])
        phases = np.concatenate([phases[:0:-1], phases])
    finite = logs[np.isfinite(logs)]
    top = float(finite.max()) if finite.size else 0.0
    log_scale = top if top < -300.0 else 0.0
    amplitudes = np.exp(logs - log_scale + 1j * phases)
    diag.update(
        retries=retries,
        grid_points=grid.num_points,
        half_width=grid.x_max,
        dx=grid.dx,
        num_steps=config.num_steps,
        dt=config.dt,
        method=config.method,
        seconds=time.perf_counter() - started,
        log10_floor=float(logs.min() / math.log(10)) if logs.size else 0.0,
    )
    return ProfileAmplitudes(eps_grid, amplitudes, log_scale, diag)


def _run_profile(phi, system, setup, run_eps, config, frame):
    if config.method == "split":
        values, log_scale, diag = split_evolve_batch(phi, system, setup, run_eps, config, frame=frame)
        amps = [overlap(phi, WaveFunction(phi.grid, v, s)) for v, s in zip(values, log_scale)]
    else:
        diag = {"leak_max": 0.0, "spectral_max": 0.0, "frame": 0.0}
        amps = []
        for e in run_eps:
            d = {}
            psi = evolve(phi, system, setup, make_readout(e, setup), config, diagnostics=d)
            diag["leak_max"] = max(diag["leak_max"], d["leak_max"])
            amps.append(overlap(phi, psi))
    logs = np.array([a.log_abs for a in amps])
    phases = np.array([np.angle(a.mantissa) for a in amps])
    return logs, phases, diag


def probability_profile(amplitudes, eps_grid):
    """P = |I|^2 normalised by its Simpson integral over epsilon."""
    amplitudes = np.asarray(amplitudes)
    if not np.all(np.isfinite(amplitudes)):
        raise ValidationError("amplitudes must be finite")
    weight = np.abs(amplitudes) ** 2
    q = float(np.dot(simpson_weights(len(eps_grid), eps_grid.spacing), weight))
    if q <= 0 or not math.isfinite(q):
        raise DegenerateProfile(f"Simpson integral of |I|^2 is {q!r}")
    return weight / q


def equivalent_width(profile, eps_grid):
    """(sqrt(pi) P(0))^-1 times the integral of P, which is 1 for a normalised profile."""
    p0 = float(profile[eps_grid.center])
    if p0 <= 0:
        raise ZeroPeak("P(0) = 0; the equivalent width is undefined")
    total = float(np.dot(simpson_weights(len(eps_grid), eps_grid.spacing), profile))
    return total / (math.sqrt(math.pi) * p0)


def gaussian_fit_width(profile, eps_grid, floor=1e-3):
    """Least-squares fit of log P = c - epsilon^2 / w^2 over the points above ``floor * P(0)``."""
    p0 = float(profile[eps_grid.center])
    if p0 <= 0:
        raise ZeroPeak("P(0) = 0; nothing to fit")
    mask = profile > floor * p0
    if mask.sum() < 3:
        raise FitDiverged(f"only {int(mask.sum())} samples above {floor:g} P(0)")
    e2 = eps_grid.values[mask] ** 2
    design = np.column_stack([np.ones_like(e2), e2])
    coef, *_ = np.linalg.lstsq(design, np.log(profile[mask]), rcond=None)
    slope = coef[1]
    if not (math.isfinite(slope) and slope < 0):
        raise FitDiverged(f"fitted curvature {slope!r} is not negative")
    return 1.0 / math.sqrt(-slope)


def tail_ratio(profile, eps_grid):
    p0 = float(profile[eps_grid.center])
    return max(float(profile[0]), float(profile[-1])) / p0 if p0 > 0 else math.inf


def initial_eps_max(system, setup, numerics):
    if setup.delta_a == math.inf:
        return numerics.eps_factor * system.quantum_scale
    linear = analytic.effective_width_linear(system, setup)
    return numerics.eps_factor * linear


def sweep(system, setup, numerics=None):
    """Profile, widths and diagnostics for one (system, setup).

    The epsilon range starts at ``eps_factor`` times the linear-oscillator
    width (used as a guess even when beta > 0) and doubles until the tail
    ratio P(eps_max) / P(0) drops below ``tail_tol``.
    """
    numerics = numerics or Numerics()
    eps_max = initial_eps_max(system, setup, numerics)
    doublings = 0
    while True:
        grid = EpsilonGrid.symmetric(eps_max, numerics.eps_count)
        amps = amplitude_profile(grid, system, setup, numerics=numerics)
        profile = probability_profile(amps.amplitudes, grid)
        tail = tail_ratio(profile, grid)
        if tail <= numerics.tail_tol or setup.delta_a == math.inf or doublings >= numerics.max_doublings:
            break
        eps_max *= 2.0
        doublings += 1
    diag = dict(amps.diagnostics, tail_ratio=tail, doublings=doublings, eps_max=eps_max, log_scale=amps.log_scale)
    try:
        fit = gaussian_fit_width(profile, grid)
    except (FitDiverged, ZeroPeak):
        fit = math.nan
    return SweepResult(
        epsilon=grid,
        amplitudes=amps.amplitudes,
        log_scale=amps.log_scale,
        profile=profile,
        width_equivalent=equivalent_width(profile, grid),
        width_gauss_fit=fit,
        diagnostics=diag,
    )


@dataclass(frozen=True, eq=False)
class ScanRow:
    delta_a: float
    width_equivalent: float = math.nan
    width_gauss_fit: float = math.nan
    analytic_linear: float = math.nan
    classical_limit: float = math.nan
    quantum_limit: float = math.nan
    leak_max: float = math.nan
    tail_ratio: float = math.nan
    status: str = "ok"
    message: str = ""
    diagnostics: dict = field(default_factory=dict)
    result: SweepResult | None = None

    @property
    def ok(self):
        return self.status == "ok"


def reference_columns(system, setup):
    try:
        lin = analytic.effective_width_linear(system, setup)
    except QMonitorError:
        lin = math.nan
    return lin, analytic.classical_limit(setup), analytic.quantum_limit(system, setup)


def scan_row(system, setup, numerics=None, keep_result=False):
    lin, cl, ql = reference_columns(system, setup)
    try:
        res = sweep(system, setup, numerics)
    except (QMonitorError, FloatingPointError) as exc:
        return ScanRow(
            delta_a=setup.delta_a, analytic_linear=lin, classical_limit=cl, quantum_limit=ql,
            status="failed", message=f"{type(exc).__name__}: {exc}",
        )
    return ScanRow(
        delta_a=setup.delta_a,
        width_equivalent=res.width_equivalent,
        width_gauss_fit=res.width_gauss_fit,
        analytic_linear=lin,
        classical_limit=cl,
        quantum_limit=ql,
        leak_max=res.diagnostics["leak_max"],
        tail_ratio=res.diagnostics["tail_ratio"],
        diagnostics=res.diagnostics,
        result=res if keep_result else None,
    )


def _scan_task(args):
    return scan_row(*args)


def scan_delta_a(delta_as, system, tau, mode_index, numerics=None, parallel=1, keep_results=False):
    """One independent row per delta_a, returned in input order whatever the parallelism."""
    values = [float(d) for d in delta_as]
    if any(not d > 0 for d in values):
        raise ValidationError("delta_a values must be positive")
    if values != sorted(values):
        raise ValidationError("delta_a values must be sorted ascending")
    numerics = numerics or Numerics()
    tasks = [
        (system, MeasurementSetup(tau, d, mode_index), numerics, keep_results) for d in values
    ]
    if parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_scan_task, tasks))
    return [_scan_task(t) for t in tasks]

