"""Closed-form results for the continuously monitored linear oscillator.

These are the reference values the numerical pipeline is checked against.
They are meaningful for beta = 0 only; the beta field of the system is
ignored here.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveVariance


@dataclass(frozen=True)
class ComplexFrequency:
    omega_r_squared: complex
    omega_r: complex


def renormalized_frequency(system, setup):
    w2 = complex(system.omega**2) - 2j * system.hbar * setup.measurement_rate / system.mass
    return ComplexFrequency(w2, cmath.sqrt(w2))


def _boundary_bracket(system, setup, freq):
    """1 - i (omega_r / omega) [cot(omega_r tau) + (-1)^n / sin(omega_r tau)].

    With u = exp(-i omega_r tau), which has |u| < 1 once the measurement is
    on, the trigonometric sum equals i (1 + s u) / (1 - s u), s = (-1)^n.
    The form never forms exp(+i omega_r tau), so it cannot overflow.
    """
    s = -1.0 if setup.mode_index % 2 else 1.0
    u = cmath.exp(-1j * freq.omega_r * setup.tau)
    return 1.0 + (freq.omega_r / system.omega) * (1.0 + s * u) / (1.0 - s * u)


def inverse_variance_linear(system, setup):
    """Delta_a_eff^{-2} for the sinusoidal readout of mode n."""
    if setup.delta_a == math.inf:
        return 0.0
    m, hbar, tau, da = system.mass, system.hbar, setup.tau, setup.delta_a
    om2 = setup.mode_frequency**2
    freq = renormalized_frequency(system, setup)
    detuning = om2 - freq.omega_r_squared
    # [1 - 2 i hbar / (m tau da^2 detuning)] regrouped as (Omega^2 - omega^2) / detuning;
    # the two forms are identical but this one does not cancel at small da.
    first = (om2 - system.omega**2) / (2 * da**2 * detuning)
    second = 4 * hbar * om2 / (m * system.omega * tau**2 * da**4 * detuning**2)
    second /= _boundary_bracket(system, setup, freq)
    return 2.0 * (first - second).real


def effective_width_linear(system, setup):
    inv = inverse_variance_linear(system, setup)
    if setup.delta_a == math.inf:
        return math.inf
    if not inv > 0:
        raise NonPositiveVariance(
            f"Delta_a_eff^-2 = {inv!r} for delta_a = {setup.delta_a!r}, n = {setup.mode_index}"
        )
    return inv**-0.5


def quantum_limit(system, setup):
    """Small-delta_a asymptote; keeps its delta_a dependence and diverges as delta_a -> 0."""
    m, hbar, tau, da = system.mass, system.hbar, setup.tau, setup.delta_a
    om2 = setup.mode_frequency**2
    inv = (m / hbar) ** 1.5 * math.sqrt(tau) * om2 * da + (m * tau / (2 * hbar)) ** 2 * (
        om2 - system.omega**2
    ) ** 2 * da**2
    return math.inf if inv == 0 else inv**-0.5


def classical_limit(setup):
    return setup.delta_a


def gaussian_profile_linear(epsilon, system, setup):
    w = effective_width_linear(system, setup)
    eps = np.asarray(epsilon, dtype=float)
    out = np.exp(-((eps / w) ** 2)) / (math.sqrt(math.pi) * w)
    return out if out.ndim else float(out)


def asymptote_crossing(system, setup):
    """Delta_a where the classical and quantum asymptotes meet (bisection in log space)."""
    lo, hi = 1e-12 * system.quantum_scale, 1e12 * system.quantum_scale

    def gap(log_da):
        da = math.exp(log_da)
        return math.log(quantum_limit(system, setup.with_delta_a(da))) - log_da

    a, b = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if gap(mid) > 0:
            a = mid
        else:
            b = mid
    return math.exp(0.5 * (a + b))
