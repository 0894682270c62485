"""Slow reference propagators used to certify the evolver.

``expm_evolve`` exponentiates the dense discretised Hamiltonian, and
``path_sum_kernel`` sums the restricted path integral over every lattice path.
Neither is meant for production sizes.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.linalg
from scipy.fft import dst

from .errors import SizeGuard
from .model import WaveFunction, effective_potential

MAX_DENSE_POINTS = 256
MAX_PATH_SLICES = 4
MAX_PATH_POINTS = 21


def kinetic_matrix(grid, system, kinetic="fd3"):
    """Kinetic operator on the interior points under Dirichlet walls."""
    n = grid.num_points - 2
    kin = system.hbar**2 / (2 * system.mass * grid.dx**2)
    if kinetic == "fd3":
        return (
            np.diag(np.full(n, 2 * kin))
            + np.diag(np.full(n - 1, -kin), 1)
            + np.diag(np.full(n - 1, -kin), -1)
        ).astype(complex)
    k = np.arange(1, n + 1)
    energies = system.hbar**2 * (math.pi * k / ((n + 1) * grid.dx)) ** 2 / (2 * system.mass)
    basis = dst(np.eye(n), type=1, axis=0, norm="ortho")
    return (basis * energies) @ basis.T + 0j


def dense_hamiltonian(grid, t, system, setup, readout, kinetic="fd3"):
    x = grid.x[1:-1]
    h = kinetic_matrix(grid, system, kinetic)
    h[np.diag_indices_from(h)] += effective_potential(x, t, system, setup, readout)
    return h


def expm_evolve(phi1, system, setup, readout, num_steps, kinetic="fd3"):
    """psi <- exp(-i H(t_mid) dt / hbar) psi, step by step, with dense matrices."""
    grid = phi1.grid
    if grid.num_points > MAX_DENSE_POINTS:
        raise SizeGuard(f"{grid.num_points} points exceeds the dense limit {MAX_DENSE_POINTS}")
    dt = setup.tau / num_steps
    u = phi1.values[1:-1].copy()
    log_scale = phi1.log_scale
    for k in range(num_steps):
        h = dense_hamiltonian(grid, (k + 0.5) * dt, system, setup, readout, kinetic)
        u = scipy.linalg.expm(-1j * dt / system.hbar * h) @ u
        s = np.linalg.norm(u)
        if s > 0:
            u /= s
            log_scale += math.log(s)
    values = np.zeros(grid.num_points, dtype=complex)
    values[1:-1] = u
    return WaveFunction(grid, values, log_scale)


def _check_lattice(grid, num_slices):
    if not 1 <= num_slices <= MAX_PATH_SLICES:
        raise SizeGuard(f"num_slices must lie in [1, {MAX_PATH_SLICES}], got {num_slices}")
    if grid.num_points > MAX_PATH_POINTS:
        raise SizeGuard(f"{grid.num_points} lattice points exceeds {MAX_PATH_POINTS}")


def slice_kernel(grid, s, num_slices, system, setup, readout):
    """Single-slice amplitude between every pair of lattice points for slice ``s``.

    Midpoint rule: action m dx^2 / 2dt - V(xbar) dt and measurement weight
    exp(-dt (xbar - a)^2 / (tau delta_a^2)), with the free-particle prefactor
    sqrt(m / 2 pi i hbar dt). Rows index the later point.
    """
    m, hbar = system.mass, system.hbar
    dt = setup.tau / num_slices
    x = grid.x
    x_new, x_old = np.meshgrid(x, x, indexing="ij")
    xbar = 0.5 * (x_new + x_old)
    t_mid = (s + 0.5) * dt
    action = m * (x_new - x_old) ** 2 / (2 * dt) - system.real_potential(xbar) * dt
    log_weight = -dt * setup.measurement_rate * (xbar - readout.value_at(t_mid)) ** 2
    prefactor = np.sqrt(m / (2j * math.pi * hbar * dt))
    return prefactor * np.exp(1j * action / hbar + log_weight)


def path_sum_kernel(i_start, i_end, grid, system, setup, readout, num_slices):
    """K(x_end, tau; x_start, 0) summed explicitly over every lattice path.

    Intermediate points range over the whole lattice (walls included), each
    integration carrying the measure dx.
    """
    _check_lattice(grid, num_slices)
    slices = [slice_kernel(grid, s, num_slices, system, setup, readout) for s in range(num_slices)]
    total = 0j
    dx = grid.dx
    for path in itertools.product(range(grid.num_points), repeat=num_slices - 1):
        nodes = (i_start, *path, i_end)
        amp = dx ** (num_slices - 1)
        for s in range(num_slices):
            amp = amp * slices[s][nodes[s + 1], nodes[s]]
        total += amp
    return complex(total)


def path_sum_column(i_start, grid, system, setup, readout, num_slices):
    return np.array(
        [path_sum_kernel(i_start, j, grid, system, setup, readout, num_slices) for j in range(grid.num_points)]
    )


def path_sum_propagate(phi1, system, setup, readout, num_slices):
    """Apply the path-sum kernel to a sampled initial state: sum_j K(x, x_j) phi(x_j) dx."""
    grid = phi1.grid
    _check_lattice(grid, num_slices)
    w = grid.trapezoid_weights()
    out = np.zeros(grid.num_points, dtype=complex)
    for j in range(grid.num_points):
        if phi1.values[j] != 0:
            out += path_sum_column(j, grid, system, setup, readout, num_slices) * phi1.values[j] * w[j]
    return out


def off_corridor_fraction(grid, system, setup, readout, num_slices, half_width):
    """Share of summed |path amplitude| carried by paths that leave the corridor.

    A path leaves the corridor when any slice midpoint lies farther than
    ``half_width`` from a(t) at that midpoint. Paths run over all lattice
    nodes at every time, endpoints included. Since |exp(iS/hbar)| = 1, the
    modulus of a path amplitude is its measurement weight, and the sums over
    all paths factor into products of per-slice weight matrices.
    """
    _check_lattice(grid, num_slices)
    x = grid.x
    dt = setup.tau / num_slices
    xbar = 0.5 * (x[:, None] + x[None, :])
    total = np.ones(grid.num_points)
    inside = np.ones(grid.num_points)
    for s in range(num_slices):
        gap = xbar - readout.value_at((s + 0.5) * dt)
        w = np.exp(-dt * setup.measurement_rate * gap**2)
        total = w @ total
        inside = (w * (np.abs(gap) <= half_width)) @ inside
    return 1.0 - inside.sum() / total.sum()
