import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmonitor.errors import GridTooNarrow, ValidationError
from qmonitor.model import (
    MeasurementSetup,
    PhysicalSystem,
    SpatialGrid,
    WaveFunction,
    default_grid,
    default_half_width,
    effective_potential,
    ground_state,
    make_readout,
)


def test_negative_mass_names_mass():
    with pytest.raises(ValidationError, match="mass"):
        PhysicalSystem(mass=-1.0)


def test_invalid_parameters_rejected():
    with pytest.raises(ValidationError):
        PhysicalSystem(omega=0.0)
    with pytest.raises(ValidationError):
        PhysicalSystem(beta=-0.1)
    with pytest.raises(ValidationError):
        PhysicalSystem(hbar=math.nan)


def test_beta_tilde_round_trip():
    s = PhysicalSystem.from_beta_tilde(0.3, mass=2.0, omega=0.5, hbar=1.5)
    assert s.beta == pytest.approx(0.3 * 4.0 * 0.125 / 1.5)
    assert s.beta_tilde == pytest.approx(0.3)


def test_quantum_scale():
    assert PhysicalSystem().quantum_scale == 1.0
    assert PhysicalSystem(mass=4.0, omega=1.0, hbar=1.0).quantum_scale == 0.5


def test_setup_validation():
    with pytest.raises(ValidationError):
        MeasurementSetup(math.pi, 1.0, 0)
    with pytest.raises(ValidationError):
        MeasurementSetup(math.pi, 1.0, True)
    with pytest.raises(ValidationError):
        MeasurementSetup(math.pi, 1.0, 1.5)
    with pytest.raises(ValidationError):
        MeasurementSetup(math.pi, -1.0)
    with pytest.raises(ValidationError):
        MeasurementSetup(0.0, 1.0)


def test_unmeasured_setup_has_zero_rate():
    s = MeasurementSetup(math.pi, math.inf)
    assert s.measurement_rate == 0.0
    assert MeasurementSetup(2.0, 0.5).measurement_rate == pytest.approx(1 / (2.0 * 0.25))


def test_readout_endpoints_and_peak():
    setup = MeasurementSetup(math.pi, 1.0, 3)
    r = make_readout(0.7, setup)
    assert r.value_at(0.0) == 0.0
    assert r.value_at(setup.tau) == 0.0
    assert r.value_at(setup.tau / 3) == 0.0
    assert r.value_at(setup.tau / 6) == pytest.approx(0.7)
    t = np.linspace(0, setup.tau, 7)
    assert np.allclose(r.acceleration_at(t), -9 * r.value_at(t))


def test_grid_validation():
    with pytest.raises(ValidationError):
        SpatialGrid(-1.0, 1.0, 10)
    with pytest.raises(ValidationError):
        SpatialGrid(0.5, 1.0, 11)
    with pytest.raises(ValidationError):
        SpatialGrid(-1.0, 3.0, 11)


def test_grid_is_mirror_symmetric():
    g = SpatialGrid.symmetric(7.3, 1001)
    x = g.x
    assert x[500] == 0.0
    assert np.array_equal(x, -x[::-1])


def test_with_spacing_is_no_coarser_than_requested():
    g = SpatialGrid.with_spacing(9.0, 0.037)
    assert g.dx <= 0.037
    assert g.num_points % 2 == 1
    assert g.refined(2).num_points == 2 * (g.num_points - 1) + 1


def test_ground_state_normalised_and_clamped():
    g = default_grid(PhysicalSystem())
    phi = ground_state(g, PhysicalSystem())
    assert phi.values[0] == 0 and phi.values[-1] == 0
    assert phi.norm_squared() == pytest.approx(1.0, abs=1e-12)


def test_ground_state_needs_wide_grid():
    with pytest.raises(GridTooNarrow):
        ground_state(SpatialGrid.symmetric(5.0, 201), PhysicalSystem())


def test_wavefunction_must_vanish_at_walls():
    g = SpatialGrid.symmetric(1.0, 5)
    with pytest.raises(ValidationError):
        WaveFunction(g, np.ones(5))
    psi = WaveFunction(g, np.array([0, 1, 2, 1, 0]), log_scale=-1000.0)
    assert psi.log_norm() == pytest.approx(-1000.0 + 0.5 * math.log(psi.mantissa_norm_squared()))
    assert psi.norm_squared() == 0.0


def test_effective_potential_imaginary_part():
    system = PhysicalSystem()
    setup = MeasurementSetup(2.0, 0.5)
    r = make_readout(1.0, setup)
    x = np.linspace(-3, 3, 13)
    t = 0.4
    v = effective_potential(x, t, system, setup, r)
    a = r.value_at(t)
    assert np.allclose(v.real, 0.5 * x**2)
    assert np.allclose(v.imag, -(x - a) ** 2 / (2.0 * 0.25))
    free = effective_potential(x, t, system, MeasurementSetup(2.0, math.inf), r)
    assert np.all(free.imag == 0)


def test_default_half_width():
    assert default_half_width(PhysicalSystem()) == 7.0
    assert default_half_width(PhysicalSystem(), 3.0) == 10.0
    assert default_half_width(PhysicalSystem(beta=1.0), 3.0) == 15.0


@settings(max_examples=50, deadline=None)
@given(
    x=st.floats(-10, 10),
    eps=st.floats(-5, 5),
    t=st.floats(0, 3),
    n=st.integers(1, 4),
    beta=st.floats(0, 2),
)
def test_potential_is_parity_symmetric(x, eps, t, n, beta):
    system = PhysicalSystem(beta=beta)
    setup = MeasurementSetup(3.0, 0.7, n)
    v1 = effective_potential(x, t, system, setup, make_readout(eps, setup))
    v2 = effective_potential(-x, t, system, setup, make_readout(-eps, setup))
    assert v1 == pytest.approx(v2, rel=1e-12, abs=1e-12)
