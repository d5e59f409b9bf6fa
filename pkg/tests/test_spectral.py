import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scalinglab.errors import DomainError, NumericalError
from scalinglab.spectral import Density, ModelSpec, SpectralMeasure, free_field, integrate_mass, log_periodic_gff


def test_free_field_constructors():
    m = free_field(4, 1)
    assert m.measure.atoms == ((1.0, 1.0),) and m.measure.density is None
    assert free_field(3, 0.5).measure.atoms == ((0.5, 1.0),)
    assert free_field(3, 0).measure.single_mass == 0.0


def test_massless_field_rejected_in_two_dimensions():
    with pytest.raises(DomainError, match="d = 2"):
        free_field(2, 0)
    with pytest.raises(DomainError):
        SpectralMeasure(2, density=Density(0.0, 1.0))
    assert free_field(2, 0.1).dim == 2


@pytest.mark.parametrize("kwargs", [
    {"m_lo": 1.0, "m_hi": 0.5},
    {"m_lo": -1.0, "m_hi": 1.0},
    {"m_lo": 0.0, "m_hi": 1.0, "eps": 1.0},
    {"m_lo": 0.0, "m_hi": 1.0, "tau": 1.0},
    {"m_lo": 0.0, "m_hi": 1.0, "rule": "simpson"},
    {"m_lo": 0.0, "m_hi": 1.0, "rule": "log-gl"},
    {"m_lo": 0.0, "m_hi": 1.0, "a": -0.6},
])
def test_density_domain(kwargs):
    with pytest.raises(DomainError):
        Density(**kwargs)


def test_measure_invariants():
    with pytest.raises(DomainError):
        SpectralMeasure(4)
    with pytest.raises(DomainError):
        SpectralMeasure(4, ((1.0, 0.0),))
    with pytest.raises(DomainError):
        SpectralMeasure(4, ((-1.0, 1.0),))
    with pytest.raises(DomainError):
        ModelSpec(3, SpectralMeasure(4, ((1.0, 1.0),)))


def test_log_periodic_reduces_to_power_law():
    lp = log_periodic_gff(4, 0.3, 0.5, 4.0, 1.0, (1e-2, 1e2))
    pure = Density(1e-2, 1e2, a=0.3)
    m = np.geomspace(1e-2, 1e2, 7)
    assert lp.measure.density(1.0) == pytest.approx(1.0)
    assert Density(1e-2, 1e2, a=0.3, eps=0.0, tau=4.0)(m) == pytest.approx(pure(m))
    with pytest.raises(DomainError):
        log_periodic_gff(4, 0.3, 0.0, 4.0, 1.0, (1e-2, 1e2))


def test_density_at_reference_mass():
    d = Density(1e-3, 1e3, a=0.7, eps=0.4, tau=3.0, m_ref=2.0)
    assert d(2.0) == pytest.approx(2.0**1.4, rel=1e-14)
    # log-periodic: rho(tau m) / (tau m)^{2a} = rho(m) / m^{2a}
    m = 0.37
    assert d(3 * m) / (3 * m) ** 1.4 == pytest.approx(d(m) / m**1.4, rel=1e-12)


def test_integrate_single_atom_exact():
    meas = SpectralMeasure(4, ((1.3, 2.0),))
    val, err = integrate_mass(meas, lambda m: np.cos(m))
    assert val == 2 * math.cos(1.3) and err == 0.0


def test_integrate_constant_density():
    meas = SpectralMeasure(4, density=Density(0.0, 1.0))
    val, err = integrate_mass(meas, lambda m: np.ones_like(m))
    assert abs(val - 1) <= 1e-12 and err <= 1e-12


def test_integrate_m_squared():
    meas = SpectralMeasure(4, density=Density(0.0, 1.0))
    val, _ = integrate_mass(meas, lambda m: m**2)
    assert abs(val - 1 / 3) <= 1e-10


def test_integrate_log_gl_rule():
    meas = SpectralMeasure(4, density=Density(1e-3, 1e3, nodes=128, rule="log-gl"))
    val, err = integrate_mass(meas, lambda m: 1 / (1 + m) ** 2)
    exact = 1 / (1 + 1e-3) - 1 / (1 + 1e3)
    assert abs(val - exact) <= max(err, 1e-12)


def test_integrate_nonfinite_kernel_reports_mass():
    meas = SpectralMeasure(4, ((0.0, 1.0), (2.0, 1.0)))
    with pytest.raises(NumericalError) as info:
        with np.errstate(divide="ignore"):
            integrate_mass(meas, lambda m: 1 / m)
    assert info.value.diagnostics["mass"] == 0.0


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 0.9), st.floats(-0.4, 1.0))
def test_integrate_linear(a, b, eps, alpha):
    meas = SpectralMeasure(3, ((0.5, 1.0),), Density(0.1, 5.0, a=alpha, eps=eps, tau=2.0, nodes=32))
    k1, k2 = (lambda m: np.exp(-m)), (lambda m: m / (1 + m))
    v1, _ = integrate_mass(meas, k1)
    v2, _ = integrate_mass(meas, k2)
    v, _ = integrate_mass(meas, lambda m: a * k1(m) + b * k2(m))
    assert abs(v - (a * v1 + b * v2)) <= 1e-12 * (1 + abs(v1) + abs(v2))


@given(st.floats(-0.4, 1.0), st.floats(0, 0.9))
def test_integrate_monotone(alpha, eps):
    meas = SpectralMeasure(3, density=Density(0.1, 5.0, a=alpha, eps=eps, tau=2.0, nodes=32))
    small, _ = integrate_mass(meas, lambda m: np.exp(-m))
    big, _ = integrate_mass(meas, lambda m: np.exp(-m) + 0.1 / (1 + m))
    assert big.real >= small.real >= 0


@pytest.mark.parametrize("density", [
    Density(0.0, 4.0, a=0.5, m_cut=2.0),
    Density(1e-3, 1e4, a=0.25, eps=0.5, tau=4.0, nodes=256, rule="log-gl"),
    Density(0.5, 3.0, a=-0.3, eps=0.2, tau=1.5),
])
def test_node_doubling_within_error(density):
    kernel = lambda m: np.exp(-m / 3) / (1 + m)  # noqa: E731
    meas = SpectralMeasure(4, density=density)
    val, err = integrate_mass(meas, kernel)
    fine = SpectralMeasure(4, density=Density(**(density.to_dict() | {"nodes": 2 * density.nodes})))
    ref, _ = integrate_mass(fine, kernel)
    assert abs(val - ref) <= max(err, 1e-13 * abs(ref))


def test_measure_round_trip():
    meas = SpectralMeasure(4, ((1.0, 0.5),), Density(0.1, 2.0, a=0.2, eps=0.3, tau=2.0))
    assert SpectralMeasure.from_dict(meas.to_dict()) == meas
