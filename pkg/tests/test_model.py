"""Tests for the Hamiltonian parameters and eigenbasis transformation."""

import math

import pytest
from hypothesis import given, strategies as st

from dqdsim.model import (DegenerateHamiltonianError, DqdParams, EigenBasis,
                          EnvParams, diagonalize, eta)

finite_energy = st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False)


def test_zero_coupling_point():
    b = diagonalize(DqdParams(1.0, 0.0))
    assert b.theta == 0.0
    assert b.alpha == 1.0
    assert b.beta == 0.0
    assert b.omega0 == 1.0


def test_symmetric_point():
    b = diagonalize(DqdParams(0.0, 1.0))
    assert b.theta == pytest.approx(math.pi / 2, abs=1e-15)
    assert b.alpha == pytest.approx(math.cos(math.pi / 4), abs=1e-15)
    assert b.beta == pytest.approx(math.sin(math.pi / 4), abs=1e-15)
    assert b.omega0 == pytest.approx(2.0, abs=1e-15)


def test_figure_operating_point_splitting():
    b = diagonalize(DqdParams(108.0, 32.0))
    assert b.omega0 == pytest.approx(math.sqrt(108.0 ** 2 + 4 * 32.0 ** 2),
                                     rel=1e-15)
    assert b.omega0 == pytest.approx(125.53883861180172, rel=1e-12)


def test_degenerate_input_raises():
    with pytest.raises(DegenerateHamiltonianError):
        diagonalize(DqdParams(0.0, 0.0))


def test_non_finite_params_rejected():
    with pytest.raises(ValueError):
        DqdParams(math.nan, 1.0)
    with pytest.raises(ValueError):
        DqdParams(1.0, math.inf)


@given(finite_energy, finite_energy)
def test_roundtrip_reconstruction(epsilon, omega):
    if epsilon == 0.0 and omega == 0.0:
        return
    b = diagonalize(DqdParams(epsilon, omega))
    scale = max(abs(epsilon), abs(omega), 1.0)
    assert b.epsilon == pytest.approx(epsilon, abs=1e-10 * scale)
    # the branch folds sign(Ω) into an eigenvector phase
    assert b.omega == pytest.approx(abs(omega), abs=1e-10 * scale)
    assert b.alpha ** 2 + b.beta ** 2 == pytest.approx(1.0, abs=1e-12)
    assert b.omega0 >= abs(epsilon) - 1e-12 * scale
    assert b.omega0 >= 2 * abs(omega) - 1e-12 * scale


@given(finite_energy, finite_energy)
def test_alpha_dominates_for_positive_detuning(epsilon, omega):
    if epsilon == 0.0 and omega == 0.0:
        return
    b = diagonalize(DqdParams(epsilon, omega))
    if epsilon > 0:
        assert b.alpha >= b.beta - 1e-12
    elif epsilon < 0:
        assert b.alpha <= b.beta + 1e-12


def _env(chi1=0.0, chi2=0.5, **kw):
    defaults = dict(chi1=chi1, chi2=chi2, ev_qpc=400.0, band_cutoff=2000.0)
    defaults.update(kw)
    return EnvParams(**defaults)


def test_env_invariants():
    env = _env()
    assert env.chi_d == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        _env(chi1=1.0, chi2=0.5)
    with pytest.raises(ValueError):
        _env(band_cutoff=0.0)
    with pytest.raises(ValueError):
        _env(kbt=-1.0)


def test_eta_no_mixing():
    basis = EigenBasis(theta=0.0, alpha=1.0, beta=0.0, omega0=1.0)
    assert eta(basis, _env(chi1=-3.0, chi2=4.0)) == 0.0


def test_eta_maximal_mixing():
    r = 1.0 / math.sqrt(2.0)
    basis = EigenBasis(theta=math.pi / 2, alpha=r, beta=r, omega0=1.0)
    assert eta(basis, _env(chi1=-1.0, chi2=1.0)) == pytest.approx(1.0, rel=1e-14)


def test_eta_at_figure_point():
    basis = diagonalize(DqdParams(108.0, 32.0))
    expected = basis.alpha ** 2 * basis.beta ** 2 * 0.25
    assert eta(basis, _env()) == pytest.approx(expected, rel=1e-14)


@given(st.floats(min_value=0.0, max_value=math.pi, exclude_max=True))
def test_eta_symmetric_under_amplitude_swap(theta):
    a, b = math.cos(theta / 2), math.sin(theta / 2)
    env = _env()
    basis = EigenBasis(theta=theta, alpha=a, beta=b, omega0=1.0)
    swapped = EigenBasis(theta=theta, alpha=b, beta=a, omega0=1.0)
    assert eta(basis, env) == pytest.approx(eta(swapped, env), rel=1e-12,
                                            abs=1e-15)
