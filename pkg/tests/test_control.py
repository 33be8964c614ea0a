"""Tests for the feedback law and the sampled closed loop."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dqdsim.coefficients import ConstantRates
from dqdsim.control import (ControlLaw, closed_loop, control_signal, sgn)
from dqdsim.dynamics import IntegratorConfig, propagate_populations
from dqdsim.model import DqdParams, EnvParams, diagonalize

LAW = ControlLaw(i_target=0.1, eta1=1.0, eta2=2.0, k=5e4, sample_dt=0.01)


def test_sgn_three_valued_table():
    assert sgn(0.0) == 0
    assert sgn(3.2) == 1
    assert sgn(-1e-300) == -1
    assert sgn(1e-300) == 1
    assert sgn(-7.0) == -1


def test_law_parameter_invariants():
    with pytest.raises(ValueError):
        ControlLaw(0.1, -1.0, 1.0, 5e4, 0.01)
    with pytest.raises(ValueError):
        ControlLaw(0.1, 1.0, 1.0, 0.0, 0.01)
    with pytest.raises(ValueError):
        ControlLaw(0.1, 1.0, 1.0, 5e4, 0.0)


def test_zero_error_gives_zero_actuation():
    s = control_signal(LAW, LAW.i_target)
    assert s.u1 == 0.0 and s.u2 == 0.0


def test_saturation_toward_amplitude():
    s = control_signal(LAW, 1e12)           # current far above target
    assert s.u1 == pytest.approx(-LAW.eta1, rel=1e-9)
    assert s.u2 == pytest.approx(-LAW.eta2, rel=1e-9)
    s = control_signal(LAW, -1e12)
    assert s.u1 == pytest.approx(LAW.eta1, rel=1e-9)


def test_quoted_operating_point():
    law = ControlLaw(i_target=0.1, eta1=1.0, eta2=1.0, k=5e4, sample_dt=0.01)
    s = control_signal(law, 0.09)
    assert s.u1 == pytest.approx(math.exp(-0.002), rel=1e-12)
    assert s.u1 == pytest.approx(0.998, abs=1e-3)


finite_error = st.floats(min_value=-1e6, max_value=1e6,
                         allow_nan=False, allow_infinity=False)


@given(finite_error)
def test_actuation_strictly_inside_amplitude(i_measured):
    s = control_signal(LAW, i_measured)
    assert abs(s.u1) < LAW.eta1 or s.u1 == 0.0
    assert abs(s.u2) < LAW.eta2 or s.u2 == 0.0


@given(finite_error)
def test_actuation_never_pushes_away(i_measured):
    s = control_signal(LAW, i_measured)
    err = LAW.i_target - i_measured
    assert s.u1 * sgn(err) >= 0.0
    assert s.u2 * sgn(err) >= 0.0


def test_actuation_monotone_in_error_magnitude():
    errs = np.linspace(1e-9, 10.0, 20000)
    mags = np.array([control_signal(LAW, LAW.i_target - e).u1 for e in errs])
    assert np.all(np.diff(mags) >= 0.0)


@given(st.floats(min_value=1e-4, max_value=1.0),
       st.floats(min_value=1e-3, max_value=10.0),
       st.floats(min_value=1e-3, max_value=5.0),
       st.floats(min_value=1.0, max_value=1e6),
       st.floats(min_value=1e-6, max_value=1.0))
def test_no_overshoot_on_linearized_plant(dt, sens, amp, k, err0):
    # frozen linear plant: one controller application cannot flip the error
    # sign while dt * sensitivity * amplitude < |error|
    if dt * sens * amp >= err0:
        return
    law = ControlLaw(i_target=0.0, eta1=amp, eta2=amp, k=k, sample_dt=dt)
    u = control_signal(law, -err0).u1
    err1 = err0 - dt * sens * u
    assert sgn(err1) == sgn(err0)


def _plant():
    params = DqdParams(3.0, 2.0)
    env = EnvParams(chi1=0.0, chi2=0.5, ev_qpc=4.5, band_cutoff=50.0)
    return params, env


def test_zero_amplitude_is_open_loop():
    params, env = _plant()
    law = ControlLaw(i_target=0.1, eta1=0.0, eta2=0.0, k=5e4, sample_dt=0.01)
    traj = closed_loop(params, env, law, 20.0, IntegratorConfig(),
                       gamma1=0.5, gamma4=0.5)
    assert np.all(traj.u1 == 0.0) and np.all(traj.u2 == 0.0)
    assert np.all(traj.eps_eff == params.epsilon)
    basis = diagonalize(params)
    src = ConstantRates(_markov_rates(basis, env))
    ts, pops = propagate_populations((0.0, 1.0, 0.0), 20.0,
                                     IntegratorConfig(), src, basis, env,
                                     n_out=2001)
    a2, b2 = basis.alpha ** 2, basis.beta ** 2
    open_current = 0.5 * (b2 * pops[:, 1] + a2 * pops[:, 2])
    got = np.interp(ts, traj.times, traj.current)
    assert np.max(np.abs(got[5:] - open_current[5:])) < 1e-6


def _markov_rates(basis, env):
    from dqdsim.coefficients import RateSet, calibrated_deltas
    return RateSet(0.5, 0.0, 0.0, 0.5, *calibrated_deltas(basis, env, 1e-3),
                   t=math.inf)


def test_freeze_rates_disables_actuation_path():
    params, env = _plant()
    law = ControlLaw(i_target=0.2, eta1=2.0, eta2=2.0, k=5e4, sample_dt=0.01)
    frozen = closed_loop(params, env, law, 10.0, IntegratorConfig(),
                         gamma1=0.5, gamma4=0.5, freeze_rates=True)
    open_loop = closed_loop(params, env,
                            ControlLaw(0.2, 0.0, 0.0, 5e4, 0.01), 10.0,
                            IntegratorConfig(), gamma1=0.5, gamma4=0.5)
    assert np.max(np.abs(frozen.current - open_loop.current)) < 1e-12


def test_measurement_noise_seeded_reproducibility():
    params, env = _plant()
    law = ControlLaw(i_target=0.1, eta1=1.0, eta2=1.0, k=5e4, sample_dt=0.05)
    kw = dict(gamma1=0.5, gamma4=0.5, noise_sigma=1e-3)
    a = closed_loop(params, env, law, 10.0, IntegratorConfig(),
                    noise_seed=11, **kw)
    b = closed_loop(params, env, law, 10.0, IntegratorConfig(),
                    noise_seed=11, **kw)
    c = closed_loop(params, env, law, 10.0, IntegratorConfig(),
                    noise_seed=12, **kw)
    assert np.array_equal(a.current, b.current)
    assert not np.array_equal(a.u1, c.u1)


def test_actuation_bound_holds_in_closed_loop():
    params, env = _plant()
    law = ControlLaw(i_target=0.1, eta1=1.0, eta2=2.0, k=5e4, sample_dt=0.01)
    traj = closed_loop(params, env, law, 15.0, IntegratorConfig(),
                       gamma1=0.5, gamma4=0.5)
    assert np.max(np.abs(traj.u1)) < law.eta1
    assert np.max(np.abs(traj.u2)) < law.eta2


def test_horizon_must_cover_samples():
    params, env = _plant()
    with pytest.raises(ValueError):
        closed_loop(params, env, LAW, 0.05, IntegratorConfig(),
                    gamma1=0.5, gamma4=0.5)


def test_degenerate_actuation_raises():
    from dqdsim.model import DegenerateHamiltonianError

    # u2 saturates to exactly -Ω once k|error| is large enough that the
    # exponential factor rounds to 1, zeroing both Hamiltonian parameters
    _, env = _plant()
    params = DqdParams(0.0, 1.0)
    law = ControlLaw(i_target=0.0, eta1=0.0, eta2=1.0, k=1e19, sample_dt=0.01)
    with pytest.raises(DegenerateHamiltonianError):
        closed_loop(params, env, law, 5.0, IntegratorConfig(),
                    gamma1=0.5, gamma4=0.5)
