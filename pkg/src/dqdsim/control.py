"""Sign-exponential feedback law and the sampled closed-loop simulation that
steers the tunnelling current to a target value."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .coefficients import calibrated_deltas
from .model import (DegenerateHamiltonianError, DqdParams, EnvParams,
                    diagonalize, eta)
from .dynamics import VARIANT_LINDBLAD, VARIANTS, IntegratorConfig


@dataclass(frozen=True)
class ControlLaw:
    """Feedback-law parameters: target current, the two actuation amplitudes
    (applied to ε and Ω respectively), the adaptive factor k, and the
    controller sampling interval."""

    i_target: float
    eta1: float
    eta2: float
    k: float
    sample_dt: float

    def __post_init__(self):
        if self.eta1 < 0 or self.eta2 < 0:
            raise ValueError("control amplitudes must be >= 0")
        if self.k <= 0:
            raise ValueError("adaptive factor k must be > 0")
        if self.sample_dt <= 0:
            raise ValueError("sample_dt must be > 0")


@dataclass(frozen=True)
class ControlSignal:
    u1: float
    u2: float


def sgn(x: float) -> int:
    """Exact three-valued sign function."""
    if x > 0:
        return 1
    if x < 0:
        return -1
    return 0


def control_signal(law: ControlLaw, i_measured: float) -> ControlSignal:
    """u_i = sgn(I₀ - I)·η_i·exp(-1/(k|I₀ - I|)).

    At exactly zero error the exponential's argument diverges; the limit
    value u_i = 0 is returned.  |u_i| < η_i strictly for any finite error.
    """
    err = law.i_target - i_measured
    s = sgn(err)
    if s == 0:
        return ControlSignal(0.0, 0.0)
    amp = math.exp(-1.0 / (law.k * abs(err)))
    return ControlSignal(s * law.eta1 * amp, s * law.eta2 * amp)


def _delta12_calibration(env: EnvParams, delta4_scale: float):
    """Calibrated (Δ̃₁, Δ̃₂) as a fast function of the actuated splitting.

    Same Markovian ratios as calibrated_deltas, specialized to the two flip
    coefficients the population plant uses; evaluated every controller sample.
    """
    ev, w = env.ev_qpc, env.band_cutoff

    def rho2(v):
        v = abs(v)
        return max(0.0, w - abs(v - w)) if v < 2.0 * w else 0.0

    denom = 8.0 * rho2(ev)
    if denom == 0.0:
        return lambda w0: (0.0, 0.0)
    scale = delta4_scale / denom

    def deltas(w0: float):
        r_minus = rho2(w0 - ev)
        r_plus = rho2(w0 + ev)
        d1 = scale * (r_minus + r_plus)
        d2 = scale * (math.copysign(1.0, w0 - ev) * r_minus + r_plus)
        return d1, d2

    return deltas


@dataclass
class ClosedLoopTrajectory:
    times: np.ndarray
    current: np.ndarray
    error: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    eps_eff: np.ndarray
    omega_eff: np.ndarray
    omega0_nominal: float


def closed_loop(params: DqdParams, env: EnvParams, law: ControlLaw,
                horizon: float, cfg: IntegratorConfig, *,
                gamma1: float, gamma4: float, delta4_scale: float = 1e-3,
                variant: str = VARIANT_LINDBLAD, freeze_rates: bool = False,
                noise_sigma: float = 0.0, noise_seed: int | None = None,
                substeps: int = 1) -> ClosedLoopTrajectory:
    """Sampled-data feedback loop on the population-level plant.

    Every sample_dt the ensemble-exact current is read from the running
    propagation, the control signal is computed, the Hamiltonian parameters
    are actuated to (ε + u₁, Ω + u₂), the eigenbasis is re-diagonalized and
    the backaction rates are refreshed from their Markovian values at the
    actuated splitting (quasi-static approximation).  Γ₁/Γ₄ are dimensionless
    preset rates; their zero-temperature Markovian values do not depend on
    the actuated splitting, so they stay fixed.  With freeze_rates=True the
    nominal basis and rates are kept regardless of actuation, which on this
    populations-only plant disables the actuation path entirely.

    Plant populations start in the ground state, matching the counting-chain
    preset.  Optional Gaussian measurement noise (off by default) perturbs
    only the measured current fed to the law, never the plant.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if horizon < 10.0 * law.sample_dt:
        raise ValueError("horizon must cover at least 10 controller samples")
    rng = np.random.default_rng(noise_seed) if noise_sigma > 0.0 else None

    n_samples = int(math.ceil(horizon / law.sample_dt))
    times = np.empty(n_samples)
    cur = np.empty(n_samples)
    err = np.empty(n_samples)
    u1s = np.empty(n_samples)
    u2s = np.empty(n_samples)
    eps_s = np.empty(n_samples)
    om_s = np.empty(n_samples)

    nominal = diagonalize(params)
    et_nom = eta(nominal, env)
    d_nom = calibrated_deltas(nominal, env, delta4_scale)
    delta12 = _delta12_calibration(env, delta4_scale)

    p0, pg, pe = 0.0, 1.0, 0.0
    u1 = u2 = 0.0
    t = 0.0
    chi2 = env.chi_d ** 2
    lind = 1.0 if variant == VARIANT_LINDBLAD else -1.0
    h = law.sample_dt / substeps
    eps0, om0 = params.epsilon, params.omega
    i0, kf, e1a, e2a = law.i_target, law.k, law.eta1, law.eta2
    exp, hypot = math.exp, math.hypot

    # the population flip channels of the two variants differ only in the
    # diagonal signs: lindblad drains gg at rp and feeds it at rm, as-written
    # swaps the diagonal couplings
    for i in range(n_samples):
        eps_eff = eps0 + u1
        om_eff = om0 + u2
        if freeze_rates:
            a2 = nominal.alpha ** 2
            et, d1, d2 = et_nom, d_nom[0], d_nom[1]
        else:
            w0 = hypot(eps_eff, 2.0 * om_eff)
            if w0 == 0.0:
                raise DegenerateHamiltonianError(
                    f"actuation drove (eps, omega) to (0, 0) at t={t:g}")
            a2 = 0.5 * (1.0 + eps_eff / w0)
            et = a2 * (1.0 - a2) * chi2
            d1, d2 = delta12(w0)
        b2 = 1.0 - a2
        rp = et * (d1 + d2)
        rm = et * (d1 - d2)
        g1a2, g1b2 = gamma1 * a2, gamma1 * b2
        g4a2, g4b2 = gamma4 * a2, gamma4 * b2

        if lind > 0:
            cgg, cge, ceg, cee = -rp, rm, rp, -rm
        else:
            cgg, cge, ceg, cee = rm, -rp, -rm, rp
        for _ in range(substeps):
            k10 = -gamma1 * p0 + g4b2 * pg + g4a2 * pe
            k11 = cgg * pg + cge * pe + g1a2 * p0 - g4b2 * pg
            k12 = ceg * pg + cee * pe + g1b2 * p0 - g4a2 * pe
            q0 = p0 + 0.5 * h * k10
            qg = pg + 0.5 * h * k11
            qe = pe + 0.5 * h * k12
            k20 = -gamma1 * q0 + g4b2 * qg + g4a2 * qe
            k21 = cgg * qg + cge * qe + g1a2 * q0 - g4b2 * qg
            k22 = ceg * qg + cee * qe + g1b2 * q0 - g4a2 * qe
            q0 = p0 + 0.5 * h * k20
            qg = pg + 0.5 * h * k21
            qe = pe + 0.5 * h * k22
            k30 = -gamma1 * q0 + g4b2 * qg + g4a2 * qe
            k31 = cgg * qg + cge * qe + g1a2 * q0 - g4b2 * qg
            k32 = ceg * qg + cee * qe + g1b2 * q0 - g4a2 * qe
            q0 = p0 + h * k30
            qg = pg + h * k31
            qe = pe + h * k32
            k40 = -gamma1 * q0 + g4b2 * qg + g4a2 * qe
            k41 = cgg * qg + cge * qe + g1a2 * q0 - g4b2 * qg
            k42 = ceg * qg + cee * qe + g1b2 * q0 - g4a2 * qe
            p0 += (h / 6.0) * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
            pg += (h / 6.0) * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
            pe += (h / 6.0) * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
        t += law.sample_dt

        i_true = g4b2 * pg + g4a2 * pe
        i_meas = i_true
        if rng is not None:
            i_meas += noise_sigma * rng.standard_normal()
        e = i0 - i_meas
        if e > 0.0:
            amp = exp(-1.0 / (kf * e))
            u1, u2 = e1a * amp, e2a * amp
        elif e < 0.0:
            amp = exp(1.0 / (kf * e))
            u1, u2 = -e1a * amp, -e2a * amp
        else:
            u1 = u2 = 0.0
        times[i] = t
        cur[i] = i_true
        err[i] = i0 - i_true
        u1s[i] = u1
        u2s[i] = u2
        eps_s[i] = eps_eff
        om_s[i] = om_eff

    return ClosedLoopTrajectory(times=times, current=cur, error=err,
                                u1=u1s, u2=u2s, eps_eff=eps_s, omega_eff=om_s,
                                omega0_nominal=nominal.omega0)


def write_closed_loop_csv(path, traj: ClosedLoopTrajectory,
                          metadata: dict | None = None, stride: int = 1):
    """Closed-loop CSV:
    (t, omega0_t, current, error, u1, u2, eps_eff, omega_eff).

    omega0_t uses the nominal (un-actuated) splitting.  A stride > 1 thins
    the emitted rows; the final sample is always included.
    """
    idx = list(range(0, len(traj.times), max(1, stride)))
    if idx[-1] != len(traj.times) - 1:
        idx.append(len(traj.times) - 1)
    with open(path, "w", newline="") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={val}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "omega0_t", "current", "error", "u1", "u2",
                         "eps_eff", "omega_eff"])
        for i in idx:
            writer.writerow([f"{x:.12g}" for x in
                             (traj.times[i], traj.omega0_nominal * traj.times[i],
                              traj.current[i], traj.error[i], traj.u1[i],
                              traj.u2[i], traj.eps_eff[i], traj.omega_eff[i])])
