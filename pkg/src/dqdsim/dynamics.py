"""Propagation of the three-level density matrix and the n-resolved
population chains, plus the tunnelling current.

Basis ordering everywhere: index 0 = |0⟩ (empty), 1 = |g⟩, 2 = |e⟩.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .coefficients import RateSet
from .model import DqdParams, EigenBasis, EnvParams, diagonalize, eta

_METHODS = ("rk4-fixed", "rk45-adaptive")

VARIANT_AS_WRITTEN = "as-written"
VARIANT_LINDBLAD = "lindblad-consistent"
VARIANTS = (VARIANT_AS_WRITTEN, VARIANT_LINDBLAD)


class StepFailureError(RuntimeError):
    """Adaptive step control could not meet the requested tolerance."""


class TruncationOverflowError(RuntimeError):
    """Counting-chain truncation kept overflowing after auto-regrowth."""


class PositivityWarning(UserWarning):
    """A propagated density matrix developed an eigenvalue below -1e-6."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    method: str = "rk45-adaptive"

    def __post_init__(self):
        for name, tol in (("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)):
            if not 0.0 < tol <= 1e-2:
                raise ValueError(f"{name} must be in (0, 1e-2]")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")


# ---------------------------------------------------------------------------
# operators and the master-equation right-hand side

def _jump_operators(basis: EigenBasis):
    a, b = basis.alpha, basis.beta
    l1 = np.zeros((3, 3), dtype=complex)   # injection from the left lead
    l1[1, 0], l1[2, 0] = a, b
    l2 = l1.conj().T.copy()                # reverse left-lead process
    l3 = np.zeros((3, 3), dtype=complex)   # injection from the right lead
    l3[2, 0], l3[1, 0] = a, b
    l4 = l3.conj().T.copy()                # drain into the right lead (counted)
    sp = np.zeros((3, 3), dtype=complex)
    sp[2, 1] = 1.0                         # σ₊ = |e⟩⟨g|
    sm = sp.conj().T.copy()
    return l1, l2, l3, l4, sp, sm


def _p3_diagonal(basis: EigenBasis, env: EnvParams) -> np.ndarray:
    a2 = basis.alpha ** 2
    d = env.d_amp
    return np.array([d,
                     d - env.chi2 - a2 * env.chi_d,
                     d - env.chi1 + a2 * env.chi_d])


def _dissipator(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    opd = op.conj().T
    anti = opd @ op
    return op @ rho @ opd - 0.5 * (anti @ rho + rho @ anti)


def lindblad_rhs(rho: np.ndarray, rates: RateSet, basis: EigenBasis,
                 env: EnvParams, h_control=(0.0, 0.0)) -> np.ndarray:
    """dρ/dt of the full master equation.

    The coherent part is the controlled DQD Hamiltonian (re-diagonalized when
    h_control = (u₁, u₂) is nonzero) plus the backaction shifts ηΔ₃ϱ_z and
    Δ₅P₃²; dissipation carries the Δ₄ dephasing channel, the ηΔ flip channels
    and the four lead channels.  Counting operators act as identity at this
    unresolved level.  The result is traceless and Hermitian.
    """
    u1, u2 = h_control
    if u1 != 0.0 or u2 != 0.0:
        basis = diagonalize(DqdParams(basis.epsilon + u1, basis.omega + u2))
    et = eta(basis, env)
    p3 = _p3_diagonal(basis, env)
    l1, l2, l3, l4, sp, sm = _jump_operators(basis)

    h_diag = np.array([0.0, -0.5 * basis.omega0, 0.5 * basis.omega0])
    h_diag = h_diag + et * rates.delta3 * np.array([0.0, -1.0, 1.0])
    h_diag = h_diag + rates.delta5 * p3 ** 2
    # commutator of a real diagonal H with rho
    drho = -1j * (h_diag[:, None] * rho - rho * h_diag[None, :])

    drho += rates.delta4 * (p3[:, None] * rho * p3[None, :]
                            - 0.5 * (p3[:, None] ** 2 + p3[None, :] ** 2) * rho)
    drho += et * (rates.delta1 + rates.delta2) * _dissipator(sp, rho)
    drho += et * (rates.delta1 - rates.delta2) * _dissipator(sm, rho)
    drho += rates.gamma1 * _dissipator(l1, rho)
    drho += rates.gamma2 * _dissipator(l2, rho)
    drho += rates.gamma3 * _dissipator(l3, rho)
    drho += rates.gamma4 * _dissipator(l4, rho)
    return drho


# Hermitian packing: diag(3), re upper(3), im upper(3) -> exact Hermiticity
def _pack(rho: np.ndarray) -> np.ndarray:
    return np.array([rho[0, 0].real, rho[1, 1].real, rho[2, 2].real,
                     rho[0, 1].real, rho[0, 2].real, rho[1, 2].real,
                     rho[0, 1].imag, rho[0, 2].imag, rho[1, 2].imag])


def _unpack(y: np.ndarray) -> np.ndarray:
    rho = np.empty((3, 3), dtype=complex)
    rho[0, 0], rho[1, 1], rho[2, 2] = y[0], y[1], y[2]
    rho[0, 1] = y[3] + 1j * y[6]
    rho[0, 2] = y[4] + 1j * y[7]
    rho[1, 2] = y[5] + 1j * y[8]
    rho[1, 0] = rho[0, 1].conjugate()
    rho[2, 0] = rho[0, 2].conjugate()
    rho[2, 1] = rho[1, 2].conjugate()
    return rho


def density_matrix_checks(rho: np.ndarray) -> tuple[float, float, float]:
    """(hermiticity defect, trace defect, min eigenvalue) of a 3×3 state."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = abs(float(rho.trace().real) - 1.0) + abs(float(rho.trace().imag))
    eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    return herm, tr, eig


@dataclass
class DensityTrajectory:
    times: np.ndarray
    rhos: np.ndarray                       # (n_t, 3, 3) complex
    positivity_events: list = field(default_factory=list)

    def populations(self) -> np.ndarray:
        return np.real(np.stack([self.rhos[:, 0, 0], self.rhos[:, 1, 1],
                                 self.rhos[:, 2, 2]], axis=1))


def _rk4_fixed(rhs, y0, t_eval, max_step):
    y = np.asarray(y0, dtype=float).copy()
    out = np.empty((len(t_eval), y.size))
    out[0] = y
    for i in range(len(t_eval) - 1):
        t0, t1 = t_eval[i], t_eval[i + 1]
        span = t1 - t0
        n_sub = max(1, int(math.ceil(span / max_step))) if math.isfinite(max_step) else 1
        h = span / n_sub
        t = t0
        for _ in range(n_sub):
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        out[i + 1] = y
    return out


def _integrate(rhs, y0, horizon, cfg: IntegratorConfig, n_out: int):
    t_eval = np.linspace(0.0, horizon, n_out)
    if cfg.method == "rk4-fixed":
        max_step = cfg.max_step if math.isfinite(cfg.max_step) else horizon / 2048.0
        return t_eval, _rk4_fixed(rhs, y0, t_eval, max_step)
    sol = solve_ivp(rhs, (0.0, horizon), np.asarray(y0, dtype=float),
                    method="RK45", rtol=cfg.rel_tol, atol=cfg.abs_tol,
                    max_step=cfg.max_step, t_eval=t_eval)
    if not sol.success:
        raise StepFailureError(sol.message)
    return t_eval, sol.y.T


def propagate(rho0: np.ndarray, horizon: float, cfg: IntegratorConfig,
              source, basis: EigenBasis, env: EnvParams, *,
              n_out: int = 201, h_control=(0.0, 0.0)) -> DensityTrajectory:
    """Propagate a 3×3 density matrix under the full master equation.

    `source` provides rates(t) -> RateSet.  The state is carried in a
    Hermitian real parametrization, so Hermiticity is exact by construction;
    positivity is monitored, not enforced: samples with min eigenvalue below
    -1e-6 raise a PositivityWarning and are recorded in the trajectory.
    """
    rho0 = np.asarray(rho0, dtype=complex)

    def rhs(t, y):
        return _pack(lindblad_rhs(_unpack(y), source.rates(t), basis, env,
                                  h_control))

    t_eval, ys = _integrate(rhs, _pack(rho0), horizon, cfg, n_out)
    rhos = np.empty((len(t_eval), 3, 3), dtype=complex)
    events = []
    for i, y in enumerate(ys):
        rhos[i] = _unpack(y)
        min_eig = float(np.linalg.eigvalsh(rhos[i]).min())
        if min_eig < -1e-6:
            events.append((float(t_eval[i]), min_eig))
    if events:
        warnings.warn(
            f"density matrix dipped to eigenvalue {min(e for _, e in events):.3e}",
            PositivityWarning, stacklevel=2)
    return DensityTrajectory(times=t_eval, rhos=rhos, positivity_events=events)


# ---------------------------------------------------------------------------
# n-resolved population chains

@dataclass
class NResolvedState:
    """Populations (ρ₀₀⁽ⁿ⁾, ρ_gg⁽ⁿ⁾, ρ_ee⁽ⁿ⁾) for n = 0..n_max."""

    pops: np.ndarray                       # (n_max + 1, 3)

    @classmethod
    def ground_state(cls, n_max: int) -> "NResolvedState":
        pops = np.zeros((n_max + 1, 3))
        pops[0, 1] = 1.0
        return cls(pops)

    @property
    def n_max(self) -> int:
        return self.pops.shape[0] - 1

    def total(self) -> float:
        return float(self.pops.sum())

    def top_bin_mass(self) -> float:
        return float(self.pops[-1].sum())

    def marginal(self) -> np.ndarray:
        """(ρ₀₀, ρ_gg, ρ_ee) summed over the counting index."""
        return self.pops.sum(axis=0)


@dataclass
class NResolvedTrajectory:
    times: np.ndarray
    pops: np.ndarray                       # (n_t, n_max + 1, 3)
    variant: str = VARIANT_LINDBLAD

    def state(self, i: int) -> NResolvedState:
        return NResolvedState(self.pops[i])

    def populations(self) -> np.ndarray:
        return self.pops.sum(axis=1)

    def distribution_matrix(self) -> np.ndarray:
        """P(n, t) as an (n_t, n_max + 1) array."""
        return self.pops.sum(axis=2)


def _chain_rhs_factory(n_levels: int, basis: EigenBasis, env: EnvParams,
                       source, variant: str):
    a2 = basis.alpha ** 2
    b2 = basis.beta ** 2
    et = eta(basis, env)

    def rhs(t, y):
        r = source.rates(t)
        rp = et * (r.delta1 + r.delta2)
        rm = et * (r.delta1 - r.delta2)
        g1, g4 = r.gamma1, r.gamma4
        p = y.reshape(n_levels, 3)
        p00, pg, pe = p[:, 0], p[:, 1], p[:, 2]
        d = np.empty_like(p)
        # feed into ρ₀₀⁽ⁿ⁾ from the n-1 bin; the chain is cut off below n = 0
        d[:, 0] = -g1 * p00
        d[1:, 0] += g4 * (b2 * pg[:-1] + a2 * pe[:-1])
        if variant == VARIANT_LINDBLAD:
            d[:, 1] = -rp * pg + rm * pe + g1 * a2 * p00 - g4 * b2 * pg
            d[:, 2] = rp * pg - rm * pe + g1 * b2 * p00 - g4 * a2 * pe
        else:
            d[:, 1] = rm * pg - rp * pe + g1 * a2 * p00 - g4 * b2 * pg
            d[:, 2] = rp * pe - rm * pg + g1 * b2 * p00 - g4 * a2 * pe
        return d.ravel()

    return rhs


def propagate_n_resolved(state0: NResolvedState, horizon: float,
                         cfg: IntegratorConfig, source, basis: EigenBasis,
                         env: EnvParams, *, variant: str = VARIANT_LINDBLAD,
                         n_out: int = 201, top_bin_tol: float = 1e-6,
                         max_regrow: int = 4) -> NResolvedTrajectory:
    """Integrate the three coupled population chains with counting index n.

    Variant `as-written` keeps the backaction signs of the printed n-resolved
    equations; `lindblad-consistent` (default) uses the population equations
    of the unresolved Lindblad generator, whose flip channels move g→e at
    η(Δ₁+Δ₂) and e→g at η(Δ₁−Δ₂).  If the top counting bin accumulates more
    than top_bin_tol the truncation is doubled and the run repeated, up to
    max_regrow times, after which TruncationOverflowError is raised.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    n_levels = state0.pops.shape[0]
    base = state0.pops

    for _ in range(max_regrow + 1):
        rhs = _chain_rhs_factory(n_levels, basis, env, source, variant)
        y0 = np.zeros((n_levels, 3))
        y0[:base.shape[0]] = base
        t_eval, ys = _integrate(rhs, y0.ravel(), horizon, cfg, n_out)
        pops = ys.reshape(len(t_eval), n_levels, 3)
        if pops[:, -1, :].sum(axis=1).max() <= top_bin_tol:
            return NResolvedTrajectory(times=t_eval, pops=pops, variant=variant)
        n_levels *= 2
    raise TruncationOverflowError(
        f"top-bin mass still above {top_bin_tol:g} at n_max={n_levels - 1}")


def propagate_populations(p0, horizon: float, cfg: IntegratorConfig, source,
                          basis: EigenBasis, env: EnvParams, *,
                          variant: str = VARIANT_LINDBLAD, n_out: int = 201):
    """Unresolved rate-equation propagation of (ρ₀₀, ρ_gg, ρ_ee).

    Same population equations as the counting chain but with the drain feeding
    straight back into ρ₀₀; marginalizing the n-resolved propagation over n
    must reproduce this trajectory.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    a2 = basis.alpha ** 2
    b2 = basis.beta ** 2
    et = eta(basis, env)
    lind = variant == VARIANT_LINDBLAD

    def rhs(t, y):
        r = source.rates(t)
        rp = et * (r.delta1 + r.delta2)
        rm = et * (r.delta1 - r.delta2)
        p00, pg, pe = y
        d0 = -r.gamma1 * p00 + r.gamma4 * (b2 * pg + a2 * pe)
        if lind:
            dg = -rp * pg + rm * pe + r.gamma1 * a2 * p00 - r.gamma4 * b2 * pg
            de = rp * pg - rm * pe + r.gamma1 * b2 * p00 - r.gamma4 * a2 * pe
        else:
            dg = rm * pg - rp * pe + r.gamma1 * a2 * p00 - r.gamma4 * b2 * pg
            de = rp * pe - rm * pg + r.gamma1 * b2 * p00 - r.gamma4 * a2 * pe
        return np.array([d0, dg, de])

    t_eval, ys = _integrate(rhs, np.asarray(p0, dtype=float), horizon, cfg,
                            n_out)
    return t_eval, ys


def current(state, basis: EigenBasis, rates: RateSet) -> float:
    """Tunnelling current e·Γ₄(β²ρ_gg + α²ρ_ee), with e = 1.

    `state` may be an NResolvedState, an (n, 3) population array, or a
    length-3 population vector (ρ₀₀, ρ_gg, ρ_ee).
    """
    if isinstance(state, NResolvedState):
        pops = state.marginal()
    else:
        arr = np.asarray(state, dtype=float)
        pops = arr.sum(axis=0) if arr.ndim == 2 else arr
    return rates.gamma4 * (basis.beta ** 2 * pops[1] + basis.alpha ** 2 * pops[2])


def stationary_current(basis: EigenBasis, env: EnvParams, rates: RateSet) -> float:
    """Closed-form stationary current I_s in the long-time limit.

    Evaluates e·Γ₁Γ₄(2β²χ_d²Δ₂ + Γ₄)/(I₁ + I₂) with the two displayed
    denominator groups; Δ₁, Δ₂ must be Markovian (t → ∞) values.  The
    Γ₁ = 0, Γ₄ = 0 and α·β = 0 limits all return 0 before any division.
    """
    g1, g4 = rates.gamma1, rates.gamma4
    a2 = basis.alpha ** 2
    b2 = basis.beta ** 2
    if g1 == 0.0 or g4 == 0.0 or a2 == 0.0 or b2 == 0.0:
        return 0.0
    chi2 = env.chi_d ** 2
    d1, d2 = rates.delta1, rates.delta2
    i1 = g1 * g4 * (a2 / b2 + b2 / a2) + g4 ** 2 - chi2 * g4 * d2 * (2.0 * a2 - 1.0)
    i2 = chi2 * (g4 * (d1 + 2.0 * d2) + 2.0 * g4 * d1)
    denom = i1 + i2
    if denom == 0.0:
        raise ZeroDivisionError("stationary current denominator I1 + I2 vanished")
    return g1 * g4 * (2.0 * b2 * chi2 * d2 + g4) / denom


# ---------------------------------------------------------------------------
# CSV export

def write_trajectory_csv(path, traj: DensityTrajectory, basis: EigenBasis,
                         source, metadata: dict | None = None):
    """Full-state trajectory CSV:
    (t, omega0_t, rho00, rho_gg, rho_ee, re_rho_ge, im_rho_ge, current)."""
    with open(path, "w", newline="") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={val}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "omega0_t", "rho00", "rho_gg", "rho_ee",
                         "re_rho_ge", "im_rho_ge", "current"])
        for t, rho in zip(traj.times, traj.rhos):
            pops = [rho[0, 0].real, rho[1, 1].real, rho[2, 2].real]
            cur = current(pops, basis, source.rates(t))
            writer.writerow([f"{x:.12g}" for x in
                             (t, basis.omega0 * t, *pops,
                              rho[1, 2].real, rho[1, 2].imag, cur)])


def write_nresolved_csv(path, traj: NResolvedTrajectory,
                        metadata: dict | None = None):
    """Counting-resolved snapshot CSV: (t, n, p00_n, pgg_n, pee_n)."""
    with open(path, "w", newline="") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={val}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "n", "p00_n", "pgg_n", "pee_n"])
        for i, t in enumerate(traj.times):
            for n in range(traj.pops.shape[1]):
                row = traj.pops[i, n]
                writer.writerow([f"{t:.12g}", n] + [f"{x:.12g}" for x in row])
