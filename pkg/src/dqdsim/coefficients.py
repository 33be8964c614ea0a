"""Time-dependent master-equation coefficients.

Evaluates the QPC-induced decay coefficients Δ₁..Δ₅, the lead tunnelling
rates Γ₁..Γ₄, the Fermi weight functions, and the eight lead correlation
integrals whose combinations reduce to Γ₁..Γ₄.

The reservoir mode sums are taken to the continuum with flat densities of
states: the QPC source/drain pair contributes a factor g² = env.dos_product
over the square (ω_m, ω_n) ∈ [-W, W]², and each lead contributes
env.lead_coupling_{l,r} over the band [μ - W, μ + W].  Time integrals are
done in closed form, leaving frequency integrals that are evaluated either
by configurable quadrature (the general path, works at any temperature) or,
at zero temperature, by exact piecewise Si/Ci antiderivatives
(`*_exact`, used for rate tables and as an independent cross-check).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import sici

from .model import EigenBasis, EnvParams

EULER_GAMMA = 0.5772156649015328606

_SCHEMES = ("trapezoid", "gauss-legendre")


class QuadratureError(RuntimeError):
    """Estimated quadrature discretization error exceeded the configured tolerance."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Frequency-quadrature controls.

    n_nodes is the total node budget per 1-D integral (and per dimension for
    the 2-D paths).  band_cutoff overrides env.band_cutoff when set.
    check_tol, when set, triggers a half-node error estimate and raises
    QuadratureError if the relative change exceeds it.
    """

    n_nodes: int = 256
    scheme: str = "gauss-legendre"
    band_cutoff: float | None = None
    check_tol: float | None = None

    def __post_init__(self):
        if self.n_nodes < 16:
            raise ValueError("n_nodes must be >= 16")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}")
        if self.band_cutoff is not None and self.band_cutoff <= 0:
            raise ValueError("band_cutoff must be > 0")

    def cutoff(self, env: EnvParams) -> float:
        return self.band_cutoff if self.band_cutoff is not None else env.band_cutoff


@dataclass(frozen=True)
class RateSet:
    """The nine master-equation coefficients evaluated at time t (μeV units).

    gamma1/gamma2 are the left-lead injection/extraction rates, gamma3/gamma4
    the right-lead ones; delta1..delta5 are the QPC backaction coefficients
    (delta1±delta2 flip, delta3/delta5 shift, delta4 dephasing channels).
    """

    gamma1: float
    gamma2: float
    gamma3: float
    gamma4: float
    delta1: float
    delta2: float
    delta3: float
    delta4: float
    delta5: float
    t: float = 0.0

    def deltas(self) -> tuple[float, float, float, float, float]:
        return (self.delta1, self.delta2, self.delta3, self.delta4, self.delta5)

    def gammas(self) -> tuple[float, float, float, float]:
        return (self.gamma1, self.gamma2, self.gamma3, self.gamma4)


def fermi_lambda(omega_m, omega_n, kbt: float):
    """Fermi weight pair (Λ₁, Λ₂) of the QPC correlation functions.

    For kbt > 0 these are 1 - tanh(ω_m/2kT)·tanh(ω_n/2kT) and
    tanh(ω_m/2kT) - tanh(ω_n/2kT); at kbt = 0 they reduce to the Heaviside
    forms 2|Θ(ω_m) - Θ(ω_n)| and 2[Θ(ω_m) - Θ(ω_n)].
    """
    if kbt < 0:
        raise ValueError("kbt must be >= 0")
    omega_m = np.asarray(omega_m, dtype=float)
    omega_n = np.asarray(omega_n, dtype=float)
    if kbt == 0.0:
        tm = np.heaviside(omega_m, 0.5)
        tn = np.heaviside(omega_n, 0.5)
        lam1 = 2.0 * np.abs(tm - tn)
        lam2 = 2.0 * (tm - tn)
    else:
        tm = np.tanh(omega_m / (2.0 * kbt))
        tn = np.tanh(omega_n / (2.0 * kbt))
        lam1 = 1.0 - tm * tn
        lam2 = tm - tn
    if lam1.ndim == 0:
        return float(lam1), float(lam2)
    return lam1, lam2


def fermi_occupation(eps, mu: float, kbt: float):
    """Fermi-Dirac occupancy ⟨c†c⟩ = ½[1 - tanh((ε-μ)/2kT)]; step at kbt = 0."""
    eps = np.asarray(eps, dtype=float)
    if kbt == 0.0:
        occ = np.heaviside(mu - eps, 0.5)
    else:
        occ = 0.5 * (1.0 - np.tanh((eps - mu) / (2.0 * kbt)))
    return float(occ) if occ.ndim == 0 else occ


# ---------------------------------------------------------------------------
# time kernels (the s-integrals of the correlation expansion, closed form)

def _sin_over(x, t):
    """∫₀ᵗ cos(xs) ds = sin(xt)/x, continuous through x = 0."""
    return t * np.sinc(np.asarray(x) * t / np.pi)


def _one_minus_cos_over(x, t):
    """∫₀ᵗ sin(xs) ds = (1 - cos(xt))/x, continuous through x = 0."""
    z = np.asarray(x, dtype=float) * t
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    out = np.where(small, t * (z / 2.0) * (1.0 - z * z / 12.0),
                   t * (1.0 - np.cos(zs)) / zs)
    return out


def kernel_cos_cos(u, b, t):
    """∫₀ᵗ cos(us)cos(bs) ds."""
    return 0.5 * (_sin_over(np.asarray(u) - b, t) + _sin_over(np.asarray(u) + b, t))


def kernel_sin_sin(u, b, t):
    """∫₀ᵗ sin(us)sin(bs) ds."""
    return 0.5 * (_sin_over(np.asarray(u) - b, t) - _sin_over(np.asarray(u) + b, t))


def kernel_cos_sin(u, b, t):
    """∫₀ᵗ cos(us)sin(bs) ds."""
    return 0.5 * (_one_minus_cos_over(np.asarray(u) + b, t)
                  - _one_minus_cos_over(np.asarray(u) - b, t))


# ---------------------------------------------------------------------------
# quadrature nodes

@lru_cache(maxsize=64)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _nodes(a: float, b: float, n: int, scheme: str):
    """Nodes and weights for ∫_a^b on the requested scheme."""
    if n < 2:
        n = 2
    if scheme == "gauss-legendre":
        x, w = _leggauss(n)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return mid + half * x, half * w
    x = np.linspace(a, b, n)
    w = np.full(n, (b - a) / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


# triangular weight of the (ω_m - ω_n) change of variables on the flat square:
# pieces are (v_lo, v_hi, A, B) with density A + B·v
def _tri_pieces(w_cut: float):
    return (
        (-2.0 * w_cut, -w_cut, 2.0 * w_cut, 1.0),
        (-w_cut, 0.0, 0.0, -1.0),
        (0.0, w_cut, 0.0, 1.0),
        (w_cut, 2.0 * w_cut, 2.0 * w_cut, -1.0),
    )


def tri_density(v, w_cut: float):
    """Length of the {ω_m - ω_n = v} chord across the quadrant pair."""
    v = np.asarray(v, dtype=float)
    out = w_cut - np.abs(np.abs(v) - w_cut)
    return np.where(np.abs(v) < 2.0 * w_cut, np.maximum(out, 0.0), 0.0)


# ---------------------------------------------------------------------------
# Δ coefficients

def _delta_quadrature_t0(basis, env, quad, t, n_nodes):
    """Zero-temperature Δ's: domain collapsed to the two quadrants where the
    Fermi weights are nonzero, reduced to 1-D with the triangular density."""
    w_cut = quad.cutoff(env)
    ev = env.ev_qpc
    b = basis.omega0
    g2 = env.dos_product
    n_per = max(8, n_nodes // 4)

    acc = np.zeros(5)
    for (lo, hi, A, B) in _tri_pieces(w_cut):
        v, w = _nodes(lo, hi, n_per, quad.scheme)
        rho = (A + B * v) * w
        u = v + ev
        sgn2 = 1.0 if lo >= 0.0 else -1.0  # Λ₂ sign on this quadrant
        acc[0] += 2.0 * np.dot(rho, kernel_cos_cos(u, b, t))
        acc[1] += 2.0 * sgn2 * np.dot(rho, kernel_sin_sin(u, b, t))
        acc[2] += 2.0 * np.dot(rho, kernel_cos_sin(u, b, t))
        acc[3] += 8.0 * np.dot(rho, _sin_over(u, t))
        acc[4] += -4.0 * sgn2 * np.dot(rho, _one_minus_cos_over(u, t))
    return g2 * acc


def _delta_quadrature_finite_t(basis, env, quad, t, n_nodes):
    """Finite-temperature Δ's: full 2-D tensor quadrature with tanh weights."""
    w_cut = quad.cutoff(env)
    ev = env.ev_qpc
    b = basis.omega0
    g2 = env.dos_product
    xm, wm = _nodes(-w_cut, w_cut, n_nodes, quad.scheme)
    xn, wn = _nodes(-w_cut, w_cut, n_nodes, quad.scheme)
    lam1, lam2 = fermi_lambda(xm[:, None], xn[None, :], env.kbt)
    wgt = wm[:, None] * wn[None, :]
    u = xm[:, None] - xn[None, :] + ev
    d1 = np.sum(wgt * lam1 * kernel_cos_cos(u, b, t))
    d2 = np.sum(wgt * lam2 * kernel_sin_sin(u, b, t))
    d3 = np.sum(wgt * lam1 * kernel_cos_sin(u, b, t))
    d4 = 4.0 * np.sum(wgt * lam1 * _sin_over(u, t))
    d5 = -2.0 * np.sum(wgt * lam2 * _one_minus_cos_over(u, t))
    return g2 * np.array([d1, d2, d3, d4, d5])


def delta_coeffs(basis: EigenBasis, env: EnvParams, quad: QuadratureConfig,
                 t: float) -> tuple[float, float, float, float, float]:
    """QPC backaction coefficients (Δ₁, Δ₂, Δ₃, Δ₄, Δ₅) at time t.

    Raises QuadratureError when quad.check_tol is set and halving the node
    count moves any coefficient by more than check_tol relative to the
    coefficient scale.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    evaluate = (_delta_quadrature_t0 if env.kbt == 0.0
                else _delta_quadrature_finite_t)
    full = evaluate(basis, env, quad, t, quad.n_nodes)
    if quad.check_tol is not None:
        half = evaluate(basis, env, quad, t, quad.n_nodes // 2)
        scale = max(np.max(np.abs(full)), 1e-300)
        err = np.max(np.abs(full - half)) / scale
        if err > quad.check_tol:
            raise QuadratureError(
                f"delta quadrature error estimate {err:.3e} exceeds {quad.check_tol:.3e}"
            )
    return tuple(full)


def delta_coeffs_2d(basis: EigenBasis, env: EnvParams, quad: QuadratureConfig,
                    t: float) -> tuple[float, float, float, float, float]:
    """Δ's by direct 2-D tensor quadrature over the (ω_m, ω_n) square.

    At zero temperature only the two quadrants with nonzero Fermi weight are
    integrated; cross-checks the reduced 1-D production path.
    """
    if env.kbt > 0.0:
        return tuple(_delta_quadrature_finite_t(basis, env, quad, t, quad.n_nodes))
    w_cut = quad.cutoff(env)
    ev = env.ev_qpc
    b = basis.omega0
    g2 = env.dos_product
    n = quad.n_nodes
    acc = np.zeros(5)
    for (m_rng, n_rng, lam2) in (((0.0, w_cut), (-w_cut, 0.0), 2.0),
                                 ((-w_cut, 0.0), (0.0, w_cut), -2.0)):
        xm, wm = _nodes(*m_rng, n, quad.scheme)
        xn, wn = _nodes(*n_rng, n, quad.scheme)
        wgt = wm[:, None] * wn[None, :]
        u = xm[:, None] - xn[None, :] + ev
        acc[0] += 2.0 * np.sum(wgt * kernel_cos_cos(u, b, t))
        acc[1] += lam2 * np.sum(wgt * kernel_sin_sin(u, b, t))
        acc[2] += 2.0 * np.sum(wgt * kernel_cos_sin(u, b, t))
        acc[3] += 8.0 * np.sum(wgt * _sin_over(u, t))
        acc[4] += -2.0 * lam2 * np.sum(wgt * _one_minus_cos_over(u, t))
    return tuple(g2 * acc)


# exact piecewise antiderivatives, zero temperature only -------------------

def _cin(z):
    """Cin(z) = γ + ln z - Ci(z) for z > 0, extended evenly; Cin(0) = 0."""
    z = np.abs(np.asarray(z, dtype=float))
    small = z < 1e-8
    zs = np.where(small, 1.0, z)
    _, ci = sici(zs)
    out = EULER_GAMMA + np.log(zs) - ci
    return np.where(small, z * z / 4.0, out)


def _piece_sin(lo, hi, A, B, c, t):
    """∫ (A + Bv)·sin((v+c)t)/(v+c) dv over [lo, hi] (t may be an array)."""
    t = np.asarray(t, dtype=float)
    x1, x2 = lo + c, hi + c
    ap = A - B * c
    si2, _ = sici(x2 * t)
    si1, _ = sici(x1 * t)
    out = ap * (si2 - si1)
    ts = np.where(t == 0.0, 1.0, t)
    out = out + np.where(t == 0.0, 0.0, B * (np.cos(x1 * ts) - np.cos(x2 * ts)) / ts)
    return out


def _piece_cos(lo, hi, A, B, c, t):
    """∫ (A + Bv)·(1 - cos((v+c)t))/(v+c) dv over [lo, hi].

    The even function Cin(|x|t) is an antiderivative of the odd integrand
    (1-cos(xt))/x, and its symmetric cancellation across x = 0 realizes the
    principal value.
    """
    t = np.asarray(t, dtype=float)
    x1, x2 = lo + c, hi + c
    ap = A - B * c
    out = ap * (_cin(x2 * t) - _cin(x1 * t))
    ts = np.where(t == 0.0, 1.0, t)
    lin = (x2 - x1) - np.where(t == 0.0, x2 - x1, (np.sin(x2 * ts) - np.sin(x1 * ts)) / ts)
    return out + B * lin


def delta_coeffs_exact(basis: EigenBasis, env: EnvParams, t,
                       band_cutoff: float | None = None):
    """Machine-precision Δ's at zero temperature via Si/Cin antiderivatives.

    t may be a scalar or an array; returns an array of shape (5,) + t.shape.
    """
    if env.kbt != 0.0:
        raise ValueError("exact deltas are zero-temperature only")
    w_cut = band_cutoff if band_cutoff is not None else env.band_cutoff
    ev = env.ev_qpc
    b = basis.omega0
    g2 = env.dos_product
    t = np.asarray(t, dtype=float)
    d = np.zeros((5,) + t.shape)
    for (lo, hi, A, B) in _tri_pieces(w_cut):
        sgn2 = 1.0 if lo >= 0.0 else -1.0
        s_minus = _piece_sin(lo, hi, A, B, ev - b, t)
        s_plus = _piece_sin(lo, hi, A, B, ev + b, t)
        s_zero = _piece_sin(lo, hi, A, B, ev, t)
        c_minus = _piece_cos(lo, hi, A, B, ev - b, t)
        c_plus = _piece_cos(lo, hi, A, B, ev + b, t)
        c_zero = _piece_cos(lo, hi, A, B, ev, t)
        d[0] += s_minus + s_plus            # 2·K_cc summed with Λ₁ = 2
        d[1] += sgn2 * (s_minus - s_plus)   # Λ₂-weighted K_ss
        d[2] += c_plus - c_minus            # Λ₁-weighted K_cs
        d[3] += 8.0 * s_zero
        d[4] += -4.0 * sgn2 * c_zero
    return g2 * d


# ---------------------------------------------------------------------------
# Γ rates

_GAMMA_SIGNS = ((+1, "l"), (-1, "l"), (+1, "r"), (-1, "r"))  # (tanh sign flip, lead)


def _lead_params(env: EnvParams, lead: str):
    if lead == "l":
        return env.mu_l, env.lead_coupling_l
    return env.mu_r, env.lead_coupling_r


def gamma_rates(basis: EigenBasis, env: EnvParams, t: float,
                quad: QuadratureConfig | None = None
                ) -> tuple[float, float, float, float]:
    """Lead rates (Γ₁, Γ₂, Γ₃, Γ₄) at time t by band quadrature.

    Each rate is coupling·∫ dε w(ε)·sin((ε-ω₀)t)/(ε-ω₀) over [μ-W, μ+W],
    with w = 1 ∓ tanh((ε-μ)/2kT); the integrand is split at μ where the
    zero-temperature weight steps.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    quad = quad or QuadratureConfig()
    w_cut = quad.cutoff(env)
    b = basis.omega0

    def one(minus_branch: bool, lead: str, n_nodes: int) -> float:
        mu, coupling = _lead_params(env, lead)
        total = 0.0
        for (lo, hi) in ((mu - w_cut, mu), (mu, mu + w_cut)):
            x, w = _nodes(lo, hi, max(8, n_nodes // 2), quad.scheme)
            if env.kbt == 0.0:
                wt = 2.0 * np.heaviside(mu - x, 0.5) if minus_branch \
                    else 2.0 * np.heaviside(x - mu, 0.5)
            else:
                th = np.tanh((x - mu) / (2.0 * env.kbt))
                wt = (1.0 - th) if minus_branch else (1.0 + th)
            total += np.dot(w * wt, _sin_over(x - b, t))
        return coupling * total

    out = [one(sign > 0, lead, quad.n_nodes) for sign, lead in _GAMMA_SIGNS]
    if quad.check_tol is not None:
        half = [one(sign > 0, lead, quad.n_nodes // 2) for sign, lead in _GAMMA_SIGNS]
        scale = max(max(abs(v) for v in out), 1e-300)
        err = max(abs(a - h) for a, h in zip(out, half)) / scale
        if err > quad.check_tol:
            raise QuadratureError(
                f"gamma quadrature error estimate {err:.3e} exceeds {quad.check_tol:.3e}"
            )
    return tuple(out)


def gamma_rates_exact(basis: EigenBasis, env: EnvParams, t,
                      band_cutoff: float | None = None):
    """Zero-temperature Γ's via Si antiderivatives; t scalar or array."""
    if env.kbt != 0.0:
        raise ValueError("exact gammas are zero-temperature only")
    w_cut = band_cutoff if band_cutoff is not None else env.band_cutoff
    b = basis.omega0
    t = np.asarray(t, dtype=float)
    out = np.zeros((4,) + t.shape)
    for i, (sign, lead) in enumerate(_GAMMA_SIGNS):
        mu, coupling = _lead_params(env, lead)
        lo, hi = (mu - w_cut, mu) if sign > 0 else (mu, mu + w_cut)
        si_hi, _ = sici((hi - b) * t)
        si_lo, _ = sici((lo - b) * t)
        out[i] = 2.0 * coupling * (si_hi - si_lo)
    return out


# ---------------------------------------------------------------------------
# appendix-level correlation integrals

@dataclass(frozen=True)
class AppendixRates:
    """The eight complex lead correlation integrals Γ_{l/r,±}, Γ'_{l/r,±}."""

    gl_minus: complex
    gl_plus: complex
    glp_minus: complex
    glp_plus: complex
    gr_minus: complex
    gr_plus: complex
    grp_minus: complex
    grp_plus: complex

    def reductions(self) -> tuple[complex, complex, complex, complex]:
        """(Γ₁, Γ₂, Γ₃, Γ₄) as the sums Γ_{x,∓} + Γ'_{x,±}."""
        return (self.gl_minus + self.glp_plus,
                self.gl_plus + self.glp_minus,
                self.gr_minus + self.grp_plus,
                self.gr_plus + self.grp_minus)


def appendix_rates(basis: EigenBasis, env: EnvParams, t: float,
                   quad: QuadratureConfig | None = None) -> AppendixRates:
    """Eight correlation-function integrals of the lead coupling.

    Each is coupling·∫ dε occ(ε)·∫₀ᵗ e^{±i(ε-ω₀)s} ds with occ the Fermi
    occupancy ⟨c†c⟩ or the hole factor ⟨cc†⟩.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    quad = quad or QuadratureConfig()
    w_cut = quad.cutoff(env)
    b = basis.omega0

    def one(lead: str, occupied: bool, conjugate: bool) -> complex:
        mu, coupling = _lead_params(env, lead)
        total = 0.0 + 0.0j
        for (lo, hi) in ((mu - w_cut, mu), (mu, mu + w_cut)):
            x, w = _nodes(lo, hi, max(8, quad.n_nodes // 2), quad.scheme)
            occ = fermi_occupation(x, mu, env.kbt)
            if not occupied:
                occ = 1.0 - occ
            re = _sin_over(x - b, t)
            im = _one_minus_cos_over(x - b, t)
            im_sign = -1.0 if conjugate else 1.0  # e^{-ixs} conjugates the kernel
            total += np.dot(w * occ, re) + 1j * im_sign * np.dot(w * occ, im)
        return coupling * total

    return AppendixRates(
        gl_minus=one("l", True, False),
        gl_plus=one("l", False, True),
        glp_minus=one("l", False, False),
        glp_plus=one("l", True, True),
        gr_minus=one("r", True, False),
        gr_plus=one("r", False, True),
        grp_minus=one("r", False, False),
        grp_plus=one("r", True, True),
    )


# ---------------------------------------------------------------------------
# Markovian (long-time) limits, zero temperature closed forms

def _pv_log_piece(lo, hi, A, B, c):
    """PV ∫ (A + Bv)/(v + c) dv over [lo, hi]."""
    x1, x2 = lo + c, hi + c
    if x1 == 0.0 or x2 == 0.0:
        raise ZeroDivisionError("principal-value endpoint hits the pole")
    return B * (hi - lo) + (A - B * c) * math.log(abs(x2 / x1))


def _pv_log(c, w_cut, positive_only=None):
    total = 0.0
    for (lo, hi, A, B) in _tri_pieces(w_cut):
        if positive_only is True and hi <= 0.0:
            continue
        if positive_only is False and lo >= 0.0:
            continue
        total += _pv_log_piece(lo, hi, A, B, c)
    return total


def markovian_deltas(basis: EigenBasis, env: EnvParams,
                     band_cutoff: float | None = None
                     ) -> tuple[float, float, float, float, float]:
    """t → ∞ limits of Δ₁..Δ₅ at zero temperature.

    sin(xt)/x kernels concentrate to π·δ(x) on the triangular chord density;
    (1-cos(xt))/x kernels leave principal-value logarithms.
    """
    if env.kbt != 0.0:
        raise ValueError("Markovian deltas implemented for kbt = 0 only")
    w_cut = band_cutoff if band_cutoff is not None else env.band_cutoff
    ev = env.ev_qpc
    b = basis.omega0
    g2 = env.dos_product

    def rho(v):
        return float(tri_density(v, w_cut))

    d1 = math.pi * g2 * (rho(b - ev) + rho(b + ev))
    d2 = math.pi * g2 * (math.copysign(1.0, b - ev) * rho(b - ev) + rho(b + ev))
    d3 = g2 * (_pv_log(ev + b, w_cut) - _pv_log(ev - b, w_cut))
    d4 = 8.0 * math.pi * g2 * rho(ev)
    d5 = -4.0 * g2 * (_pv_log(ev, w_cut, positive_only=True)
                      - _pv_log(ev, w_cut, positive_only=False))
    return (d1, d2, d3, d4, d5)


def markovian_gammas(basis: EigenBasis, env: EnvParams,
                     band_cutoff: float | None = None
                     ) -> tuple[float, float, float, float]:
    """t → ∞ limits of Γ₁..Γ₄: the golden-rule values π·coupling·w(ω₀)."""
    w_cut = band_cutoff if band_cutoff is not None else env.band_cutoff
    b = basis.omega0
    out = []
    for sign, lead in _GAMMA_SIGNS:
        mu, coupling = _lead_params(env, lead)
        if abs(b - mu) >= w_cut:
            out.append(0.0)
            continue
        if env.kbt == 0.0:
            th = math.copysign(1.0, b - mu) if b != mu else 0.0
        else:
            th = math.tanh((b - mu) / (2.0 * env.kbt))
        out.append(math.pi * coupling * (1.0 - sign * th))
    return tuple(out)


def markovian_rateset(basis: EigenBasis, env: EnvParams,
                      band_cutoff: float | None = None) -> RateSet:
    """Long-time RateSet with all nine coefficients at their Markovian values."""
    g1, g2_, g3, g4 = markovian_gammas(basis, env, band_cutoff)
    d1, d2, d3, d4, d5 = markovian_deltas(basis, env, band_cutoff)
    return RateSet(g1, g2_, g3, g4, d1, d2, d3, d4, d5, t=math.inf)


def calibrated_deltas(basis: EigenBasis, env: EnvParams, delta4: float
                      ) -> tuple[float, float, float, float, float]:
    """Dimensionless Δ's for rate presets.

    Presets quote Γ values directly as dimensionless Markovian rates, and the
    QPC density of states is not independently fixed, so absolute Δ magnitudes
    are calibrated: the physical Markovian ratios Δ_k(∞)/Δ₄(∞) (independent
    of g²) are kept and the overall scale is pinned by the requested
    dimensionless delta4.
    """
    d = markovian_deltas(basis, env)
    if d[3] == 0.0:
        return (0.0,) * 5
    scale = delta4 / d[3]
    return tuple(scale * x for x in d)


# ---------------------------------------------------------------------------
# coefficient providers for the propagators

class ConstantRates:
    """Rate provider returning the same RateSet at every time."""

    def __init__(self, rates: RateSet):
        self._rates = rates

    def rates(self, t: float) -> RateSet:
        return self._rates


class RateTable:
    """Uniform-grid coefficient table with linear interpolation.

    Built once (vectorized over the grid) and immutable afterwards, so tables
    can be shared between concurrently propagated trajectories.
    """

    def __init__(self, t_grid: np.ndarray, values: np.ndarray):
        if values.shape != (len(t_grid), 9):
            raise ValueError("values must have shape (len(t_grid), 9)")
        self.t_grid = np.array(t_grid, dtype=float)
        self.values = np.array(values, dtype=float)
        self.t_grid.flags.writeable = False
        self.values.flags.writeable = False
        self._dt = self.t_grid[1] - self.t_grid[0]

    @classmethod
    def build(cls, basis: EigenBasis, env: EnvParams, t_max: float,
              spacing: float | None = None,
              quad: QuadratureConfig | None = None,
              exact: bool = True) -> "RateTable":
        """Tabulate all nine coefficients on [0, t_max].

        Default grid spacing is min(1/ω₀, 1/eV_QPC)/20 so that linear
        interpolation error stays below typical integrator tolerances.  With
        exact=True (zero temperature) the Si/Ci evaluators are used; otherwise
        each grid point is computed by quadrature.
        """
        if spacing is None:
            scales = [1.0 / basis.omega0] if basis.omega0 > 0 else []
            if env.ev_qpc > 0:
                scales.append(1.0 / env.ev_qpc)
            spacing = min(scales) / 20.0 if scales else t_max / 1000.0
        n = max(2, int(math.ceil(t_max / spacing)) + 1)
        t_grid = np.linspace(0.0, t_max, n)
        if exact and env.kbt == 0.0:
            w_cut = quad.cutoff(env) if quad is not None else env.band_cutoff
            gam = gamma_rates_exact(basis, env, t_grid, w_cut)
            del_ = delta_coeffs_exact(basis, env, t_grid, w_cut)
            values = np.concatenate([gam, del_], axis=0).T
        else:
            quad = quad or QuadratureConfig()
            values = np.empty((n, 9))
            for i, t in enumerate(t_grid):
                values[i, :4] = gamma_rates(basis, env, t, quad)
                values[i, 4:] = delta_coeffs(basis, env, quad, t)
        return cls(t_grid, values)

    def rates(self, t: float) -> RateSet:
        if t <= self.t_grid[0]:
            row = self.values[0]
        elif t >= self.t_grid[-1]:
            row = self.values[-1]
        else:
            pos = (t - self.t_grid[0]) / self._dt
            i = int(pos)
            frac = pos - i
            row = (1.0 - frac) * self.values[i] + frac * self.values[i + 1]
        return RateSet(*row, t=t)


def write_coefficients_csv(path, table: RateTable, metadata: dict | None = None):
    """Diagnostic CSV of the coefficient table: (t, Γ₁..Γ₄, Δ₁..Δ₅)."""
    with open(path, "w", newline="") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={val}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "gamma1", "gamma2", "gamma3", "gamma4",
                         "delta1", "delta2", "delta3", "delta4", "delta5"])
        for t, row in zip(table.t_grid, table.values):
            writer.writerow([f"{t:.12g}"] + [f"{x:.12g}" for x in row])
