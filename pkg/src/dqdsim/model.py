"""Physical parameters and the eigenbasis transformation of the DQD Hamiltonian.

Unit convention: energies in μeV with ħ = 1 and e = 1, so rates are in μeV
and time in 1/μeV.  Dimensionless time axes are reported as ω₀·t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class DegenerateHamiltonianError(ValueError):
    """Raised when ε = Ω = 0 leaves the two-level Hamiltonian with no axis."""


@dataclass(frozen=True)
class DqdParams:
    """Bare double-dot Hamiltonian parameters.

    epsilon is the detuning ε = ε₂ − ε₁ between the dot levels, omega the
    interdot coupling Ω.  Both in μeV.
    """

    epsilon: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and math.isfinite(self.omega)):
            raise ValueError("epsilon and omega must be finite")


@dataclass(frozen=True)
class EigenBasis:
    """Derived eigenbasis data: mixing angle θ, amplitudes α = cos(θ/2),
    β = sin(θ/2), and level splitting ω₀ = sqrt(ε² + 4Ω²)."""

    theta: float
    alpha: float
    beta: float
    omega0: float

    @property
    def epsilon(self) -> float:
        """Detuning reconstructed as ω₀ cos θ."""
        return self.omega0 * math.cos(self.theta)

    @property
    def omega(self) -> float:
        """Coupling reconstructed as ω₀ sin θ / 2."""
        return self.omega0 * math.sin(self.theta) / 2.0


@dataclass(frozen=True)
class EnvParams:
    """QPC and lead reservoir parameters.

    chi1/chi2 modulate the QPC tunnelling amplitude when the electron sits in
    dot 1/2; the detector is closer to dot 2, so chi1 < chi2 and the stored
    chi_d = chi1 - chi2 is negative.  Only chi_d² enters any rate.
    lead_coupling_l/r are the wide-band products |Ω_{l/r,k}|²·(lead density of
    states), so lead rates come out directly in μeV.  dos_product is the QPC
    source×drain density-of-states product g² (1/μeV²) for the flat band
    [-W, W] around each chemical potential.
    """

    chi1: float
    chi2: float
    ev_qpc: float
    band_cutoff: float
    d_amp: float = 0.0
    mu_l: float = 0.0
    mu_r: float = 0.0
    kbt: float = 0.0
    dos_product: float = 1.0
    lead_coupling_l: float = 1.0
    lead_coupling_r: float = 1.0

    def __post_init__(self):
        if not self.chi1 < self.chi2:
            raise ValueError("chi1 must be < chi2 (QPC sits closer to dot 2)")
        if self.band_cutoff <= 0:
            raise ValueError("band_cutoff must be > 0")
        if self.kbt < 0:
            raise ValueError("kbt must be >= 0")
        if self.ev_qpc < 0:
            raise ValueError("ev_qpc must be >= 0")

    @property
    def chi_d(self) -> float:
        """Signed coupling difference χ_d = χ₁ − χ₂ (< 0)."""
        return self.chi1 - self.chi2


def diagonalize(p: DqdParams) -> EigenBasis:
    """Diagonalize H = (ε/2)σ_z + Ωσ_x.

    The branch θ = atan2(2|Ω|, ε) ∈ [0, π] is fixed so that α, β ≥ 0; the sign
    of Ω is folded into an overall eigenvector phase, which no downstream rate
    sees (everything uses α², β² or αβ products squared).
    """
    if p.epsilon == 0.0 and p.omega == 0.0:
        raise DegenerateHamiltonianError("epsilon = omega = 0 has no eigenbasis")
    theta = math.atan2(abs(2.0 * p.omega), p.epsilon)
    return EigenBasis(
        theta=theta,
        alpha=math.cos(theta / 2.0),
        beta=math.sin(theta / 2.0),
        omega0=math.hypot(p.epsilon, 2.0 * p.omega),
    )


def eta(basis: EigenBasis, env: EnvParams) -> float:
    """Backaction prefactor η = α²β²χ_d² of the QPC-induced flip channels."""
    return (basis.alpha * basis.beta * env.chi_d) ** 2
