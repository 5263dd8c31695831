"""Closed-form equilibrium hard-core mean-field theory.

Mapping occupation-restricted bosons to spin-1/2 operators turns the
lattice model into an XY-type Hamiltonian (optionally with a
nearest-neighbour coupling Ubar).  Mean-field theory then gives the
filling, order parameter, chemical potential and a 3x3 collective-mode
problem with a closed-form gapless branch.  Used as an independent oracle
for the driven system's limits.

Dispersion conventions: J(k) = -2 J sum_a cos(k_a) (band bottom at k = 0),
eps(k) = z J + J(k) >= 0, Ubar(k) = +2 Ubar sum_a cos(k_a).  The 3x3
matrix factorizes as lambda (lambda^2 - a^2 - 2bc): one flat zero root at
every k (a redundancy of the (u, v, w) parametrization) plus the physical
pair +-omega_G(k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "HardCoreParams",
    "HardCoreMeanField",
    "hc_meanfield",
    "hc_bdg_matrix",
    "hc_bdg",
    "hc_goldstone",
    "sound_velocity",
]


class DomainError(ValueError):
    """Parameters outside the stable superfluid region."""


@dataclass(frozen=True)
class HardCoreParams:
    J: float
    omega_c: float
    Ubar: float = 0.0
    z: int = 4

    def __post_init__(self):
        if self.z < 2 or self.z % 2:
            raise ValueError("z must be an even integer >= 2")

    @property
    def d(self) -> int:
        return self.z // 2

    def check_domain(self):
        # outside this window the sound velocity turns imaginary
        if not (-self.z * (self.J + self.Ubar) <= self.omega_c <= self.z * self.J):
            raise DomainError(
                f"omega_c={self.omega_c} outside [-z(J+Ubar), zJ] = "
                f"[{-self.z * (self.J + self.Ubar)}, {self.z * self.J}]")


@dataclass(frozen=True)
class HardCoreMeanField:
    n0: float
    psi0_sq: float
    omega_eq: float
    energy_density: float
    xi: float


def hc_meanfield(p: HardCoreParams) -> HardCoreMeanField:
    """Optimal filling and derived equilibrium quantities.

    n0 = (zJ - omega_c) / (z (2J + Ubar)); |psi0|^2 = n0 (1 - n0) (the
    order parameter is the geometric mean of particle and hole densities);
    the oscillation frequency zJ(2n0-1) + z Ubar n0 + omega_c vanishes
    identically at the optimal filling; xi = pi / (2 asin(sqrt(n0))) from
    matching the diagonal single-particle energy to the mean-field shift.
    """
    p.check_domain()
    n0 = (p.z * p.J - p.omega_c) / (p.z * (2 * p.J + p.Ubar))
    psi0_sq = n0 * (1.0 - n0)
    omega_eq = p.z * p.J * (2 * n0 - 1) + p.z * p.Ubar * n0 + p.omega_c
    energy = -p.z * p.J * psi0_sq + 0.5 * p.z * p.Ubar * n0**2 + p.omega_c * n0
    xi = math.pi / (2.0 * math.asin(math.sqrt(n0))) if n0 > 0 else math.inf
    return HardCoreMeanField(n0, psi0_sq, omega_eq, energy, xi)


def _dispersions(p: HardCoreParams, k):
    """(eps(k), Ubar(k)): eps via sin^2 avoids the zJ + J(k) cancellation
    at small momenta."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.size != p.d:
        raise ValueError(f"k must have {p.d} components, got {k.size}")
    eps = 4.0 * p.J * float(np.sum(np.sin(0.5 * k) ** 2))
    Uk = 2.0 * p.Ubar * float(np.sum(np.cos(k)))
    return eps, Uk


def hc_bdg_matrix(p: HardCoreParams, k) -> np.ndarray:
    """3x3 collective-mode matrix acting on (u, v, w) fluctuations of the
    order parameter (particle/hole) and the relative density."""
    mf = hc_meanfield(p)
    n0 = mf.n0
    eps, Uk = _dispersions(p, k)
    # (1-2n0) J(k) + z Ubar n0 + omega_c == (1-2n0) eps(k) + omega_eq,
    # written in the cancellation-free form (omega_eq = 0 at optimal n0)
    a = (1 - 2 * n0) * eps + mf.omega_eq
    b = (2 * p.z * p.J + Uk) * n0
    c = (1 - n0) * eps
    return np.array([[a, 0.0, b],
                     [0.0, -a, -b],
                     [c, -c, 0.0]], dtype=complex)


def hc_bdg(p: HardCoreParams, k) -> np.ndarray:
    """Eigenvalues of the 3x3 problem, sorted by real part."""
    vals = np.linalg.eigvals(hc_bdg_matrix(p, k))
    return vals[np.lexsort((vals.imag, vals.real))]


def hc_goldstone(p: HardCoreParams, k) -> float:
    """Closed-form gapless branch.

    omega_G(k)^2 = (z Ubar + 2 omega_c)^2 / (z (2J + Ubar))^2 * eps(k)^2
                 + 2 |psi0|^2 (2 z J + Ubar(k)) eps(k),  eps(k) = zJ + J(k).
    """
    mf = hc_meanfield(p)
    eps, Uk = _dispersions(p, k)
    pref = (p.z * p.Ubar + 2 * p.omega_c) ** 2 / (p.z * (2 * p.J + p.Ubar)) ** 2
    arg = pref * eps**2 + 2.0 * mf.psi0_sq * (2 * p.z * p.J + Uk) * eps
    if arg < -1e-12 * max(1.0, abs(arg)):
        raise DomainError("imaginary collective-mode energy; outside stability domain")
    return math.sqrt(max(arg, 0.0))


def sound_velocity(p: HardCoreParams) -> float:
    """c_s = sqrt(2 z J (2J + Ubar)) |psi0| (diagonal-momentum slope)."""
    mf = hc_meanfield(p)
    arg = 2.0 * p.z * p.J * (2 * p.J + p.Ubar) * mf.psi0_sq
    if arg < 0:
        raise DomainError("imaginary sound velocity; outside stability domain")
    return math.sqrt(arg)
