"""Local basis, model parameters and the vectorized site density matrix.

A lattice site carries a photon mode truncated at ``n_max`` quanta and a
two-level emitter with pseudospin sigma in {-1, +1}.  The site density
matrix is stored as a flat complex vector c[n, m, sigma, sigma'] giving the
coefficient of |n, sigma><m, sigma'|.  The flat layout is row-major with
sigma' fastest and n slowest, so files and checkpoints are bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "LocalBasis",
    "ModelParams",
    "GutzwillerState",
    "flat_index",
    "unflatten_index",
    "validate_state",
    "vacuum_state",
    "maximally_mixed_state",
    "pure_state",
    "seeded_mixed_state",
]

_SPIN_INDEX = {-1: 0, +1: 1}
_SPIN_VALUE = (-1, +1)


@dataclass(frozen=True)
class LocalBasis:
    """Photon-number cutoff and derived index bookkeeping for one site."""

    n_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def spin_levels(self) -> int:
        return 2

    @property
    def dim_local(self) -> int:
        """Dimension of the local Hilbert space, (n_max+1) photon x 2 spin."""
        return 2 * (self.n_max + 1)

    @property
    def dim_rho(self) -> int:
        """Number of density-matrix elements, (n_max+1)^2 * 4."""
        return (self.n_max + 1) ** 2 * 4

    # Vectorized index tables: for flat index i, n_of[i], m_of[i], s_of[i]
    # (sigma value) and sp_of[i] (sigma' value).
    def index_tables(self):
        nn = self.n_max + 1
        idx = np.arange(self.dim_rho)
        sp = idx % 2
        s = (idx // 2) % 2
        m = (idx // 4) % nn
        n = idx // (4 * nn)
        sigma = 2 * s - 1
        sigma_p = 2 * sp - 1
        return n, m, sigma, sigma_p


def flat_index(n: int, m: int, sigma: int, sigma_p: int, basis: LocalBasis) -> int:
    """Flat position of c[n, m, sigma, sigma'] (sigma' fastest, n slowest)."""
    if not (0 <= n <= basis.n_max and 0 <= m <= basis.n_max):
        raise IndexError(f"photon indices ({n}, {m}) outside [0, {basis.n_max}]")
    if sigma not in _SPIN_INDEX or sigma_p not in _SPIN_INDEX:
        raise IndexError(f"spin labels ({sigma}, {sigma_p}) must be -1 or +1")
    nn = basis.n_max + 1
    return ((n * nn + m) * 2 + _SPIN_INDEX[sigma]) * 2 + _SPIN_INDEX[sigma_p]


def unflatten_index(i: int, basis: LocalBasis) -> tuple[int, int, int, int]:
    """Inverse of flat_index."""
    if not (0 <= i < basis.dim_rho):
        raise IndexError(f"flat index {i} outside [0, {basis.dim_rho})")
    nn = basis.n_max + 1
    sp = _SPIN_VALUE[i % 2]
    s = _SPIN_VALUE[(i // 2) % 2]
    m = (i // 4) % nn
    n = i // (4 * nn)
    return n, m, s, sp


@dataclass(frozen=True)
class ModelParams:
    """Physical couplings of the pumped cavity array.

    Energies and rates share one unit (Gamma_p = 1 is the natural choice).
    omega_at=None selects band-bottom pumping, omega_at = omega_c - z*J,
    which suppresses finite-k condensation.
    """

    J: float
    Omega: float
    Gamma_l: float
    Gamma_p: float
    gamma: float
    omega_c: float = 0.0
    omega_at: float | None = None
    U: float = 0.0
    hard_core: bool = True
    d: int = 2

    def __post_init__(self):
        if self.Gamma_p <= 0:
            raise ValueError("Gamma_p must be > 0")
        for name in ("Omega", "Gamma_l", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.d < 1 or int(self.d) != self.d:
            raise ValueError("d must be an integer >= 1")

    @property
    def z(self) -> int:
        """Lattice coordination number, 2*d."""
        return 2 * self.d

    @property
    def G(self) -> float:
        """Effective emitter-cavity coupling Omega^2 / (Gamma_p * Gamma_l)."""
        return self.Omega**2 / (self.Gamma_p * self.Gamma_l)

    @property
    def Gamma_em(self) -> float:
        """Effective pumping rate 4*Omega^2 / Gamma_p (perturbative limit)."""
        return 4.0 * self.Omega**2 / self.Gamma_p

    @property
    def omega_at_eff(self) -> float:
        """Emitter frequency actually used (default omega_c - z*J)."""
        if self.omega_at is None:
            return self.omega_c - self.z * self.J
        return self.omega_at

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def basis(self, n_max: int | None = None) -> LocalBasis:
        """Local basis matching this parameter set.

        Hard core pins n_max = 1 (occupation restricted to {0, 1} and the
        interaction term dropped); soft core requires an explicit cutoff >= 2.
        """
        if self.hard_core:
            if n_max not in (None, 1):
                raise ValueError("hard_core runs use n_max = 1")
            return LocalBasis(1)
        if n_max is None or n_max < 2:
            raise ValueError("soft-core runs need an explicit n_max >= 2")
        return LocalBasis(n_max)


@dataclass(frozen=True)
class GutzwillerState:
    """Vectorized site density matrix c[n, m, sigma, sigma'].

    Value-semantic: the coefficient array is frozen after construction, so
    states can be shared across workers without copies.
    """

    c: np.ndarray
    basis: LocalBasis = field(compare=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=complex)
        if c.shape != (self.basis.dim_rho,):
            raise ValueError(f"state vector must have shape ({self.basis.dim_rho},)")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "c", c)

    def as_matrix(self) -> np.ndarray:
        """Local density matrix reshaped to (dim_local, dim_local).

        Row/column index is i = 2*n + (sigma+1)/2, i.e. |n, sigma>.
        """
        nn = self.basis.n_max + 1
        rho4 = self.c.reshape(nn, nn, 2, 2)
        rho = np.transpose(rho4, (0, 2, 1, 3)).reshape(2 * nn, 2 * nn)
        return rho

    def trace(self) -> complex:
        n, m, s, sp = self.basis.index_tables()
        return complex(np.sum(self.c[(n == m) & (s == sp)]))


def validate_state(state: GutzwillerState, tol: float = 1e-8) -> list[str]:
    """Diagnostic physicality check; returns [] when the state passes.

    Checks Hermiticity c[n,m,s,s'] == conj(c[m,n,s',s]), unit trace and
    nonnegative real diagonal, all within tol.
    """
    basis = state.basis
    violations = []
    rho = state.as_matrix()
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        violations.append(f"hermiticity violated by {herm:.3e}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        violations.append(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
    diag = np.diag(rho)
    worst = float(np.min(diag.real))
    if worst < -tol:
        violations.append(f"negative diagonal element {worst:.3e}")
    if np.max(np.abs(diag.imag)) > tol:
        violations.append(f"complex diagonal element {np.max(np.abs(diag.imag)):.3e}")
    return violations


def vacuum_state(basis: LocalBasis) -> GutzwillerState:
    """Empty cavity, emitter in the lower state."""
    c = np.zeros(basis.dim_rho, dtype=complex)
    c[flat_index(0, 0, -1, -1, basis)] = 1.0
    return GutzwillerState(c, basis)


def maximally_mixed_state(basis: LocalBasis) -> GutzwillerState:
    c = np.zeros(basis.dim_rho, dtype=complex)
    w = 1.0 / basis.dim_local
    for n in range(basis.n_max + 1):
        for s in (-1, +1):
            c[flat_index(n, n, s, s, basis)] = w
    return GutzwillerState(c, basis)


def pure_state(basis: LocalBasis, n: int, sigma: int) -> GutzwillerState:
    c = np.zeros(basis.dim_rho, dtype=complex)
    c[flat_index(n, n, sigma, sigma, basis)] = 1.0
    return GutzwillerState(c, basis)


def seeded_mixed_state(basis: LocalBasis, eps: float = 1e-3) -> GutzwillerState:
    """Maximally mixed diagonal plus a small photon coherence seed.

    The seed on c[1,0,s,s] (Hermitized) pushes the propagation off the
    psi = 0 manifold, which the mean-field flow never leaves on its own.
    """
    c = np.array(maximally_mixed_state(basis).c)
    for s in (-1, +1):
        c[flat_index(1, 0, s, s, basis)] += eps
        c[flat_index(0, 1, s, s, basis)] += eps
    return GutzwillerState(c, basis)
