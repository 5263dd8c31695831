"""Linear response of the steady state from the collective-mode
decomposition.

A weak probe in channel F enters the fluctuation equations as a source
term built from commutators of F with the steady state.  Expanding the
resolvent of the fluctuation block on its eigenmodes gives pole sums such
as the retarded photon Green's function

    G_R(k, w) = sum_a Z_ak / (w - w_ak),   Z_ak = U_ak (x_ak* . P0),

with P0 = [adag, c0] and x the biorthonormal left eigenvectors, which is
identically the direct solve u_row . (w - A_k)^{-1} P0.  Input-output
theory then maps G_R onto the transmission and reflection of a two-sided
cavity with mirror amplitudes eta_L, eta_R (|eta|^2 = Gamma_l each for the
symmetric geometry), and the anomalous propagator onto the four-wave
mixing signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import ModelParams
from .meanfield import NessResult, _ladder_parts, observables
from .spectrum import ModeSet, build_A_block, make_mode_set

__all__ = [
    "PoleError",
    "ResponseMap",
    "perturbation_vectors",
    "perturbation_weights",
    "density_response",
    "retarded_green",
    "anomalous_green",
    "green_direct",
    "dos",
    "transmittivity_reflectivity",
    "four_wave_mixing",
    "build_response_map",
    "default_omega_grid",
    "fit_diffusive_dos",
]


class PoleError(ZeroDivisionError):
    """Probe frequency coincides with an undamped pole."""


def perturbation_vectors(ness: NessResult):
    """Source vectors of the three probe channels.

    P0 = [adag, c0] (particle), Q0 = [a, c0] (hole) and the density source
    N0 with elements (n - m) c0[n, m, s, s'].
    """
    basis = ness.c0.basis
    HP, HQ, *_ = _ladder_parts(basis.n_max)
    P0 = HP @ ness.c0.c
    Q0 = HQ @ ness.c0.c
    n, m, _, _ = basis.index_tables()
    N0 = (n - m) * ness.c0.c
    return P0, Q0, N0


def perturbation_weights(ness: NessResult, mode_set: ModeSet,
                         channel: str) -> np.ndarray:
    """Per-mode overlap x_a* . (source vector) for the chosen channel."""
    P0, _, N0 = perturbation_vectors(ness)
    if channel == "density":
        return mode_set.left_x @ N0
    if channel == "particle":
        return mode_set.left_x @ P0
    raise ValueError(f"unknown channel {channel!r}")


def _pole_sum(residues: np.ndarray, poles: np.ndarray, omega_grid: np.ndarray):
    om = np.asarray(omega_grid, dtype=float)
    denom = om[:, None] - poles[None, :]
    if np.any(denom == 0):
        raise PoleError("probe frequency exactly on an undamped pole")
    return (residues[None, :] / denom).sum(axis=1)


def density_response(ness: NessResult, mode_set: ModeSet, omega_grid):
    """chi_n(k, w) = sum_a N_ak (x_ak* . N0) / (w - w_ak)."""
    wts = perturbation_weights(ness, mode_set, "density")
    residues = mode_set.weights["N"] * wts
    return _pole_sum(residues, mode_set.eigenvalues, omega_grid)


def retarded_green(ness: NessResult, mode_set: ModeSet, omega_grid):
    """Normal retarded Green's function and its residue table.

    Returns (G_R(w), {"Z": particle residues, "Y": hole residues}); the
    hole residues Y_ak = V_ak (y_ak* . P0*) = V_ak conj(x_ak* . P0) enter
    the symmetric two-pole form of the propagator.
    """
    wts = perturbation_weights(ness, mode_set, "particle")
    Z = mode_set.weights["U"] * wts
    Y = mode_set.weights["V"] * np.conj(wts)
    return _pole_sum(Z, mode_set.eigenvalues, omega_grid), {"Z": Z, "Y": Y}


def anomalous_green(ness: NessResult, mode_set: ModeSet, omega_grid):
    """Anomalous retarded propagator Delta_R(k, w).

    The anomalous residue (V/U) Z reduces to V_ak (x_ak* . P0), finite for
    every mode, so it is evaluated division-free.
    """
    wts = perturbation_weights(ness, mode_set, "particle")
    Zbar = mode_set.weights["V"] * wts
    return _pole_sum(Zbar, mode_set.eigenvalues, omega_grid)


def green_direct(ness: NessResult, p: ModelParams, k, omega: float) -> complex:
    """G_R by direct linear solve u_row . (w - A_k)^{-1} P0; independent of
    the eigendecomposition, used as a cross-check."""
    basis = ness.c0.basis
    A = build_A_block(ness, p, k)
    P0, _, _ = perturbation_vectors(ness)
    _, _, u_row, *_ = _ladder_parts(basis.n_max)
    D = A.shape[0]
    sol = np.linalg.solve(omega * np.eye(D, dtype=complex) - A, P0)
    return complex(u_row @ sol)


def dos(G_R: np.ndarray, omega_grid, n0: float | None = None,
        k_axis: int | None = None):
    """Spectral function A = -Im(G_R)/pi and its momentum average.

    With n0 given, also returns the window integral of the local DoS and
    its deviation from the hard-core sum-rule value 1 - 2 n0 (the missing
    weight sits in the truncated 1/w tails).
    """
    om = np.asarray(omega_grid, dtype=float)
    A = -np.imag(G_R) / np.pi
    A_local = A if A.ndim == 1 else A.mean(axis=0 if k_axis is None else k_axis)
    integral = float(np.trapezoid(A_local, om))
    deviation = None if n0 is None else integral - (1.0 - 2.0 * n0)
    return A, A_local, integral, deviation


def transmittivity_reflectivity(G_R: np.ndarray, eta_L: float, eta_R: float):
    """Input-output transmission/reflection of the probed cavity array.

    T = -i eta_L eta_R* G_R and R = 1 + (eta_L/eta_R)* T; |R|^2 is also
    returned through its exact spectral form
    (1 - pi |eta_L|^2 A)^2 + |eta_L|^4 (Re G_R)^2, and the sum-rule
    violation |T|^2 + |R|^2 - 1 quantifies probe energy gain or loss.
    """
    if eta_R == 0:
        raise ZeroDivisionError(
            "eta_R = 0: reflection relation undefined; use the |R|^2 form")
    T = -1j * eta_L * np.conj(eta_R) * G_R
    R = 1.0 + np.conj(eta_L / eta_R) * T
    A = -np.imag(G_R) / np.pi
    el2 = abs(eta_L) ** 2
    absR2 = (1.0 - np.pi * el2 * A) ** 2 + el2**2 * np.real(G_R) ** 2
    violation = np.abs(T) ** 2 + np.abs(R) ** 2 - 1.0
    return T, R, absR2, violation


def four_wave_mixing(Delta_R: np.ndarray, eta_L: float, eta_R: float):
    """F = -i eta_L eta_R* Delta_R: probe at (k, w), detect at the mirror
    point of the condensate frequency."""
    return -1j * eta_L * np.conj(eta_R) * Delta_R


def default_omega_grid(center: float, Gamma_p: float, n_points: int = 2001,
                       half_width: float | None = None) -> np.ndarray:
    hw = 10.0 * Gamma_p if half_width is None else half_width
    return np.linspace(center - hw, center + hw, n_points)


@dataclass(frozen=True)
class ResponseMap:
    """Sampled response functions over a (k, omega) grid.

    All arrays are shaped (n_k, n_omega); frequencies are measured in the
    frame rotating at the condensate frequency (raw frequencies in the
    normal phase, where omega0 = 0).
    """

    k_path: list
    omega_grid: np.ndarray
    chi_n: np.ndarray
    G_R: np.ndarray
    Delta_R: np.ndarray
    A: np.ndarray
    T: np.ndarray
    R: np.ndarray
    F: np.ndarray
    absR2: np.ndarray
    sumrule_violation: np.ndarray
    eta_L: float
    eta_R: float
    n0: float
    A_local: np.ndarray = field(repr=False, default=None)
    dos_integral: float = 0.0
    dos_deviation: float = 0.0


def build_response_map(ness: NessResult, p: ModelParams, k_path, omega_grid,
                       eta_L: float | None = None,
                       eta_R: float | None = None) -> ResponseMap:
    """Evaluate every response function on a k-path x frequency grid."""
    eta_L = np.sqrt(p.Gamma_l) if eta_L is None else eta_L
    eta_R = np.sqrt(p.Gamma_l) if eta_R is None else eta_R
    om = np.asarray(omega_grid, dtype=float)
    nk = len(k_path)
    shape = (nk, om.size)
    chi = np.empty(shape, dtype=complex)
    G = np.empty(shape, dtype=complex)
    D = np.empty(shape, dtype=complex)
    for i, k in enumerate(k_path):
        ms = make_mode_set(ness, p, k)
        chi[i] = density_response(ness, ms, om)
        G[i], _ = retarded_green(ness, ms, om)
        D[i] = anomalous_green(ness, ms, om)
    n0 = observables(ness.c0).n0
    A, A_local, integral, deviation = dos(G, om, n0=n0)
    T, R, absR2, violation = transmittivity_reflectivity(G, eta_L, eta_R)
    F = four_wave_mixing(D, eta_L, eta_R)
    return ResponseMap(k_path=list(k_path), omega_grid=om, chi_n=chi, G_R=G,
                       Delta_R=D, A=A, T=T, R=R, F=F, absR2=absR2,
                       sumrule_violation=violation, eta_L=eta_L, eta_R=eta_R,
                       n0=n0, A_local=A_local, dos_integral=integral,
                       dos_deviation=deviation)


def fit_diffusive_dos(A_k_omega: np.ndarray, omega_grid) -> tuple[float, float]:
    """Diagnostic fit of the broken-phase low-frequency DoS to the
    odd-resonance form -(1/pi) Zpp w / (w^2 + wpp^2).

    Returns (Zpp, wpp); least squares on the sampled profile.
    """
    om = np.asarray(omega_grid, dtype=float)
    A = np.asarray(A_k_omega, dtype=float)
    from scipy.optimize import least_squares

    def model(params):
        zpp, wpp = params
        return -(zpp / np.pi) * om / (om**2 + wpp**2) - A
    i0 = int(np.argmax(np.abs(A)))
    w0 = max(abs(om[i0]), 1e-6)
    z0 = -np.pi * A[i0] * 2 * w0 * np.sign(om[i0])
    out = least_squares(model, x0=[z0 if z0 != 0 else -1e-3, w0])
    return float(out.x[0]), float(abs(out.x[1]))
