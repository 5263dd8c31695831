"""Momentum-resolved fluctuation superoperator around a steady state.

Small oscillations c = c0 + u_k e^{i(k r - w t)} + v_k* e^{-i(k r - w* t)}
obey a block-diagonal eigenproblem; Hermiticity ties the two blocks through
v = u^T (photon and spin indices transposed), so the upper block A_k holds
the whole spectrum.  A_k is the steady-state superoperator plus a rank-two
hopping term proportional to the lattice dispersion

    J(k) = -2 J sum_a cos(k_a)        (band bottom at k = 0, J(0) = -z J)

and a diagonal shift -omega0 (n - m + (s - s')/2) that moves to the frame
co-rotating with the condensate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .basis import LocalBasis, ModelParams
from .meanfield import (
    NessResult,
    _ladder_parts,
    build_superoperator,
    frame_weights,
    superoperator_parts,
)

__all__ = [
    "DegeneracyError",
    "TrackingError",
    "EigenDecomposition",
    "ModeSet",
    "Band",
    "lattice_dispersion",
    "single_particle_energy",
    "diagonal_k_path",
    "build_A_block",
    "diagonalize",
    "channel_weights",
    "make_mode_set",
    "full_spectrum",
    "classify_branches",
    "stability_check",
    "zero_mode_tol",
]


class DegeneracyError(np.linalg.LinAlgError):
    def __init__(self, clusters):
        self.clusters = clusters
        super().__init__(f"(near-)defective eigenvalue clusters: {clusters}")


class TrackingError(RuntimeError):
    def __init__(self, k_from, k_to, overlap):
        self.k_interval = (k_from, k_to)
        super().__init__(
            f"band tracking ambiguous between k={k_from} and k={k_to} "
            f"(best overlap {overlap:.3f} < threshold)")


def zero_mode_tol(p: ModelParams) -> float:
    return 1e-7 * p.Gamma_p


def lattice_dispersion(k, p: ModelParams) -> float:
    """J(k) = -2 J sum_a cos(k_a); equals -z J at the zone center."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.size != p.d:
        raise ValueError(f"k must have {p.d} components, got {k.size}")
    return -2.0 * p.J * float(np.sum(np.cos(k)))


def single_particle_energy(k, p: ModelParams) -> float:
    """epsilon(k) = 4 J sum_a sin^2(k_a/2) = z J + J(k), zero at k = 0."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.size != p.d:
        raise ValueError(f"k must have {p.d} components, got {k.size}")
    return 4.0 * p.J * float(np.sum(np.sin(0.5 * k) ** 2))


def diagonal_k_path(n_points: int, d: int = 2, k_max: float = np.pi,
                    k_min: float = 0.0):
    """k-points along the zone diagonal (q, ..., q), q in [k_min, k_max]."""
    qs = np.linspace(k_min, k_max, n_points)
    return [tuple([q] * d) for q in qs]


# ----------------------------------------------------------------------
# fluctuation block
# ----------------------------------------------------------------------

def build_A_block(ness: NessResult, p: ModelParams, k) -> np.ndarray:
    """Upper diagonal block of the fluctuation superoperator at momentum k.

    A_k = L[c0] + J(k) (P0 (x) u_row + Q0 (x) v_row) - omega0 W, where
    P0 = [adag, c0], Q0 = [a, c0], u_row / v_row extract the particle and
    hole components of the order-parameter fluctuation, and W is the
    rotating-frame weight diagonal.
    """
    basis = ness.c0.basis
    L = build_superoperator(ness.c0, p)
    _, HP, HQ = superoperator_parts(basis, p)
    _, _, u_row, v_row, *_ = _ladder_parts(basis.n_max)
    P0 = HP @ ness.c0.c
    Q0 = HQ @ ness.c0.c
    Jk = lattice_dispersion(k, p)
    A = L + Jk * (np.outer(P0, u_row) + np.outer(Q0, v_row))
    A -= ness.omega0 * np.diag(frame_weights(basis)).astype(complex)
    return A


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues with biorthonormal right (columns) and left (rows x^dag)
    eigenvectors: left @ right == identity."""

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray


def _clusters(vals: np.ndarray, tol: float = 1e-9):
    order = np.lexsort((vals.imag, vals.real))
    groups, current = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if abs(vals[a] - vals[b]) < tol:
            current.append(b)
        else:
            if len(current) > 1:
                groups.append([vals[i] for i in current])
            current = [b]
    if len(current) > 1:
        groups.append([vals[i] for i in current])
    return groups


def diagonalize(A: np.ndarray, fallback: bool = False) -> EigenDecomposition:
    """Full eigendecomposition of a general complex matrix.

    Left vectors are the rows of the inverse of the right-eigenvector
    matrix.  If that matrix is ill-conditioned (cond > 1e10) the matrix is
    treated as (near-)defective: with fallback=True the left vectors are
    rebuilt from the conjugate problem eig(A^dag) with joint normalization,
    otherwise a DegeneracyError lists the offending eigenvalue clusters.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    vals, right = np.linalg.eig(A)
    order = np.lexsort((vals.imag, vals.real))
    vals, right = vals[order], right[:, order]
    cond = np.linalg.cond(right)
    if cond <= 1e10:
        left = np.linalg.inv(right)
        return EigenDecomposition(vals, right, left)
    if not fallback:
        raise DegeneracyError(_clusters(vals))
    lvals, lvecs = np.linalg.eig(A.conj().T)
    used = np.zeros(lvals.size, dtype=bool)
    cols = []
    for w in vals:
        dist = np.abs(np.conj(lvals) - w) + np.where(used, np.inf, 0.0)
        j = int(np.argmin(dist))
        used[j] = True
        cols.append(lvecs[:, j])
    VL = np.array(cols).T
    G = VL.conj().T @ right
    if np.linalg.cond(G) > 1e12:
        raise DegeneracyError(_clusters(vals))
    left = np.linalg.solve(G, VL.conj().T)
    return EigenDecomposition(vals, right, left)


# ----------------------------------------------------------------------
# mode sets and channel weights
# ----------------------------------------------------------------------

def channel_weights(right: np.ndarray, basis: LocalBasis) -> dict[str, np.ndarray]:
    """Per-mode fluctuation weights of the right eigenvectors (columns).

    N (density), U (particle), V (hole), amp = (U+V)/2, phase = (U-V)/(2i)
    and the particle-hole character C = (|U|-|V|)/(|U|+|V|) (0 when the
    mode carries no photon-field weight at all).
    """
    _, _, u_row, v_row, n_row, _ = _ladder_parts(basis.n_max)
    N = n_row @ right
    U = u_row @ right
    V = v_row @ right
    denom = np.abs(U) + np.abs(V)
    with np.errstate(invalid="ignore", divide="ignore"):
        C = np.where(denom > 0, (np.abs(U) - np.abs(V)) / np.where(denom > 0, denom, 1.0), 0.0)
    return {
        "N": N,
        "U": U,
        "V": V,
        "amp": 0.5 * (U + V),
        "phase": (U - V) / 2j,
        "C": C.real.astype(float),
    }


@dataclass(frozen=True)
class ModeSet:
    """Eigenmodes of A_k at one momentum with channel weights.

    Right eigenvectors are unit-norm columns; left rows are biorthonormal
    (left @ right = 1).  trace_mode is the index of the unphysical
    trace-direction zero mode (its left vector is the trace row), present
    at every k and excluded from branch statistics.
    """

    k: tuple
    eigenvalues: np.ndarray
    right_u: np.ndarray
    left_x: np.ndarray
    weights: dict
    trace_mode: int


def make_mode_set(ness: NessResult, p: ModelParams, k,
                  fallback: bool = False) -> ModeSet:
    basis = ness.c0.basis
    A = build_A_block(ness, p, k)
    dec = diagonalize(A, fallback=fallback)
    w = channel_weights(dec.right, basis)
    *_, tr_row = _ladder_parts(basis.n_max)
    # the trace row is an exact left null vector of A_k; the mode whose
    # left vector aligns with it is the trace direction
    scores = np.abs(dec.left @ tr_row.astype(complex)) / np.linalg.norm(dec.left, axis=1)
    near_zero = np.abs(dec.eigenvalues) < 1e3 * zero_mode_tol(p)
    if np.any(near_zero):
        cand = np.where(near_zero)[0]
        trace_mode = int(cand[np.argmax(scores[cand])])
    else:
        trace_mode = int(np.argmax(scores))
    return ModeSet(tuple(np.atleast_1d(k)), dec.eigenvalues, dec.right,
                   dec.left, w, trace_mode)


def full_spectrum(mode_set: ModeSet) -> np.ndarray:
    """Eigenvalues of the full two-block superoperator: the particle block
    spectrum together with its hole-block image -conj(w)."""
    w = mode_set.eigenvalues
    return np.concatenate([w, -np.conj(w)])


# ----------------------------------------------------------------------
# branch tracking and classification
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Band:
    """One tracked branch along a k-path."""

    label: str
    mode_indices: np.ndarray     # index into each ModeSet, shape (n_k,)
    omega: np.ndarray            # complex eigenvalue along the path
    weights: dict                # per-k channel weights of this band


def _track(mode_sets, overlap_min):
    n_modes = mode_sets[0].eigenvalues.size
    cols = [np.arange(n_modes)]
    for ms0, ms1 in zip(mode_sets[:-1], mode_sets[1:]):
        # |x_a(k_i)* . u_b(k_i+1)|, biorthonormal continuation
        ov = np.abs(ms0.left_x @ ms1.right_u)
        rows, assigned = linear_sum_assignment(-ov)
        worst = float(np.min(ov[rows, assigned]))
        if worst < overlap_min:
            raise TrackingError(ms0.k, ms1.k, worst)
        nxt = np.empty(n_modes, dtype=int)
        nxt[rows] = assigned
        cols.append(nxt[cols[-1]])
    return np.array(cols).T   # (n_modes, n_k): mode index per k for each band


def _band_from_track(mode_sets, track, label):
    omega = np.array([ms.eigenvalues[i] for ms, i in zip(mode_sets, track)])
    weights = {
        key: np.array([ms.weights[key][i] for ms, i in zip(mode_sets, track)])
        for key in mode_sets[0].weights
    }
    return Band(label, np.array(track), omega, weights)


def classify_branches(mode_sets, ness: NessResult, p: ModelParams,
                      overlap_min: float = 0.5) -> list[Band]:
    """Track bands along an ordered k-path and label them.

    Labels: "trace" (unphysical zero direction), and in the normal phase
    "QP"/"QH" (longest-lived particle/hole-dominated pair) plus "D" (purely
    dissipative density mode); in the broken phase "G" (gapless branch),
    "A" (its negative-energy partner) and "D".  Everything else is "other".
    """
    if len(mode_sets) < 2:
        raise ValueError("need an ordered path of at least two momenta")
    tracks = _track(mode_sets, overlap_min)
    n_bands = tracks.shape[0]
    tol0 = zero_mode_tol(p)

    trace_band = None
    for b in range(n_bands):
        if tracks[b, 0] == mode_sets[0].trace_mode:
            trace_band = b
            break

    omega = np.array([[ms.eigenvalues[tracks[b, i]]
                       for i, ms in enumerate(mode_sets)] for b in range(n_bands)])
    absU = np.array([[abs(ms.weights["U"][tracks[b, i]])
                      for i, ms in enumerate(mode_sets)] for b in range(n_bands)])
    absV = np.array([[abs(ms.weights["V"][tracks[b, i]])
                      for i, ms in enumerate(mode_sets)] for b in range(n_bands)])
    absN = np.array([[abs(ms.weights["N"][tracks[b, i]])
                      for i, ms in enumerate(mode_sets)] for b in range(n_bands)])

    labels = ["other"] * n_bands
    if trace_band is not None:
        labels[trace_band] = "trace"
    live = [b for b in range(n_bands) if b != trace_band]

    def imaginary_bands(cands):
        return [b for b in cands if np.max(np.abs(omega[b].real)) < 1e3 * tol0]

    if ness.phase == "IP":
        u_dom = [b for b in live if np.mean(absU[b]) > 10 * np.mean(absV[b])
                 and np.mean(absU[b]) > 1e-6]
        v_dom = [b for b in live if np.mean(absV[b]) > 10 * np.mean(absU[b])
                 and np.mean(absV[b]) > 1e-6]
        if u_dom:
            qp = min(u_dom, key=lambda b: np.mean(-omega[b].imag))
            labels[qp] = "QP"
        if v_dom:
            qh = min(v_dom, key=lambda b: np.mean(-omega[b].imag))
            labels[qh] = "QH"
        dens = [b for b in imaginary_bands(live) if labels[b] == "other"]
        if dens:
            labels[max(dens, key=lambda b: np.mean(absN[b]))] = "D"
    else:
        # Goldstone: the physical branch collapsing to zero at small k
        g = min(live, key=lambda b: abs(omega[b, 0]))
        labels[g] = "G"
        rest = [b for b in live if b != g]
        if rest:
            target = -np.conj(omega[g, -1])
            a = min(rest, key=lambda b: abs(omega[b, -1] - target))
            labels[a] = "A"
            rest = [b for b in rest if b != a]
        if rest:
            dens = imaginary_bands(rest) or rest
            labels[max(dens, key=lambda b: np.mean(absN[b]))] = "D"

    return [_band_from_track(mode_sets, tracks[b], labels[b]) for b in range(n_bands)]


def stability_check(mode_sets, p: ModelParams):
    """Largest mode growth rate over the sampled momenta.

    Stable iff max Im(omega) <= zero-mode tolerance once the trace zero
    direction is exempted.  Returns {"stable": bool, "worst": (k, index,
    Im omega)}.
    """
    if isinstance(mode_sets, ModeSet):
        mode_sets = [mode_sets]
    tol = zero_mode_tol(p)
    worst = None
    for ms in mode_sets:
        im = ms.eigenvalues.imag.copy()
        im[ms.trace_mode] = -np.inf
        a = int(np.argmax(im))
        if worst is None or im[a] > worst[2]:
            worst = (ms.k, a, float(im[a]))
    return {"stable": worst[2] <= tol, "worst": worst}
