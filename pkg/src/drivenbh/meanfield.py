"""Mean-field Lindblad dynamics of one lattice site and its steady states.

The site-factorized ansatz turns the lattice master equation into a
nonlinear single-site problem i dc/dt = L[c] c, where the only nonlinearity
is the mean-field hopping drive -J z (psi [adag, .] + psi* [a, .]) with
psi = sum_n sqrt(n+1) c[n+1, n, s, s].  Everything else (local energies,
Rabi coupling, photon loss, emitter pump and decay) is a constant
superoperator.  The steady state is reached by fixed-step RK4 propagation;
in the broken-symmetry phase it is a limit cycle, stationary in the frame
rotating at the lasing frequency omega0.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .basis import (
    GutzwillerState,
    LocalBasis,
    ModelParams,
    flat_index,
    seeded_mixed_state,
)

try:  # optional compiled inner loop; pure numpy otherwise
    from numba import njit as _njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

__all__ = [
    "IntegratorError",
    "SamplingError",
    "NessResult",
    "ObservableSet",
    "PropagateOpts",
    "ScanPoint",
    "superoperator_parts",
    "build_superoperator",
    "order_parameter",
    "observables",
    "rotating_frame_transform",
    "extract_limit_cycle_frequency",
    "analytic_ip_coefficients",
    "analytic_ip_ness",
    "critical_hopping_estimate",
    "equilibrium_frequency",
    "propagate_to_ness",
    "phase_scan",
    "onset_from_sweep",
    "omega_star_from_scan",
    "superfluid_character",
    "check_cutoff_convergence",
    "PSI_THRESHOLD",
]

# Order-parameter modulus separating the two phases; well above numerical
# noise at tol = 1e-8, well below physical condensate amplitudes.
PSI_THRESHOLD = 1e-4


class IntegratorError(RuntimeError):
    """Propagation lost the trace beyond the allowed drift."""


class SamplingError(ValueError):
    """Order-parameter samples unusable for frequency extraction."""


# ----------------------------------------------------------------------
# superoperator assembly
# ----------------------------------------------------------------------

def _spin_pairs():
    return [(-1, -1), (-1, +1), (+1, -1), (+1, +1)]


@lru_cache(maxsize=64)
def _ladder_parts(n_max: int):
    """Commutator superoperators for the photon ladder: HP = [adag, .],
    HQ = [a, .] and the extraction rows for psi, psi*, n and the trace."""
    basis = LocalBasis(n_max)
    D = basis.dim_rho
    HP = np.zeros((D, D), dtype=complex)
    HQ = np.zeros((D, D), dtype=complex)
    u_row = np.zeros(D)
    v_row = np.zeros(D)
    n_row = np.zeros(D)
    tr_row = np.zeros(D)
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            for s, sp in _spin_pairs():
                i = flat_index(n, m, s, sp, basis)
                if n >= 1:
                    HP[i, flat_index(n - 1, m, s, sp, basis)] += math.sqrt(n)
                if m + 1 <= n_max:
                    HP[i, flat_index(n, m + 1, s, sp, basis)] -= math.sqrt(m + 1)
                if n + 1 <= n_max:
                    HQ[i, flat_index(n + 1, m, s, sp, basis)] += math.sqrt(n + 1)
                if m >= 1:
                    HQ[i, flat_index(n, m - 1, s, sp, basis)] -= math.sqrt(m)
    for n in range(n_max + 1):
        for s in (-1, +1):
            i = flat_index(n, n, s, s, basis)
            n_row[i] = n
            tr_row[i] = 1.0
            if n + 1 <= n_max:
                u_row[flat_index(n + 1, n, s, s, basis)] = math.sqrt(n + 1)
                v_row[flat_index(n, n + 1, s, s, basis)] = math.sqrt(n + 1)
    return HP, HQ, u_row, v_row, n_row, tr_row


@lru_cache(maxsize=256)
def _static_part(n_max: int, omega_c: float, omega_at: float, U: float,
                 hard_core: bool, Omega: float, Gamma_l: float,
                 Gamma_p: float, gamma: float):
    """Hopping-independent superoperator: local energies, Rabi coupling and
    the three dissipators, in the i dc/dt = L c convention."""
    basis = LocalBasis(n_max)
    D = basis.dim_rho
    L = np.zeros((D, D), dtype=complex)
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            for s, sp in _spin_pairs():
                i = flat_index(n, m, s, sp, basis)
                diag = omega_c * (n - m) + omega_at * (s - sp) / 2.0
                if not hard_core:
                    diag += U * (n * (n - 1) - m * (m - 1))
                diag += -0.5j * Gamma_l * (n + m)
                diag += -0.25j * gamma * (2 + s + sp)
                diag += -0.25j * Gamma_p * (2 - s - sp)
                L[i, i] += diag
                # Rabi terms, Omega (adag sigma- + a sigma+)
                if s == -1 and n >= 1:
                    L[i, flat_index(n - 1, m, +1, sp, basis)] += Omega * math.sqrt(n)
                if sp == +1 and m + 1 <= n_max:
                    L[i, flat_index(n, m + 1, s, -1, basis)] -= Omega * math.sqrt(m + 1)
                if s == +1 and n + 1 <= n_max:
                    L[i, flat_index(n + 1, m, -1, sp, basis)] += Omega * math.sqrt(n + 1)
                if sp == -1 and m >= 1:
                    L[i, flat_index(n, m - 1, s, +1, basis)] -= Omega * math.sqrt(m)
                # jump (gain) parts of the dissipators
                if n + 1 <= n_max and m + 1 <= n_max:
                    L[i, flat_index(n + 1, m + 1, s, sp, basis)] += (
                        1j * Gamma_l * math.sqrt((n + 1) * (m + 1))
                    )
                if s == -1 and sp == -1:
                    L[i, flat_index(n, m, +1, +1, basis)] += 1j * gamma
                if s == +1 and sp == +1:
                    L[i, flat_index(n, m, -1, -1, basis)] += 1j * Gamma_p
    return L


def superoperator_parts(basis: LocalBasis, p: ModelParams):
    """(L_static, HP, HQ) with L[c] = L_static - J z (psi HP + psi* HQ)."""
    HP, HQ, *_ = _ladder_parts(basis.n_max)
    L0 = _static_part(basis.n_max, p.omega_c, p.omega_at_eff, p.U,
                      p.hard_core, p.Omega, p.Gamma_l, p.Gamma_p, p.gamma)
    return L0, HP, HQ


def order_parameter(state: GutzwillerState) -> complex:
    """psi = sum_{n, s} sqrt(n+1) c[n+1, n, s, s]."""
    _, _, u_row, *_ = _ladder_parts(state.basis.n_max)
    return complex(u_row @ state.c)


def build_superoperator(state: GutzwillerState, p: ModelParams) -> np.ndarray:
    """Full mean-field superoperator at the given state's order parameter."""
    L0, HP, HQ = superoperator_parts(state.basis, p)
    psi = order_parameter(state)
    return L0 - p.J * p.z * (psi * HP + np.conj(psi) * HQ)


def frame_weights(basis: LocalBasis) -> np.ndarray:
    """Diagonal rotating-frame generator n - m + (sigma - sigma')/2."""
    n, m, s, sp = basis.index_tables()
    return n - m + (s - sp) / 2.0


def rotating_frame_transform(state: GutzwillerState, omega0: float,
                             t: float) -> GutzwillerState:
    """c <- exp(+i omega0 t (n - m + (s - s')/2)) c; the frame in which a
    limit cycle at frequency omega0 is stationary."""
    w = frame_weights(state.basis)
    return GutzwillerState(state.c * np.exp(1j * omega0 * t * w), state.basis)


# ----------------------------------------------------------------------
# observables
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ObservableSet:
    n0: float
    dn2: float
    Sz: float
    Sminus: complex
    purity: float
    entropy: float
    rho_c: float


def observables(state: GutzwillerState, tol: float = 1e-10) -> ObservableSet:
    """Local expectation values of the site density matrix.

    The entropy comes from the eigenvalues of the reshaped density matrix
    with 0 ln 0 := 0; eigenvalues below -tol raise (positivity violation),
    those in [-1e-12, 0) are clipped to 0 before the log.
    """
    basis = state.basis
    n, m, s, sp = basis.index_tables()
    diag = (n == m) & (s == sp)
    cd = state.c[diag].real
    nd = n[diag]
    sd = s[diag]
    n0 = float(np.sum(nd * cd))
    dn2 = float(np.sum(nd**2 * cd) - n0**2)
    Sz = 0.5 * float(np.sum(sd * cd))
    sm_mask = (n == m) & (s == +1) & (sp == -1)
    Sminus = 0.5 * complex(np.sum(state.c[sm_mask]))
    purity = float(np.sum(np.abs(state.c) ** 2))
    rho = state.as_matrix()
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if np.min(evals) < -tol:
        raise ValueError(f"density matrix not positive: eigenvalue {np.min(evals):.3e}")
    evals = np.clip(evals, 0.0, None)
    nz = evals[evals > 0]
    entropy = float(-np.sum(nz * np.log(nz)))
    psi = order_parameter(state)
    return ObservableSet(n0=n0, dn2=dn2, Sz=Sz, Sminus=Sminus,
                         purity=purity, entropy=entropy, rho_c=abs(psi) ** 2)


def equilibrium_frequency(p: ModelParams, n0: float) -> float:
    """Hard-core equilibrium chemical potential z J (2 n0 - 1) + omega_c."""
    return p.z * p.J * (2.0 * n0 - 1.0) + p.omega_c


# ----------------------------------------------------------------------
# closed-form insulating steady state and critical hopping
# ----------------------------------------------------------------------

def analytic_ip_coefficients(p: ModelParams) -> dict[tuple[int, int, int, int], complex]:
    """Unnormalized hard-core insulating steady state, five independent
    coefficients keyed by (n, m, sigma, sigma').

    Valid for band-bottom pumping omega_at = omega_c - z J.
    """
    if p.Omega == 0:
        raise ZeroDivisionError("closed-form steady state undefined at Omega = 0")
    if abs((p.omega_c - p.omega_at_eff) - p.z * p.J) > 1e-12 * max(1.0, abs(p.omega_c)):
        raise ValueError("closed-form steady state assumes omega_at = omega_c - z J")
    zJ, Om, Gl, Gp, ga = p.z * p.J, p.Omega, p.Gamma_l, p.Gamma_p, p.gamma
    c0111 = 1.0 + 0.0j
    c11mm = (Gl + ga) / Gp + 0.0j
    c0011 = ga / Gp + (Gp * Gl / (4 * Om**2)) * (
        (2 * Om / Gp) ** 2 + (1 + (Gl + ga) / Gp) ** 2 + (2 * zJ / Gp) ** 2
    ) + 0.0j
    c00mm = (ga / Gp) * c0011 + (Gl + ga) * Gl / Gp**2
    # Real part sign fixed by stationarity: the coherence solves
    # x = Om (c11mm - c0011) (zJ - i(Gp+Gl+ga)/2) / (z^2 J^2 + ((Gp+Gl+ga)/2)^2)
    # and c0011 > c11mm, so Re x < 0.
    c01pm = -zJ * Gl / (Gp * Om) + 1j * (Gp + Gl + ga) * Gl / (2 * Gp * Om)
    return {
        (0, 1, +1, -1): c01pm,
        (0, 0, -1, -1): c00mm,
        (0, 0, +1, +1): c0011,
        (1, 1, -1, -1): c11mm,
        (1, 1, +1, +1): c0111,
    }


def analytic_ip_ness(p: ModelParams) -> GutzwillerState:
    """Normalized closed-form insulating steady state (hard core)."""
    basis = p.basis()
    if basis.n_max != 1:
        raise ValueError("closed-form steady state exists in the hard-core basis only")
    coeffs = analytic_ip_coefficients(p)
    c = np.zeros(basis.dim_rho, dtype=complex)
    for (n, m, s, sp), val in coeffs.items():
        c[flat_index(n, m, s, sp, basis)] = val
    c[flat_index(1, 0, -1, +1, basis)] = np.conj(coeffs[(0, 1, +1, -1)])
    trace = sum(coeffs[k] for k in coeffs if k[0] == k[1] and k[2] == k[3])
    return GutzwillerState(c / trace, basis)


def critical_hopping_estimate(p: ModelParams) -> float | None:
    """z J_c / Gamma_p ~ sqrt(Gamma_em/Gamma_l - 1) / 2, returned as J_c.

    None when Gamma_em < Gamma_l (no lasing threshold).
    """
    ratio = p.Gamma_em / p.Gamma_l
    if ratio < 1.0:
        return None
    return 0.5 * p.Gamma_p * math.sqrt(ratio - 1.0) / p.z


# ----------------------------------------------------------------------
# limit-cycle frequency
# ----------------------------------------------------------------------

def extract_limit_cycle_frequency(psi_samples, threshold: float = PSI_THRESHOLD) -> float:
    """Lasing frequency omega0 from uniform samples of psi(t).

    psi rotates as |psi| e^{-i omega0 t}, so omega0 is minus the
    least-squares slope of the unwrapped phase.  Returns 0 when |psi| never
    exceeds the threshold.
    """
    samples = list(psi_samples)
    ts = np.array([t for t, _ in samples], dtype=float)
    psis = np.array([p for _, p in samples], dtype=complex)
    if ts.size == 0 or np.all(np.abs(psis) <= threshold):
        return 0.0
    if ts.size < 3:
        raise SamplingError("need at least 3 samples above threshold")
    dts = np.diff(ts)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * max(abs(dts[0]), 1e-300):
        raise SamplingError("samples are not uniformly spaced")
    # longest trailing run above threshold
    above = np.abs(psis) > threshold
    start = ts.size
    while start > 0 and above[start - 1]:
        start -= 1
    if ts.size - start < 3:
        raise SamplingError("fewer than 3 trailing samples above threshold")
    ts, psis = ts[start:], psis[start:]
    ang = np.angle(psis)
    jumps = np.abs(np.diff(ang))
    jumps = np.minimum(jumps, 2 * np.pi - jumps)
    # wrapped steps approaching pi cannot be unwrapped unambiguously
    if np.max(jumps) > 0.85 * np.pi:
        raise SamplingError("phase advances close to pi per sample; sampling too coarse")
    phase = np.unwrap(ang)
    slope = np.polyfit(ts - ts[0], phase, 1)[0]
    return float(-slope)


# ----------------------------------------------------------------------
# propagation to the steady state
# ----------------------------------------------------------------------

def _rk4_span_numpy(L0, HP, HQ, u_row, hop, dt, c, psis):
    """Advance nsteps = len(psis) RK4 steps in place; psis[i] = psi after
    step i.  Returns the final state."""
    D = c.shape[0]
    M = np.vstack([L0, HP, HQ])

    def rhs(x):
        y = M @ x
        psi = u_row @ x
        return -1j * (y[:D] + hop * (psi * y[D:2 * D] + np.conj(psi) * y[2 * D:]))

    sixth = dt / 6.0
    for i in range(psis.shape[0]):
        k1 = rhs(c)
        k2 = rhs(c + 0.5 * dt * k1)
        k3 = rhs(c + 0.5 * dt * k2)
        k4 = rhs(c + dt * k3)
        c = c + sixth * (k1 + 2 * k2 + 2 * k3 + k4)
        psis[i] = u_row @ c
    return c


if _HAVE_NUMBA:
    @_njit(cache=True)
    def _rk4_span_jit(L0, HP, HQ, u_row, hop, dt, c, psis):  # pragma: no cover
        D = c.shape[0]
        k = np.empty((4, D), dtype=np.complex128)
        for i in range(psis.shape[0]):
            for stage in range(4):
                if stage == 0:
                    x = c
                elif stage == 1:
                    x = c + 0.5 * dt * k[0]
                elif stage == 2:
                    x = c + 0.5 * dt * k[1]
                else:
                    x = c + dt * k[2]
                psi = complex(0.0)
                for a in range(D):
                    psi += u_row[a] * x[a]
                for a in range(D):
                    acc = complex(0.0)
                    for b in range(D):
                        acc += (L0[a, b] + hop * (psi * HP[a, b]
                                + np.conj(psi) * HQ[a, b])) * x[b]
                    k[stage, a] = -1j * acc
            c = c + (dt / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
            psi = complex(0.0)
            for a in range(D):
                psi += u_row[a] * c[a]
            psis[i] = psi
        return c

    def _rk4_span(L0, HP, HQ, u_row, hop, dt, c, psis):
        return _rk4_span_jit(np.ascontiguousarray(L0), np.ascontiguousarray(HP),
                             np.ascontiguousarray(HQ), u_row.astype(complex),
                             complex(hop), float(dt), c, psis)
else:  # pragma: no cover
    _rk4_span = _rk4_span_numpy


@dataclass(frozen=True)
class PropagateOpts:
    """Integrator settings; None fields resolve against the model rates."""

    dt: float | None = None            # default 1e-2 / Gamma_p
    t_max: float | None = None         # default 4000 / Gamma_p
    tol: float = 1e-8
    window: float | None = None        # residual window, default 10 / Gamma_l
    check_interval: float | None = None  # default 0.5 / Gamma_p
    psi_threshold: float = PSI_THRESHOLD

    def resolved(self, p: ModelParams):
        dt = self.dt if self.dt is not None else 1e-2 / p.Gamma_p
        t_max = self.t_max if self.t_max is not None else 4000.0 / p.Gamma_p
        if self.window is not None:
            window = self.window
        elif p.Gamma_l > 0:
            window = 10.0 / p.Gamma_l
        else:
            window = 10.0 / p.Gamma_p
        check = (self.check_interval if self.check_interval is not None
                 else 0.5 / p.Gamma_p)
        return dt, t_max, self.tol, window, check


@dataclass(frozen=True)
class NessResult:
    """Converged (or timed-out) steady state and its diagnostics."""

    c0: GutzwillerState
    psi0: complex
    omega0: float
    phase: str                     # "IP" or "SFP"
    converged: bool
    residual: float
    steps: int
    warm_started: bool = False

    @property
    def is_superfluid(self) -> bool:
        return self.phase == "SFP"


def propagate_to_ness(init: GutzwillerState, p: ModelParams,
                      opts: PropagateOpts | None = None) -> NessResult:
    """RK4 propagation of i dc/dt = L[c] c until the steady state.

    The superoperator is reassembled at every substage (psi is state
    dependent).  Convergence in the normal phase is a plain state
    difference over the trailing window; in the broken phase the state is
    first mapped to the rotating frame at the current omega0 estimate and
    the frame-invariant observables (|psi|, n0, purity) are required to
    drift below tol as well.
    """
    opts = opts or PropagateOpts()
    dt, t_max, tol, window, check_interval = opts.resolved(p)
    if dt <= 0:
        raise ValueError("dt must be > 0")
    basis = init.basis
    L0, HP, HQ = superoperator_parts(basis, p)
    _, _, u_row, *_ = _ladder_parts(basis.n_max)
    hop = -p.J * p.z
    w = frame_weights(basis)
    n_idx, m_idx, s_idx, sp_idx = basis.index_tables()
    diag_mask = (n_idx == m_idx) & (s_idx == sp_idx)
    n_diag = n_idx[diag_mask]

    max_steps = int(math.ceil(t_max / dt))
    steps_per_check = max(1, min(round(check_interval / dt), max_steps))
    check_dt = steps_per_check * dt
    # psi ring buffer spanning the residual window (one sample per step)
    buf_len = max(int(math.ceil(window / dt)) + 1, 8)
    psi_buf = np.zeros(buf_len, dtype=complex)
    n_window_checks = max(1, int(math.ceil(window / check_dt)))

    c = np.array(init.c, dtype=complex)
    psi_buf[0] = u_row @ c
    c_prev = c.copy()
    residuals: list[float] = []
    omega0_est = 0.0
    step = 0
    converged = False
    span = np.empty(steps_per_check, dtype=complex)

    def omega_estimate(prev):
        n_filled = min(step + 1, buf_len)
        if n_filled < buf_len:
            seg = psi_buf[:n_filled]
        else:
            seg = np.roll(psi_buf, -((step + 1) % buf_len))
        # trailing contiguous run above threshold; transients poison the fit
        below_rev = np.abs(seg[::-1]) <= opts.psi_threshold
        runlen = int(np.argmax(below_rev)) if below_rev.any() else seg.size
        seg = seg[seg.size - runlen:]
        if seg.size < 16:
            return prev
        # per-step increment is unaliased (|omega| dt << pi); it bounds the
        # decimation stride so the subsampled phase stays resolvable
        w_inst = abs(np.angle(seg[-1] * np.conj(seg[-2]))) / dt
        stride = max(1, seg.size // 512)
        while stride > 1 and w_inst * stride * dt > 2.5:
            stride //= 2
        if seg.size // stride < 3:
            return prev
        sub = seg[::stride]
        ang = np.unwrap(np.angle(sub))
        t = np.arange(sub.size) * (stride * dt)
        t = t - t.mean()
        slope = float(t @ (ang - ang.mean()) / (t @ t))
        return -slope

    while step < max_steps:
        nsteps = min(steps_per_check, max_steps - step)
        c = _rk4_span(L0, HP, HQ, u_row, hop, dt, c, span[:nsteps])
        idx = (step + 1 + np.arange(nsteps)) % buf_len
        psi_buf[idx] = span[:nsteps]
        step += nsteps
        if nsteps < steps_per_check:
            break
        trace = np.sum(c[diag_mask]).real
        if not abs(trace - 1.0) <= 100 * tol:   # catches NaN/inf blow-up too
            raise IntegratorError(
                f"trace drifted to {trace!r} after {step} steps (dt too large?)")
        psi_now = u_row @ c
        if abs(psi_now) > opts.psi_threshold:
            omega0_est = omega_estimate(omega0_est)
            c_ref = c_prev * np.exp(-1j * omega0_est * check_dt * w)
            res = float(np.max(np.abs(c - c_ref)))
            # frame-invariant drifts
            d_abs_psi = abs(abs(psi_now) - abs(u_row @ c_prev))
            d_n0 = abs(np.sum(n_diag * (c - c_prev)[diag_mask]).real)
            d_pur = abs(np.sum(np.abs(c) ** 2) - np.sum(np.abs(c_prev) ** 2))
            res = max(res, d_abs_psi, d_n0, d_pur)
        else:
            res = float(np.max(np.abs(c - c_prev)))
        residuals.append(res)
        c_prev = c.copy()
        if len(residuals) >= n_window_checks and \
                max(residuals[-n_window_checks:]) < tol:
            converged = True
            break

    n_filled = min(step + 1, buf_len)
    if n_filled < buf_len:
        seg = psi_buf[:n_filled]
        t0 = 0.0
    else:
        seg = np.roll(psi_buf, -((step + 1) % buf_len))
        t0 = (step + 1 - buf_len) * dt
    samples = [(t0 + i * dt, seg[i]) for i in range(seg.size)]
    try:
        omega0 = extract_limit_cycle_frequency(samples, opts.psi_threshold)
    except SamplingError:
        # mid-transient timeout; fall back to the in-loop estimate
        omega0 = omega0_est
    state = GutzwillerState(c, basis)
    psi0 = order_parameter(state)
    phase = "SFP" if abs(psi0) > opts.psi_threshold else "IP"
    if phase == "IP":
        omega0 = 0.0
    final_res = max(residuals[-n_window_checks:]) if residuals else float("inf")
    return NessResult(c0=state, psi0=psi0, omega0=omega0, phase=phase,
                      converged=converged, residual=final_res, steps=step)


# ----------------------------------------------------------------------
# parameter scans
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ScanPoint:
    index: int
    params: ModelParams
    result: NessResult | None
    obs: ObservableSet | None
    error: str | None = None


def _run_chain(args):
    chain, p_list, opts, warm_start, eps, n_max = args
    out = []
    prev_state = None
    for idx in chain:
        p = p_list[idx]
        basis = p.basis(n_max)
        if warm_start and prev_state is not None and prev_state.basis == basis:
            init, warmed = prev_state, True
        else:
            init, warmed = seeded_mixed_state(basis, eps), False
        try:
            res = propagate_to_ness(init, p, opts)
            res = replace(res, warm_started=warmed)
            obs = observables(res.c0)
            out.append(ScanPoint(idx, p, res, obs))
            prev_state = res.c0
        except Exception as exc:  # recorded, scan continues
            out.append(ScanPoint(idx, p, None, None, error=f"{type(exc).__name__}: {exc}"))
            prev_state = None
    return out


def phase_scan(p_grid, opts: PropagateOpts | None = None, *,
               warm_start: bool = True, workers: int = 1,
               chains=None, seed_eps: float = 1e-3,
               n_max: int | None = None) -> list[ScanPoint]:
    """Steady state at every grid point, order-stable by grid index.

    chains: index chains sharing a warm start (default: one chain over the
    whole grid).  Chains are independent, so they distribute across a
    process pool without affecting the results.
    """
    p_list = list(p_grid)
    opts = opts or PropagateOpts()
    if chains is None:
        chains = [list(range(len(p_list)))]
    jobs = [(chain, p_list, opts, warm_start, seed_eps, n_max) for chain in chains]
    if workers <= 1 or len(jobs) == 1:
        chunks = [_run_chain(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_chain, jobs))
    points = [pt for chunk in chunks for pt in chunk]
    points.sort(key=lambda pt: pt.index)
    return points


def onset_from_sweep(js, abs_psis, threshold: float = PSI_THRESHOLD,
                     n_fit: int = 6):
    """Transition point and growth exponent from a 1-D hopping sweep.

    |psi0|^2 grows linearly in J - J_c at onset, so J_c is the intercept of
    a linear fit of |psi0|^2 over the first n_fit points above threshold;
    the exponent is the slope of log|psi0| against log(J - J_c) there.
    Returns (j_c, exponent) or (None, None) when no onset is found.
    """
    js = np.asarray(js, dtype=float)
    psis = np.asarray(abs_psis, dtype=float)
    above = psis > threshold
    if not np.any(above) or np.all(above):
        return None, None
    first = int(np.argmax(above))
    sel = slice(first, min(first + n_fit, js.size))
    a, b = np.polyfit(js[sel], psis[sel] ** 2, 1)
    j_c = -b / a
    mask = js[sel] > j_c
    x = np.log(js[sel][mask] - j_c)
    y = np.log(psis[sel][mask])
    expo = float(np.polyfit(x, y, 1)[0]) if x.size >= 2 else None
    return float(j_c), expo


def omega_star_from_scan(points) -> float | None:
    """Critical lasing frequency: omega0 of the smallest-amplitude
    superfluid point of a scan (the reference line for response maps).

    None when the scan holds no superfluid point.
    """
    sfp = [pt for pt in points
           if pt.error is None and pt.result.phase == "SFP"]
    if not sfp:
        return None
    smallest = min(sfp, key=lambda pt: abs(pt.result.psi0))
    return smallest.result.omega0


def superfluid_character(js, n0s, rho_cs):
    """J_m (condensate-density maximum) and the hole-superfluid mask.

    Hole superfluidity is flagged where rho_c grows with J while n0 drops.
    """
    js = np.asarray(js, dtype=float)
    n0s = np.asarray(n0s, dtype=float)
    rho_cs = np.asarray(rho_cs, dtype=float)
    j_m = float(js[np.argmax(rho_cs)])
    drho = np.gradient(rho_cs, js)
    dn = np.gradient(n0s, js)
    return j_m, (drho > 0) & (dn < 0)


def check_cutoff_convergence(p: ModelParams, n_max: int,
                             opts: PropagateOpts | None = None):
    """Soft-core cutoff check: (|psi| shift, n0 shift) from n_max to n_max+1."""
    if p.hard_core:
        raise ValueError("cutoff convergence applies to soft-core runs")
    outs = []
    for nm in (n_max, n_max + 1):
        res = propagate_to_ness(seeded_mixed_state(p.basis(nm)), p, opts)
        outs.append((abs(res.psi0), observables(res.c0).n0))
    return abs(outs[1][0] - outs[0][0]), abs(outs[1][1] - outs[0][1])
