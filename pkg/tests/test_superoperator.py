"""The single-site generator against an independent kron-built reference."""

import numpy as np
import pytest

from _oracles import dense_lindbladian, perm_to_flat, reference_evolution
from drivenbh.basis import (
    GutzwillerState,
    LocalBasis,
    ModelParams,
    flat_index,
    seeded_mixed_state,
)
from drivenbh.meanfield import (
    PropagateOpts,
    build_superoperator,
    order_parameter,
    propagate_to_ness,
    superoperator_parts,
)

P_REF = ModelParams(J=0.0, Omega=0.37, Gamma_l=0.06, Gamma_p=1.0, gamma=2e-3,
                    omega_c=0.8, d=2)


def test_hamiltonian_diagonal_limit():
    # with Omega = J = 0 and no dissipation only the local energies survive
    p = ModelParams(J=0.0, Omega=0.0, Gamma_l=0.0, Gamma_p=1e-30, gamma=0.0,
                    omega_c=1.3, omega_at=0.4, hard_core=False, U=0.7, d=2)
    basis = LocalBasis(2)
    L = build_superoperator(seeded_mixed_state(basis), p)
    off = L - np.diag(np.diag(L))
    assert np.max(np.abs(off)) < 1e-25
    n, m, s, sp = basis.index_tables()
    expected = 1.3 * (n - m) + 0.7 * (n * (n - 1) - m * (m - 1)) + 0.4 * (s - sp) / 2
    assert np.allclose(np.diag(L).real, expected)
    assert np.max(np.abs(np.diag(L).imag)) < 1e-15


def test_no_state_dependence_at_zero_hopping():
    basis = LocalBasis(1)
    s1 = seeded_mixed_state(basis)
    c2 = np.zeros(16, dtype=complex)
    c2[flat_index(1, 1, +1, +1, basis)] = 1.0
    c2[flat_index(1, 0, -1, -1, basis)] = 0.2
    c2[flat_index(0, 1, -1, -1, basis)] = 0.2
    s2 = GutzwillerState(c2, basis)
    L1 = build_superoperator(s1, P_REF)
    L2 = build_superoperator(s2, P_REF)
    assert np.array_equal(L1, L2)


def test_hopping_term_tracks_order_parameter():
    basis = LocalBasis(1)
    p = P_REF.with_(J=0.21)
    s = seeded_mixed_state(basis)
    L0, HP, HQ = superoperator_parts(basis, p)
    psi = order_parameter(s)
    expected = L0 - p.J * p.z * (psi * HP + np.conj(psi) * HQ)
    assert np.allclose(build_superoperator(s, p), expected)


def test_generator_matches_kron_reference():
    # decoupled site: the production generator (i dc/dt = L c) must equal
    # i * (kron-built drho/dt generator) after the index permutation
    basis = LocalBasis(1)
    L = build_superoperator(seeded_mixed_state(basis), P_REF)
    gen = dense_lindbladian(P_REF, n_max=1)
    perm = perm_to_flat(basis)
    gen_flat = (1j * gen)[np.ix_(perm, perm)]
    assert np.max(np.abs(L - gen_flat)) < 1e-13


def test_generator_matches_kron_reference_softcore():
    p = P_REF.with_(hard_core=False, U=0.9)
    basis = LocalBasis(2)
    L = build_superoperator(seeded_mixed_state(basis), p)
    perm = perm_to_flat(basis)
    gen_flat = (1j * dense_lindbladian(p, n_max=2))[np.ix_(perm, perm)]
    assert np.max(np.abs(L - gen_flat)) < 1e-13


def test_trace_and_hermiticity_preserved_under_rk4():
    p = P_REF.with_(J=0.15)
    init = seeded_mixed_state(LocalBasis(1))
    res = propagate_to_ness(init, p, PropagateOpts(t_max=40.0, tol=1e-14))
    rho = res.c0.as_matrix()
    assert abs(np.trace(rho) - 1.0) < 1e-9
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-9


def test_compiled_and_numpy_steppers_agree():
    # the optional compiled inner loop must reproduce the numpy stepper
    from drivenbh.meanfield import _ladder_parts, _rk4_span, _rk4_span_numpy
    p = P_REF.with_(J=0.3)
    basis = LocalBasis(1)
    L0, HP, HQ = superoperator_parts(basis, p)
    _, _, u_row, *_ = _ladder_parts(1)
    c0 = np.array(seeded_mixed_state(basis).c)
    span_a = np.empty(200, dtype=complex)
    span_b = np.empty(200, dtype=complex)
    ca = _rk4_span(L0, HP, HQ, u_row, -p.J * p.z, 0.01, c0.copy(), span_a)
    cb = _rk4_span_numpy(L0, HP, HQ, u_row, -p.J * p.z, 0.01, c0.copy(), span_b)
    assert np.max(np.abs(ca - cb)) < 1e-13
    assert np.max(np.abs(span_a - span_b)) < 1e-13


def test_rk4_step_against_exact_propagator():
    # one short stretch of the decoupled-site evolution against expm
    p = P_REF
    init = seeded_mixed_state(LocalBasis(1))
    res = propagate_to_ness(init, p, PropagateOpts(dt=1e-3, t_max=1.0, tol=1e-16))
    t = res.steps * 1e-3
    ref = reference_evolution(p, np.array(init.c), [t])[0]
    assert np.max(np.abs(res.c0.c - ref)) < 1e-11
