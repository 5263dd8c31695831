"""Fluctuation block, eigendecomposition, weights, branches, stability."""

import numpy as np
import pytest

from drivenbh.basis import (
    GutzwillerState,
    LocalBasis,
    ModelParams,
    flat_index,
    seeded_mixed_state,
)
from drivenbh.equilibrium import HardCoreParams, hc_goldstone, hc_meanfield
from drivenbh.meanfield import (
    NessResult,
    PropagateOpts,
    analytic_ip_ness,
    build_superoperator,
    frame_weights,
    order_parameter,
    propagate_to_ness,
)
from drivenbh.spectrum import (
    DegeneracyError,
    TrackingError,
    build_A_block,
    channel_weights,
    classify_branches,
    diagonal_k_path,
    diagonalize,
    full_spectrum,
    lattice_dispersion,
    make_mode_set,
    single_particle_energy,
    stability_check,
    zero_mode_tol,
)

P_IP = ModelParams(J=0.5 / 4, Omega=0.5, Gamma_l=0.05, Gamma_p=1.0,
                   gamma=1e-3, d=2)


def ip_ness(p):
    st = analytic_ip_ness(p)
    return NessResult(c0=st, psi0=0j, omega0=0.0, phase="IP", converged=True,
                      residual=0.0, steps=0)


@pytest.fixture(scope="module")
def sfp_ness():
    p = ModelParams(J=3.0 / 4, Omega=0.3, Gamma_l=0.05, Gamma_p=1.0,
                    gamma=1e-3, d=2)
    res = propagate_to_ness(seeded_mixed_state(p.basis()), p,
                            PropagateOpts(tol=1e-9))
    assert res.phase == "SFP"
    return p, res


# ---------------------------------------------------------------- dispersion

def test_lattice_dispersion_convention():
    # band bottom at k = 0: J(0) = -zJ; zone corner: J(pi) = +2dJ
    assert lattice_dispersion((0.0, 0.0), P_IP) == pytest.approx(-4 * P_IP.J)
    assert lattice_dispersion((np.pi, np.pi), P_IP) == pytest.approx(4 * P_IP.J)
    assert single_particle_energy((0.0, 0.0), P_IP) == pytest.approx(0.0)
    assert single_particle_energy((np.pi, np.pi), P_IP) == pytest.approx(8 * P_IP.J)
    with pytest.raises(ValueError):
        lattice_dispersion((0.1,), P_IP)


# ---------------------------------------------------------------- A block

def test_a_block_zero_hopping_is_k_independent():
    p = P_IP.with_(J=0.0)
    ness = ip_ness(p)
    A0 = build_A_block(ness, p, (0.0, 0.0))
    A1 = build_A_block(ness, p, (1.1, 0.3))
    assert np.array_equal(A0, A1)
    L = build_superoperator(ness.c0, p)
    assert np.allclose(A0, L)   # omega0 = 0 in the normal phase


def test_a_block_frame_shift(sfp_ness):
    p, res = sfp_ness
    A = build_A_block(res, p, (0.2, 0.2))
    A_unshifted = A + res.omega0 * np.diag(frame_weights(res.c0.basis))
    L = build_superoperator(res.c0, p)
    Jk = lattice_dispersion((0.2, 0.2), p)
    # remove the superoperator part: what is left is the rank-2 hopping term
    rank2 = A_unshifted - L
    assert np.linalg.matrix_rank(rank2, tol=1e-10) == 2
    assert np.linalg.norm(rank2) == pytest.approx(
        abs(Jk) * np.linalg.norm(rank2 / Jk), rel=1e-12)


def test_qp_pair_energy_at_zone_center():
    # gapped particle/hole pair at +-[zJ(2 n0 - 1) + omega_c] deep in the
    # weak-coupling normal phase
    p = ModelParams(J=0.25 / 4, Omega=0.16, Gamma_l=0.05, Gamma_p=1.0,
                    gamma=1e-3, d=2, omega_c=2.0)
    ness = ip_ness(p)
    from drivenbh.meanfield import observables
    n0 = observables(ness.c0).n0
    ms = make_mode_set(ness, p, (0.0, 0.0))
    target = p.z * p.J * (2 * n0 - 1) + p.omega_c
    assert np.min(np.abs(ms.eigenvalues.real - target)) < 0.02 * abs(target)
    assert np.min(np.abs(ms.eigenvalues.real + target)) < 0.02 * abs(target)


# ---------------------------------------------------------------- eigensolver

def test_diagonalize_diagonal_matrix():
    dec = diagonalize(np.diag([1 + 2j, -3 + 0j]))
    assert np.allclose(sorted(dec.eigenvalues, key=lambda z: z.real),
                       [-3, 1 + 2j])
    assert np.allclose(dec.left @ dec.right, np.eye(2))


def test_diagonalize_pauli_y():
    dec = diagonalize(np.array([[0, 1j], [-1j, 0]]))
    assert np.allclose(np.sort(dec.eigenvalues.real), [-1, 1])
    assert np.max(np.abs(dec.eigenvalues.imag)) < 1e-12


def test_diagonalize_synthetic_recovery():
    rng = np.random.default_rng(11)
    D = np.diag(rng.normal(size=16) + 1j * rng.normal(size=16))
    V = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    A = V @ D @ np.linalg.inv(V)
    dec = diagonalize(A)
    assert np.allclose(np.sort_complex(dec.eigenvalues),
                       np.sort_complex(np.diag(D)), atol=1e-10)
    # biorthonormality and reconstruction
    assert np.allclose(dec.left @ dec.right, np.eye(16), atol=1e-8)
    assert np.allclose(dec.right @ np.diag(dec.eigenvalues) @ dec.left, A,
                       atol=1e-8)


def test_diagonalize_defective_raises():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])    # Jordan block
    with pytest.raises(DegeneracyError) as err:
        diagonalize(A)
    assert err.value.clusters   # offending cluster reported


# ---------------------------------------------------------------- weights

def test_channel_weights_diagonal_vector():
    basis = LocalBasis(1)
    u = np.zeros((16, 1), dtype=complex)
    u[flat_index(0, 0, -1, -1, basis), 0] = 0.6
    u[flat_index(1, 1, +1, +1, basis), 0] = 0.8
    w = channel_weights(u, basis)
    assert w["U"][0] == 0 and w["V"][0] == 0
    assert w["N"][0] == pytest.approx(0.8)
    assert w["C"][0] == 0.0


def test_channel_weights_particle_vector():
    basis = LocalBasis(1)
    u = np.zeros((16, 1), dtype=complex)
    u[flat_index(1, 0, +1, +1, basis), 0] = 1.0
    w = channel_weights(u, basis)
    assert w["U"][0] == pytest.approx(1.0)
    assert w["V"][0] == 0.0
    assert w["N"][0] == 0.0
    assert w["amp"][0] == pytest.approx(0.5)
    assert w["phase"][0] == pytest.approx(1 / 2j)
    assert w["C"][0] == pytest.approx(1.0)


def test_ip_selection_rules():
    # particle branch carries no hole weight and vice versa
    ness = ip_ness(P_IP)
    ks = diagonal_k_path(7, 2)
    mode_sets = [make_mode_set(ness, P_IP, k) for k in ks]
    bands = classify_branches(mode_sets, ness, P_IP)
    qp = next(b for b in bands if b.label == "QP")
    qh = next(b for b in bands if b.label == "QH")
    assert np.max(np.abs(qp.weights["V"])) < 1e-8
    assert np.max(np.abs(qh.weights["U"])) < 1e-8


# ---------------------------------------------------------------- structure

def test_full_spectrum_pairing():
    ness = ip_ness(P_IP)
    for q in (0.0, 0.9, 2.2):
        ms = make_mode_set(ness, P_IP, (q, q))
        w = full_spectrum(ms)
        for wi in w:
            assert np.min(np.abs(w + np.conj(wi))) < 1e-8


def test_single_zero_mode_in_normal_phase():
    ness = ip_ness(P_IP)
    tol = zero_mode_tol(P_IP)
    for q in (0.0, 0.7, 1.9, np.pi):
        ms = make_mode_set(ness, P_IP, (q, q))
        assert np.sum(np.abs(ms.eigenvalues) < tol) == 1
        # the zero direction is the steady state itself at every k
        u = ms.right_u[:, ms.trace_mode]
        overlap = abs(np.vdot(u, ness.c0.c)) / (np.linalg.norm(u) * np.linalg.norm(ness.c0.c))
        assert overlap > 1 - 1e-8


def test_goldstone_zero_mode_in_broken_phase(sfp_ness):
    p, res = sfp_ness
    tol = zero_mode_tol(p)
    ms0 = make_mode_set(res, p, (0.0, 0.0))
    n_zero = np.sum(np.abs(ms0.eigenvalues) < 1e3 * tol)
    assert n_zero >= 2            # trace direction plus the gapless branch
    ms1 = make_mode_set(res, p, (0.6, 0.6))
    im = ms1.eigenvalues.imag.copy()
    im[ms1.trace_mode] = -1.0
    others = np.abs(ms1.eigenvalues[np.arange(16) != ms1.trace_mode])
    assert np.sum(others < tol) == 0   # gapless only at the zone center


def test_equilibrium_limit_reproduces_closed_form():
    # photon-only superfluid without drive or loss: the fluctuation block
    # must carry the closed-form gapless branch of the equilibrium model
    J, wc = 0.7, 0.9
    hp = HardCoreParams(J=J, omega_c=wc, z=4)
    mf = hc_meanfield(hp)
    p = ModelParams(J=J, Omega=0.0, Gamma_l=0.0, Gamma_p=1e-30, gamma=0.0,
                    d=2, omega_c=wc, omega_at=0.0)
    basis = p.basis()
    c = np.zeros(basis.dim_rho, dtype=complex)
    psi0 = np.sqrt(mf.psi0_sq)
    c[flat_index(0, 0, -1, -1, basis)] = 1 - mf.n0
    c[flat_index(1, 1, -1, -1, basis)] = mf.n0
    c[flat_index(1, 0, -1, -1, basis)] = psi0
    c[flat_index(0, 1, -1, -1, basis)] = psi0
    st = GutzwillerState(c, basis)
    L = build_superoperator(st, p)
    assert np.max(np.abs(L @ st.c)) < 1e-12    # stationary at optimal filling
    ness = NessResult(c0=st, psi0=complex(psi0), omega0=0.0, phase="SFP",
                      converged=True, residual=0.0, steps=0)
    for q in (0.4, 1.1, 2.3):
        wG = hc_goldstone(hp, (q, q))
        ms = make_mode_set(ness, p, (q, q))
        assert np.min(np.abs(ms.eigenvalues - wG)) < 1e-10
        assert np.min(np.abs(ms.eigenvalues + wG)) < 1e-10


# ---------------------------------------------------------------- branches

def test_ip_band_structure_and_dmode():
    p = P_IP.with_(omega_c=2.0)
    ness = ip_ness(p)
    ks = diagonal_k_path(15, 2)
    mode_sets = [make_mode_set(ness, p, k) for k in ks]
    bands = classify_branches(mode_sets, ness, p)
    labels = {b.label for b in bands}
    assert {"QP", "QH", "D", "trace"} <= labels
    qp = next(b for b in bands if b.label == "QP")
    # deep Mott (n0 > 1/2): inverted band, minimal gap at the zone corner
    assert qp.omega[0].real > qp.omega[-1].real
    d_band = next(b for b in bands if b.label == "D")
    assert np.max(np.abs(d_band.omega.real)) < 1e-6
    assert np.max(np.abs(d_band.weights["N"])) > 0.1


def test_tracking_error_on_sparse_path():
    ness = ip_ness(P_IP)
    # two far-apart momenta cannot be joined unambiguously for every band
    mode_sets = [make_mode_set(ness, P_IP, k) for k in [(0.0, 0.0), (np.pi, np.pi)]]
    try:
        classify_branches(mode_sets, ness, P_IP, overlap_min=0.99999)
    except TrackingError as err:
        assert err.k_interval[0] == (0.0, 0.0)
    else:
        pytest.fail("expected a tracking ambiguity")


def test_dmode_damping_freezes_at_bare_loss_near_threshold():
    # approaching the transition the density mode decouples from the pump
    # and its damping settles on the bare photon loss; within 10% for weak
    # emitter coupling (deviation grows with Omega: 2.8% at 0.12, 6.3% at
    # 0.13, 16% at 0.16, 43% at 0.3)
    Om, Gl = 0.13, 0.05

    def growth(zj):
        p = ModelParams(J=zj / 4, Omega=Om, Gamma_l=Gl, Gamma_p=1.0,
                        gamma=1e-3, d=2)
        ms = make_mode_set(ip_ness(p), p, (0.0, 0.0))
        im = ms.eigenvalues.imag.copy()
        im[ms.trace_mode] = -np.inf
        return float(np.max(im))

    lo, hi = 0.1, 8.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if growth(mid) > 0 else (mid, hi)
    zjc = 0.5 * (lo + hi)
    p = ModelParams(J=0.999 * zjc / 4, Omega=Om, Gamma_l=Gl, Gamma_p=1.0,
                    gamma=1e-3, d=2)
    ms = make_mode_set(ip_ness(p), p, (0.0, 0.0))
    cands = [(ms.eigenvalues[a].imag, abs(ms.weights["N"][a]))
             for a in range(16)
             if a != ms.trace_mode and abs(ms.eigenvalues[a].real) < 1e-9]
    gamma_d = -max(cands, key=lambda r: r[1])[0]
    assert abs(gamma_d - Gl) / Gl < 0.10


def test_other_dimensions_supported():
    # chains and cubic arrays share all the machinery; z = 2d
    for d in (1, 3):
        p = ModelParams(J=0.5 / (2 * d), Omega=0.5, Gamma_l=0.05, Gamma_p=1.0,
                        gamma=1e-3, d=d)
        ness = ip_ness(p)
        k = tuple([0.7] * d)
        ms = make_mode_set(ness, p, k)
        w = full_spectrum(ms)
        assert max(np.min(np.abs(w + np.conj(wi))) for wi in w) < 1e-8


def test_stability_normal_phase():
    ness = ip_ness(P_IP)
    mode_sets = [make_mode_set(ness, P_IP, k) for k in diagonal_k_path(9, 2)]
    out = stability_check(mode_sets, P_IP)
    assert out["stable"]


def test_stability_weak_coupling_superfluid(sfp_ness):
    p, res = sfp_ness
    mode_sets = [make_mode_set(res, p, k) for k in diagonal_k_path(9, 2, k_min=1e-3)]
    assert stability_check(mode_sets, p)["stable"]


def test_instability_at_ultrastrong_coupling():
    p = ModelParams(J=6.5 / 4, Omega=1.0, Gamma_l=0.05, Gamma_p=1.0,
                    gamma=1e-3, d=2)
    res = propagate_to_ness(seeded_mixed_state(p.basis()), p,
                            PropagateOpts(tol=1e-8))
    assert res.phase == "SFP"
    qs = np.linspace(1e-3, np.pi, 40)
    mode_sets = [make_mode_set(res, p, (q, q)) for q in qs]
    out = stability_check(mode_sets, p)
    assert not out["stable"]
    k_worst = out["worst"][0]
    # growth at an incommensurate momentum, not at the zone center/corner
    assert 0.02 < k_worst[0] < 3.0