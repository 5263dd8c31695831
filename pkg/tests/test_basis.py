import numpy as np
import pytest

from drivenbh.basis import (
    GutzwillerState,
    LocalBasis,
    ModelParams,
    flat_index,
    maximally_mixed_state,
    pure_state,
    seeded_mixed_state,
    unflatten_index,
    vacuum_state,
    validate_state,
)


def test_dim_rho():
    assert LocalBasis(1).dim_rho == 16
    assert LocalBasis(3).dim_rho == 64
    for n_max in range(1, 5):
        b = LocalBasis(n_max)
        assert b.dim_rho == (n_max + 1) ** 2 * 4
        assert b.dim_local == 2 * (n_max + 1)


def test_first_element_and_order():
    b = LocalBasis(1)
    assert flat_index(0, 0, -1, -1, b) == 0
    # sigma' is the fastest index, then sigma, then m, then n
    assert flat_index(0, 0, -1, +1, b) == 1
    assert flat_index(0, 0, +1, -1, b) == 2
    assert flat_index(0, 1, -1, -1, b) == 4
    assert flat_index(1, 0, -1, -1, b) == 8


@pytest.mark.parametrize("n_max", [1, 2, 3])
def test_flat_index_bijection(n_max):
    b = LocalBasis(n_max)
    seen = set()
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            for s in (-1, +1):
                for sp in (-1, +1):
                    i = flat_index(n, m, s, sp, b)
                    assert 0 <= i < b.dim_rho
                    assert i not in seen
                    seen.add(i)
                    assert unflatten_index(i, b) == (n, m, s, sp)
    assert len(seen) == b.dim_rho


def test_flat_index_range_errors():
    b = LocalBasis(1)
    with pytest.raises(IndexError):
        flat_index(2, 0, -1, -1, b)
    with pytest.raises(IndexError):
        flat_index(0, -1, -1, -1, b)
    with pytest.raises(IndexError):
        flat_index(0, 0, 0, -1, b)
    with pytest.raises(IndexError):
        unflatten_index(16, b)


def test_model_params_derived():
    p = ModelParams(J=0.2, Omega=0.5, Gamma_l=0.05, Gamma_p=1.0, gamma=1e-3, d=2)
    assert p.z == 4
    assert p.G == pytest.approx(0.25 / 0.05)
    assert p.Gamma_em == pytest.approx(1.0)
    # band-bottom pumping by default, explicit value wins
    assert p.omega_at_eff == pytest.approx(p.omega_c - p.z * p.J)
    assert p.with_(omega_at=0.3).omega_at_eff == 0.3
    # derived values follow parameter changes (never stored stale)
    p2 = p.with_(Omega=0.1, d=3)
    assert p2.z == 6
    assert p2.Gamma_em == pytest.approx(4 * 0.01)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(J=0.1, Omega=0.1, Gamma_l=0.05, Gamma_p=0.0, gamma=0.0)
    with pytest.raises(ValueError):
        ModelParams(J=0.1, Omega=-0.1, Gamma_l=0.05, Gamma_p=1.0, gamma=0.0)
    with pytest.raises(ValueError):
        ModelParams(J=0.1, Omega=0.1, Gamma_l=0.05, Gamma_p=1.0, gamma=0.0, d=0)


def test_basis_selection():
    hard = ModelParams(J=0.1, Omega=0.1, Gamma_l=0.05, Gamma_p=1.0, gamma=0.0)
    assert hard.basis().n_max == 1
    with pytest.raises(ValueError):
        hard.basis(2)
    soft = hard.with_(hard_core=False, U=0.5)
    assert soft.basis(3).n_max == 3
    with pytest.raises(ValueError):
        soft.basis()


def test_state_is_frozen():
    st = vacuum_state(LocalBasis(1))
    with pytest.raises(ValueError):
        st.c[0] = 2.0


def test_validate_pure_state():
    b = LocalBasis(1)
    assert validate_state(pure_state(b, 1, +1)) == []
    assert validate_state(maximally_mixed_state(b)) == []


def test_validate_hermiticity_violation():
    b = LocalBasis(1)
    c = np.zeros(16, dtype=complex)
    c[flat_index(0, 0, -1, -1, b)] = 1.0
    c[flat_index(0, 1, +1, -1, b)] = 0.3
    c[flat_index(1, 0, -1, +1, b)] = 0.2   # should be conj(0.3)
    out = validate_state(GutzwillerState(c, b))
    assert any("hermiticity" in v for v in out)


def test_validate_trace_and_positivity():
    b = LocalBasis(1)
    c = np.zeros(16, dtype=complex)
    c[flat_index(0, 0, -1, -1, b)] = 1.4
    out = validate_state(GutzwillerState(c, b))
    assert any("trace" in v for v in out)
    c2 = np.zeros(16, dtype=complex)
    c2[flat_index(0, 0, -1, -1, b)] = 1.2
    c2[flat_index(1, 1, +1, +1, b)] = -0.2
    out2 = validate_state(GutzwillerState(c2, b))
    assert any("negative diagonal" in v for v in out2)


def test_seeded_state_is_physical():
    st = seeded_mixed_state(LocalBasis(1))
    assert validate_state(st, tol=1e-2) == []
    assert st.trace() == pytest.approx(1.0)
