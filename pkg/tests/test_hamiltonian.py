import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.transform import Rotation

from spinbath.hamiltonian import (
    NotHermitianError,
    SpinSystem,
    build_hamiltonian,
    copper_porphyrin,
    eigensystem,
    system_eigen,
    zeeman_spectrum,
)
from spinbath.physical import HBAR, MU_B

from oracles import dense_real_embedding_eigs, m_block_levels

G_PERP, G_PAR = 2.1106, 2.0364
A_ZZ = 2 * math.pi * 611e6


def test_isotropic_zeeman():
    sys_ = SpinSystem(g=2 * np.eye(3), A=np.zeros((3, 3)))
    B = 0.7
    es = system_eigen(sys_, [0, 0, B])
    e = MU_B * B / HBAR
    assert np.allclose(es.energies, [-e] * 4 + [e] * 4, rtol=1e-12)


def test_zero_field_zero_hyperfine():
    sys_ = SpinSystem(A=np.zeros((3, 3)))
    H = build_hamiltonian(sys_, [0, 0, 0])
    assert np.abs(H).max() == 0.0


def test_copper_level_diagram():
    es = system_eigen(copper_porphyrin(), [0, 0, 0.3])
    assert es.n == 8
    assert np.sum(es.energies > 0) == 4 and np.sum(es.energies < 0) == 4


def test_copper_matches_m_block_closed_form():
    for B in (0.0, 0.01, 0.1, 0.3, 2.0):
        es = system_eigen(copper_porphyrin(), [0, 0, B])
        ref = m_block_levels(B)
        assert np.abs(es.energies - ref).max() <= 1e-9 * np.abs(ref).max()


def test_dense_oracle_at_0p1_tesla():
    H = build_hamiltonian(copper_porphyrin(), [0, 0, 0.1])
    es = eigensystem(H)
    ref = dense_real_embedding_eigs(H)
    assert np.abs(es.energies - ref).max() <= 1e-9 * np.linalg.norm(H, 2)


def test_diagonal_hamiltonian():
    es = eigensystem(np.diag([3.0, -1.0, 2.0, 0.5]).astype(complex))
    assert np.allclose(es.energies, [-1.0, 0.5, 2.0, 3.0])
    assert np.allclose(np.abs(es.states), np.eye(4)[:, [1, 3, 2, 0]])


def test_two_level_symmetric():
    d = 1.7
    es = eigensystem(np.array([[0, d], [d, 0]], dtype=complex))
    assert np.allclose(es.energies, [-d, d])
    assert np.allclose(es.states[:, 0], np.array([1, -1]) / math.sqrt(2))
    assert np.allclose(es.states[:, 1], np.array([1, 1]) / math.sqrt(2))


def test_non_hermitian_rejected():
    with pytest.raises(NotHermitianError):
        eigensystem(np.array([[0, 1], [0, 0]], dtype=complex))


def test_asymmetric_tensor_rejected():
    g = np.eye(3)
    g[0, 1] = 0.1
    with pytest.raises(ValueError):
        SpinSystem(g=g)


def test_degenerate_basis_is_deterministic():
    sys_ = copper_porphyrin()
    a, b = system_eigen(sys_, [0, 0, 0]), system_eigen(sys_, [0, 0, 0])
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.sigma, b.sigma)
    for s in a.sigma:
        assert np.abs(s - s.conj().T).max() < 1e-12


sym3 = arrays(np.float64, (3, 3), elements=st.floats(-3, 3))
vec3 = arrays(np.float64, (3,), elements=st.floats(-5, 5))


def _sym(m):
    return 0.5 * (m + m.T)


@settings(max_examples=40, deadline=None)
@given(g=sym3, a=sym3, B=vec3)
def test_eigensystem_invariants(g, a, B):
    sys_ = SpinSystem(g=_sym(g), A=_sym(a) * 1e9)
    H = build_hamiltonian(sys_, B)
    scale = max(1.0, np.abs(H).max())
    assert abs(np.trace(H)) <= 1e-12 * scale * 8
    es = eigensystem(H, sys_.electron_operators())
    assert abs(es.energies.sum()) <= 1e-9 * scale
    U = es.states
    assert np.abs(U.conj().T @ U - np.eye(8)).max() < 1e-10
    rec = U @ np.diag(es.energies) @ U.conj().T
    assert np.linalg.norm(rec - H) <= 1e-9 * max(np.linalg.norm(H), 1e-300) + 1e-300
    for s in es.sigma:
        assert np.abs(s - s.conj().T).max() < 1e-10


@settings(max_examples=30, deadline=None)
@given(g=sym3, a=sym3, B=vec3, seed=st.integers(0, 2**31 - 1))
def test_frame_covariance(g, a, B, seed):
    R = Rotation.random(random_state=seed).as_matrix()
    g, a = _sym(g), _sym(a) * 1e9
    s1 = SpinSystem(g=g, A=a)
    s2 = SpinSystem(g=R @ g @ R.T, A=R @ a @ R.T)
    e1 = system_eigen(s1, B).energies
    e2 = system_eigen(s2, R @ B).energies
    scale = max(1.0, np.abs(e1).max())
    assert np.abs(e1 - e2).max() <= 1e-10 * scale


def test_zeeman_linear_without_hyperfine():
    sys_ = copper_porphyrin().without_hyperfine()
    spec = zeeman_spectrum(sys_, np.linspace(0, 2, 21), (0.3, 0.4, 0.866))
    second = np.diff(spec.energies, n=2, axis=0)
    assert np.abs(second).max() <= 1e-9 * np.abs(spec.energies).max()


def test_zeeman_branches_are_continuous():
    grid = np.linspace(0.0, 0.1, 401)
    spec = zeeman_spectrum(copper_porphyrin(), grid)
    max_slope = MU_B * G_PERP / (2 * HBAR) * 1.2
    steps = np.abs(np.diff(spec.energies, axis=0))
    assert steps.max() <= max_slope * (grid[1] - grid[0])
    assert len(spec.header()) == 9
    assert spec.header()[1] == "E_1_cm-1"


def test_high_field_asymptote():
    """Paschen-Back limit: slopes +-mu_B g_par / 2 hbar, offsets +-m_I A_zz / 2."""
    B1, B2 = 1e4, 2e4
    e1 = system_eigen(copper_porphyrin(), [0, 0, B1]).energies
    e2 = system_eigen(copper_porphyrin(), [0, 0, B2]).energies
    slope = (e2 - e1) / (B2 - B1)
    offset = e1 - slope * B1
    s0 = MU_B * G_PAR / (2 * HBAR)
    # ascending: m_s = -1/2 with m_I = +3/2..-3/2, then m_s = +1/2 with m_I = -3/2..+3/2
    m_I = np.array([1.5, 0.5, -0.5, -1.5, -1.5, -0.5, 0.5, 1.5])
    m_s = np.array([-1] * 4 + [1] * 4)
    assert np.allclose(slope, m_s * s0, rtol=1e-6, atol=0)
    assert np.allclose(offset, m_s * m_I * A_ZZ / 2, rtol=1e-6, atol=0)
