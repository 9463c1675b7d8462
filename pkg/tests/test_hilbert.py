import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_single
from rydgrover.hilbert import (
    LOST,
    Q0,
    Q1,
    RYD,
    RegisterConfig,
    Scheme,
    basis_index,
    basis_levels,
    embed_single,
    initial_state,
    sigma,
)


def test_initial_state_direct_k2():
    psi = initial_state(RegisterConfig(2))
    assert psi.shape == (16,)
    assert psi[0] == 1 and np.count_nonzero(psi) == 1


def test_initial_state_ancilla_k2():
    psi = initial_state(RegisterConfig(2, Scheme.ANCILLA))
    assert psi.shape == (32,)
    assert psi[0] == 1 and np.linalg.norm(psi) == 1


def test_initial_state_k4_dim():
    assert initial_state(RegisterConfig(4)).shape == (256,)


@pytest.mark.parametrize("k", [0, 7, 2.5])
def test_bad_k_rejected(k):
    with pytest.raises(ValueError):
        RegisterConfig(k)


@pytest.mark.parametrize("marked", ["0", "012", "0a"])
def test_bad_marked_rejected(marked):
    with pytest.raises(ValueError):
        RegisterConfig(2, marked=marked)


@pytest.mark.parametrize("levels, expected", [
    ((Q1, Q0), 4),
    ((Q0, RYD), 2),
    ((LOST, Q0, Q1), 49),
])
def test_basis_index_examples(levels, expected):
    assert basis_index(levels) == expected


def test_basis_index_ancilla_is_least_significant():
    assert basis_index((Q1, Q0), ancilla=1) == 4 * 2 + 1


def test_basis_index_rejects_out_of_range():
    with pytest.raises(ValueError):
        basis_index((4, 0))
    with pytest.raises(ValueError):
        basis_index((0, 0), ancilla=2)


@pytest.mark.parametrize("k, scheme", [(1, "direct"), (2, "ancilla"), (3, "direct"), (3, "ancilla")])
def test_basis_roundtrip_all_indices(k, scheme):
    cfg = RegisterConfig(k, Scheme(scheme))
    for idx in range(cfg.dim):
        levels, anc = basis_levels(idx, cfg)
        assert basis_index(levels, anc) == idx


def test_embed_identity_is_identity():
    cfg = RegisterConfig(3, Scheme.ANCILLA)
    for atom in range(3):
        assert np.array_equal(embed_single(np.eye(4), atom, cfg), np.eye(cfg.dim))
    assert np.array_equal(embed_single(np.eye(2), 3, cfg), np.eye(cfg.dim))


def test_sigma11_atom0_k2():
    m = embed_single(sigma(Q1, Q1), 0, RegisterConfig(2))
    assert np.count_nonzero(m - np.diag(np.diag(m))) == 0
    assert np.flatnonzero(np.diag(m)).tolist() == [4, 5, 6, 7]


@pytest.mark.parametrize("k, ancilla", [(1, False), (2, False), (2, True), (3, True)])
def test_embed_matches_loop_oracle(k, ancilla):
    cfg = RegisterConfig(k, Scheme.ANCILLA if ancilla else Scheme.DIRECT)
    for atom in range(k):
        op = sigma(Q1, Q0)
        assert np.array_equal(embed_single(op, atom, cfg), oracle_single(op, atom, k, ancilla))
    if ancilla:
        op = sigma(1, 0, 2)
        assert np.array_equal(embed_single(op, k, cfg), oracle_single(op, k, k, True))


def test_embed_rejects_bad_atom_or_shape():
    cfg = RegisterConfig(2)
    with pytest.raises(ValueError):
        embed_single(np.eye(4), 2, cfg)
    with pytest.raises(ValueError):
        embed_single(np.eye(2), 0, cfg)


def _random_matrix(seed, n):
    r = np.random.default_rng(seed)
    return r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 3), st.booleans())
def test_distinct_atoms_commute(seed, k, ancilla):
    cfg = RegisterConfig(k, Scheme.ANCILLA if ancilla else Scheme.DIRECT)
    a = embed_single(_random_matrix(seed, 4), 0, cfg)
    b = embed_single(_random_matrix(seed + 1, 4), k - 1, cfg)
    assert np.array_equal(a @ b, b @ a)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2))
def test_embedding_preserves_hermitian_and_unitary(seed, atom):
    cfg = RegisterConfig(3)
    m = _random_matrix(seed, 4)
    h = m + m.conj().T
    u, _ = np.linalg.qr(m)
    eh = embed_single(h, atom, cfg)
    eu = embed_single(u, atom, cfg)
    assert np.allclose(eh, eh.conj().T, atol=0)
    assert np.allclose(eu @ eu.conj().T, np.eye(cfg.dim), atol=1e-12)
