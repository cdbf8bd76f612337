import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from multirail import (ChainSpec, EigensolverError, build_chain, propagator, spectrum,
                       transfer_amplitude)
from multirail.chain import SingleExcitationOperator

from conftest import random_chain, spectrum_of

SQ2 = np.sqrt(2)


def test_two_site_xy_matrix():
    h = build_chain(ChainSpec(2, "xy", (1.0,), (0.0, 0.0))).matrix
    np.testing.assert_array_equal(h, [[0, 1], [1, 0]])


def test_three_site_xy_spectrum():
    s = spectrum_of(ChainSpec.uniform(3, "xy"))
    np.testing.assert_allclose(s.eigenvalues, [-SQ2, 0, SQ2], atol=1e-14)
    h = build_chain(ChainSpec.uniform(3, "xy"))
    assert h.is_tridiagonal()
    np.testing.assert_array_equal(np.diag(h.matrix), 0)


def test_ring_of_four_has_double_zero():
    spec = ChainSpec.uniform(4, "xy", periodic=True)
    h = build_chain(spec).matrix
    assert h[0, 3] == h[3, 0] == 1.0
    # circulant oracle: eigenvalues 2 cos(2 pi k / 4)
    expected = np.sort(2 * np.cos(2 * np.pi * np.arange(4) / 4))
    np.testing.assert_allclose(spectrum(h).eigenvalues, expected, atol=1e-14)
    assert np.sum(np.abs(spectrum(h).eigenvalues) < 1e-12) == 2


def test_heisenberg_diagonal_carries_bond_energies():
    spec = ChainSpec(4, "heisenberg", (1.0, 2.0, 0.5), (0.1, 0.2, 0.3, 0.4))
    h = build_chain(spec).matrix
    np.testing.assert_allclose(np.diag(h), [0.1 - 1.0, 0.2 - 3.0, 0.3 - 2.5, 0.4 - 0.5])
    np.testing.assert_allclose(np.diag(h, 1), [1.0, 2.0, 0.5])


def test_uniform_heisenberg_two_sites_matches_singlet_triplet():
    # (XX+YY+ZZ)/2 on two spins: triplet at +1/2 and singlet at -3/2; with the
    # reference state energy +1/2 removed the sector holds {0, -2}
    s = spectrum_of(ChainSpec.uniform(2, "heisenberg"))
    np.testing.assert_allclose(s.eigenvalues, [-2.0, 0.0], atol=1e-14)


@pytest.mark.parametrize("bad", [
    dict(sites=1, model="xy", couplings=(), onsite=(0.0,)),
    dict(sites=3, model="xy", couplings=(1.0,), onsite=(0.0,) * 3),
    dict(sites=3, model="xy", couplings=(1.0, np.nan), onsite=(0.0,) * 3),
    dict(sites=3, model="xy", couplings=(1.0, 1.0), onsite=(0.0, np.inf, 0.0)),
    dict(sites=3, model="ising", couplings=(1.0, 1.0), onsite=(0.0,) * 3),
    dict(sites=3, model="xy", couplings=(1.0, 1.0), onsite=(0.0,) * 3, periodic=True),
])
def test_chainspec_rejects_invalid(bad):
    with pytest.raises(ValueError):
        ChainSpec(**bad)


def test_chainspec_json_round_trip():
    spec = ChainSpec(4, "xy", (1.0, -0.5, 2.0, 0.3), (0.0, 1.0, 0.0, -1.0), periodic=True)
    d = json.loads(spec.to_json())
    assert d["sites"] == 4 and d["periodic"] is True
    assert ChainSpec.from_json(spec.to_json()) == spec


def test_custom_matrix_must_be_hermitian():
    with pytest.raises(ValueError):
        ChainSpec.from_matrix(np.array([[0, 1], [0, 0]], dtype=complex))
    m = np.array([[0, 1j], [-1j, 0.5]])
    np.testing.assert_array_equal(build_chain(ChainSpec.from_matrix(m)).matrix, m)


def test_pauli_x_eigenvectors():
    s = spectrum(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(s.eigenvalues, [-1, 1])
    for m, sign in enumerate((-1, 1)):
        v = s.eigenvectors[:, m]
        np.testing.assert_allclose(abs(np.vdot(v, np.array([1, sign]) / SQ2)), 1, atol=1e-14)


def test_diagonal_spectrum_is_permuted_basis():
    B = np.array([3.0, -1.0, 2.0])
    s = spectrum(np.diag(B))
    np.testing.assert_array_equal(s.eigenvalues, np.sort(B))
    np.testing.assert_allclose(np.abs(s.eigenvectors), np.eye(3)[:, np.argsort(B)])


def test_eigensolver_failure_is_reported(monkeypatch):
    with pytest.raises(ValueError):
        spectrum(np.full((3, 3), np.nan))

    def broken(_):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(np.linalg, "eigh", broken)
    with pytest.raises(EigensolverError):
        spectrum(np.eye(3))


def test_propagator_at_zero_is_identity(xy3):
    np.testing.assert_allclose(propagator(xy3, 0.0).matrix, np.eye(3), atol=1e-15)


@pytest.mark.parametrize("t", [0.3, 1.0, 2.7, 11.0])
def test_two_site_propagator_closed_form(xy2, t):
    expected = np.array([[np.cos(t), -1j * np.sin(t)], [-1j * np.sin(t), np.cos(t)]])
    np.testing.assert_allclose(propagator(xy2, t).matrix, expected, atol=1e-13)


def test_three_site_transfer_closed_form(xy3):
    t = np.linspace(0, 10, 101)
    np.testing.assert_allclose(transfer_amplitude(xy3, t), (np.cos(SQ2 * t) - 1) / 2,
                               atol=1e-13)
    assert abs(abs(transfer_amplitude(xy3, np.pi / SQ2)) - 1) < 1e-12
    np.testing.assert_allclose(transfer_amplitude(xy3, np.pi / SQ2), -1, atol=1e-12)


def test_transfer_amplitude_special_values(xy2):
    assert transfer_amplitude(xy2, 0.0) == 0
    np.testing.assert_allclose(transfer_amplitude(xy2, np.pi / 2), -1j, atol=1e-15)


def test_backward_time_is_adjoint(xy3):
    f = propagator(xy3, 1.3).matrix
    np.testing.assert_allclose(propagator(xy3, -1.3).matrix, f.conj().T, atol=1e-14)
    with pytest.raises(ValueError):
        propagator(xy3, np.inf)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(2, 12), t=st.floats(0, 50),
       periodic=st.booleans())
def test_spectrum_and_propagator_invariants(seed, N, t, periodic):
    rng = np.random.default_rng(seed)
    J = rng.normal(size=N if periodic else N - 1)
    B = rng.normal(size=N)
    spec = ChainSpec(N, str(rng.choice(["xy", "heisenberg"])), tuple(J), tuple(B), periodic)
    h = build_chain(spec).matrix
    assert np.max(np.abs(h - h.conj().T)) == 0
    s = spectrum(h)
    assert np.all(np.diff(s.eigenvalues) >= 0)
    V = s.eigenvectors
    assert np.max(np.abs(V.conj().T @ V - np.eye(N))) <= 1e-12
    scale = np.max(np.sum(np.abs(h), axis=1))
    assert np.max(np.abs(s.reconstruct() - h)) <= 1e-10 * scale
    f = propagator(s, t).matrix
    assert np.max(np.abs(f @ f.conj().T - np.eye(N))) <= 1e-10
    # independent oracle: Pade matrix exponential
    np.testing.assert_allclose(f, expm(-1j * t * h), atol=1e-9)


def test_open_chains_are_tridiagonal(rng):
    for N in (2, 5, 9):
        assert build_chain(random_chain(rng, N)).is_tridiagonal()
    assert not SingleExcitationOperator(np.ones((3, 3))).is_tridiagonal()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(2, 64))
def test_large_chain_propagator_properties(seed, N):
    rng = np.random.default_rng(seed)
    spec = ChainSpec(N, "xy", tuple(rng.uniform(-2, 2, N - 1)), tuple(rng.uniform(-2, 2, N)))
    s = spectrum(build_chain(spec))
    t1, t2 = rng.uniform(0, 50, 2)
    f1, f2 = propagator(s, t1).matrix, propagator(s, t2).matrix
    assert np.max(np.abs(f1 @ f1.conj().T - np.eye(N))) <= 1e-10
    assert np.max(np.abs(f1 @ f2 - propagator(s, t1 + t2).matrix)) <= 1e-9
    assert np.max(np.abs(f1 - f1.T)) <= 1e-10  # real symmetric h
