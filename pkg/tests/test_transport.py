"""Connection evaluation, displacement operators, parallel sections."""

import math

import numpy as np
import pytest

from phasefock import (BasisConfig, ConnectionForm, PhasePolynomial,
                       SymplecticPotential, TransportPair, TruncationError,
                       canonical_ops, connection_apply, displacement,
                       equivalence_map, fock_state, parallel_section_value,
                       position_wavefunction, quantize_at)


BASIS = BasisConfig(n=1, cutoff=64, hbar=1.0)


def U(src, dst, basis=BASIS):
    return displacement(TransportPair(np.asarray(src, float),
                                      np.asarray(dst, float)), basis)


def test_default_theta_satisfies_exactness():
    theta = SymplecticPotential(1)
    assert theta.is_default
    # theta(v) at xi=(1,0), v=(0,1): components (p/2, -q/2) give -1/2.
    assert theta.pairing([1.0, 0.0], [0.0, 1.0]) == -0.5


def test_alternative_theta_accepted_and_bad_theta_rejected():
    p = PhasePolynomial.coordinate(1, 1)
    zero = PhasePolynomial.zero(1)
    # theta = p dq also satisfies d theta = omega.
    SymplecticPotential(1, (p, zero))
    # theta = (p/2) dq does not.
    with pytest.raises(ValueError):
        SymplecticPotential(1, (0.5 * p, zero))


def test_connection_zero_vector_and_linearity():
    conn = ConnectionForm(SymplecticPotential(1), BASIS)
    xi = [0.4, -0.2]
    A0 = connection_apply(conn, xi, [0.0, 0.0])
    assert np.abs(A0.matrix).max() == 0.0
    v = np.array([0.3, 0.8])
    A1 = connection_apply(conn, xi, v)
    A2 = connection_apply(conn, xi, 2 * v)
    np.testing.assert_allclose(A2.matrix, 2 * A1.matrix, atol=1e-14)
    # anti-Hermitian so that transport is unitary
    assert np.abs(A1.matrix + A1.matrix.conj().T).max() < 1e-12


def test_connection_matches_derivative_of_displacement():
    # Finite-difference oracle: d/dt U(0, t v) at t=0 equals -A_0(v).
    basis = BasisConfig(n=1, cutoff=32, hbar=1.0)
    conn = ConnectionForm(SymplecticPotential(1), basis)
    v = np.array([1.0, 0.0])
    h = 1e-4
    dU = (U(np.zeros(2), h * v, basis).matrix
          - U(np.zeros(2), -h * v, basis).matrix) / (2 * h)
    A = connection_apply(conn, np.zeros(2), v)
    blk = basis.safe_indices(margin=basis.cutoff // 2)
    sub = np.ix_(blk, blk)
    assert np.abs((dU + A.matrix)[sub]).max() < 1e-6


def test_displacement_identity_pair():
    xi = np.array([0.7, -0.4])
    np.testing.assert_allclose(U(xi, xi).matrix, np.eye(BASIS.dim), atol=1e-13)


def test_displacement_unitarity():
    op = U([0.7, -0.4], [-0.3, 0.5])
    np.testing.assert_allclose((op.dagger() @ op).matrix, np.eye(BASIS.dim),
                               atol=1e-9)


def test_displacement_composition_triangles():
    rng = np.random.default_rng(7)
    blk = BASIS.safe_indices(margin=BASIS.cutoff // 2)
    sub = np.ix_(blk, blk)
    for _ in range(20):
        pts = rng.uniform(-1, 1, size=(3, 2))
        pts /= np.maximum(1.0, np.linalg.norm(pts, axis=1))[:, None]
        U12 = U(pts[0], pts[1])
        U23 = U(pts[1], pts[2])
        U13 = U(pts[0], pts[2])
        assert np.abs(((U23 @ U12) - U13).matrix[sub]).max() < 1e-8


def test_transport_equation_residual_along_circle():
    # Central finite differences of U along a circular curve against the
    # connection, step 1e-4.
    basis = BasisConfig(n=1, cutoff=32, hbar=1.0)
    conn = ConnectionForm(SymplecticPotential(1), basis)
    r = 0.5
    c = lambda t: np.array([r * math.cos(t), r * math.sin(t)])
    cdot = lambda t: np.array([-r * math.sin(t), r * math.cos(t)])
    xi = c(0.0)
    h = 1e-4
    blk = basis.safe_indices(margin=basis.cutoff // 2)
    sub = np.ix_(blk, blk)
    worst = 0.0
    for t in np.linspace(0.2, 2.4, 5):
        dU = (U(xi, c(t + h), basis).matrix - U(xi, c(t - h), basis).matrix) / (2 * h)
        A = connection_apply(conn, c(t), cdot(t))
        res = dU + A.matrix @ U(xi, c(t), basis).matrix
        worst = max(worst, np.abs(res[sub]).max())
    assert worst < 1e-6


def test_covariance_of_quantization_under_transport():
    rng = np.random.default_rng(17)
    blk = BASIS.safe_indices(margin=3 * BASIS.cutoff // 4)
    sub = np.ix_(blk, blk)
    for _ in range(10):
        f = PhasePolynomial(1, {(i, j): rng.uniform(-1, 1)
                                for i in range(5) for j in range(5 - i)})
        xi = rng.uniform(-1, 1, 2)
        xi /= max(1.0, np.linalg.norm(xi))
        sigma = rng.uniform(-1, 1, 2)
        sigma /= max(1.0, np.linalg.norm(sigma))
        Uxs = U(xi, sigma)
        lhs = Uxs.matrix @ quantize_at(f, xi, basis=BASIS).matrix @ \
            Uxs.dagger().matrix
        rhs = quantize_at(f, sigma, basis=BASIS).matrix
        assert np.abs((lhs - rhs)[sub]).max() < 1e-9


def test_parallel_section_at_origin_is_identity():
    chi = fock_state(BASIS, 2)
    out = parallel_section_value(chi, np.zeros(2))
    np.testing.assert_allclose(out.vector, chi.vector, atol=1e-13)


def test_parallel_section_matches_closed_form_position_space():
    # Hermite-expansion oracle: the section through the ground state,
    # evaluated at (q, 0), is the ground Gaussian translated by -q.
    basis = BasisConfig(n=1, cutoff=64, hbar=1.0)
    chi = fock_state(basis, 0)
    qshift = 0.8
    out = parallel_section_value(chi, [qshift, 0.0])
    x = np.linspace(-3, 3, 11)
    lhs = position_wavefunction(out, x)
    ref = position_wavefunction(chi, x + qshift)
    assert np.abs(lhs - ref).max() < 1e-6
    assert abs(out.norm - chi.norm) < 1e-9


def test_parallel_section_with_momentum_phase():
    basis = BasisConfig(n=1, cutoff=64, hbar=0.7)
    chi = fock_state(basis, 0)
    qs, ps = 0.5, -0.6
    out = parallel_section_value(chi, [qs, ps])
    x = np.linspace(-2.5, 2.5, 11)
    lhs = position_wavefunction(out, x)
    ref = position_wavefunction(chi, x + qs) * \
        np.exp(-1j * ps * (x + qs / 2) / basis.hbar)
    assert np.abs(lhs - ref).max() < 1e-6


def test_equivalence_map_identity_and_roundtrip():
    psi = fock_state(BASIS, 1)
    same = equivalence_map(psi, [0.2, 0.1], [0.2, 0.1])
    np.testing.assert_allclose(same.vector, psi.vector, atol=1e-13)
    there = equivalence_map(psi, [0.0, 0.0], [0.6, -0.2])
    back = equivalence_map(there, [0.6, -0.2], [0.0, 0.0])
    assert np.linalg.norm(back.vector - psi.vector) < 1e-9


def test_equivalence_map_truncation_guard():
    small = BasisConfig(n=1, cutoff=16, hbar=0.1)
    psi = fock_state(small, 0)
    with pytest.raises(TruncationError):
        equivalence_map(psi, [0.0, 0.0], [1.5, 0.0])
