"""Moments, expectation splits, scaling fits, classical-limit reports."""

import math

import numpy as np
import pytest

from phasefock import (BasisConfig, CurveSpec, PhasePolynomial,
                       SymplecticPotential, canonical_ops,
                       classical_limit_report, evolve, fock_state, moment,
                       moment_tuples, observable_expectation,
                       oscillator_hamiltonian, quantize_at,
                       quartic_hamiltonian, scaling_fit, time_grid)
from phasefock.diagnostics import moment_label
from phasefock.fock import StateVector, ladder_matrix
from phasefock.transport import TransportPair, displacement, equivalence_map

THETA = SymplecticPotential(1)
HBARS = (1e-1, 3e-2, 1e-2, 1e-3)


def test_ground_state_moments():
    basis = BasisConfig(n=1, cutoff=12, hbar=0.4)
    vac = fock_state(basis, 0)
    assert abs(moment(vac, (0,))) < 1e-14
    # ladder oracle: <0| q q |0> = hbar/2
    assert abs(moment(vac, (0, 0)) - basis.hbar / 2) < 1e-14
    assert abs(moment(vac, (0, 1)).real) < 1e-14  # symmetrized qp
    assert abs(moment(vac, (0, 0)).imag) < 1e-9


def test_moment_order_invariance_and_labels():
    basis = BasisConfig(n=1, cutoff=10, hbar=1.0)
    rng = np.random.default_rng(4)
    v = rng.normal(size=10) + 1j * rng.normal(size=10)
    psi = StateVector(basis, v / np.linalg.norm(v))
    assert moment(psi, (0, 1, 1)) == pytest.approx(moment(psi, (1, 0, 1)))
    assert moment_label((0, 0, 1), 1) == "qqp"
    assert moment_label((0, 3), 2) == "q1p2"


def test_moment_tuples_enumeration():
    tuples = moment_tuples(1, 4)
    assert len(tuples) == 2 + 3 + 4 + 5
    orders = sorted(len(t) for t in tuples)
    assert orders == [1] * 2 + [2] * 3 + [3] * 4 + [4] * 5


def test_displaced_state_measured_in_its_own_fiber_has_no_first_moment():
    # Displacement-algebra oracle: conjugation shifts the canonical
    # operators, U(xi,0)^dag q U(xi,0) = q + q_xi on the interior block, so
    # re-representing the displaced state over its own center removes the
    # first moments entirely.
    basis = BasisConfig(n=1, cutoff=64, hbar=1.0)
    xi = np.array([0.6, -0.4])
    vac = fock_state(basis, 0)
    psi_origin = equivalence_map(vac, xi, np.zeros(2))
    q = canonical_ops(basis)[0]
    # center of the transported packet sits at +xi
    assert abs(moment(psi_origin, (0,)).real - xi[0]) < 1e-9
    U = displacement(TransportPair(xi, np.zeros(2)), basis)
    blk = basis.safe_indices(margin=basis.cutoff // 2)
    sub = np.ix_(blk, blk)
    shifted = (U.dagger() @ q @ U).matrix
    assert np.abs((shifted - q.matrix - xi[0] * np.eye(basis.dim))[sub]).max() < 1e-9
    back = equivalence_map(psi_origin, np.zeros(2), xi)
    assert abs(moment(back, (0,))) < 1e-12
    assert abs(moment(back, (1,))) < 1e-12


def test_observable_expectation_split():
    basis = BasisConfig(n=1, cutoff=16, hbar=0.3)
    vac = fock_state(basis, 0)
    q = PhasePolynomial.coordinate(1, 0)
    est = observable_expectation(vac, q, [0.7, -0.2])
    assert abs(est.value - 0.7) < 1e-12
    assert est.classical_part == pytest.approx(0.7)
    assert abs(est.quantum_part) < 1e-12
    const = observable_expectation(vac, PhasePolynomial.constant(1, 3.0),
                                   [0.1, 0.1])
    assert abs(const.value - 3.0) < 1e-12
    q2 = q * q
    est2 = observable_expectation(vac, q2, [0.5, 0.0])
    assert abs(est2.value - (0.25 + basis.hbar / 2)) < 1e-12
    assert abs(est2.classical_part + est2.quantum_part - est2.value) < 1e-10
    assert est2.imag_defect < 1e-9


def test_scaling_fit_synthetic_power_law():
    hb = (1e-1, 1e-2, 1e-3, 1e-4)
    fit = scaling_fit(hb, [3.0 * h for h in hb])
    assert not fit.identically_zero
    assert abs(fit.slope - 1.0) < 1e-10
    assert fit.r2 > 1.0 - 1e-12
    assert fit.passes_at_least(0.9)
    assert not fit.passes_below(0.9)


def test_scaling_fit_floor_handling():
    hb = (1e-1, 1e-2, 1e-3, 1e-4)
    zero = scaling_fit(hb, [0.0, 1e-16, 0.0, 1e-15])
    assert zero.identically_zero
    assert zero.passes_at_least(10.0)
    assert not zero.passes_below(0.1)
    partial = scaling_fit(hb, [1e-2, 1e-3, 1e-16, 0.0])
    assert partial.n_used == 2
    assert abs(partial.slope - 1.0) < 1e-9


def test_scaling_fit_grid_validation():
    with pytest.raises(ValueError):
        scaling_fit((1e-1, 1e-2, 1e-3), [1, 1, 1])
    with pytest.raises(ValueError):
        scaling_fit((1e-1, 1e-2, 1e-2, 1e-3), [1, 1, 1, 1])
    with pytest.raises(ValueError):
        scaling_fit((1e-1, 5e-2, 2.5e-2, 2e-2), [1, 1, 1, 1])


def test_oscillator_second_moment_scaling():
    # The ground state keeps <qq> = hbar/2 exactly over its own curve.
    vals = []
    for hb in HBARS:
        basis = BasisConfig(n=1, cutoff=16, hbar=hb)
        res = evolve(fock_state(basis, 0),
                     CurveSpec(kind="hamiltonian", start=np.array([0.4, 0.0])),
                     oscillator_hamiltonian(), THETA, time_grid(0, 0.5, 1e-2),
                     store_every=50)
        final = res.state(len(res.times) - 1)
        vals.append(moment(final, (0, 0)).real)
    for hb, v in zip(HBARS, vals):
        assert abs(v - hb / 2) < 1e-10
    fit = scaling_fit(HBARS, vals)
    assert abs(fit.slope - 1.0) < 0.05


def test_classical_limit_oscillator_first_moment_error_vanishes():
    rep = classical_limit_report(
        oscillator_hamiltonian(), PhasePolynomial.coordinate(1, 0),
        [1.0, 0.0], 1, time_grid(0, 1.0, 1e-3), HBARS, cutoff=24,
        observable_label="q")
    assert all(e < 1e-8 for e in rep.max_errors)
    assert rep.fit.identically_zero or rep.fit.slope > 2.0
    assert rep.imag_defect_max < 1e-9


def test_classical_limit_oscillator_qsquared_error_is_half_hbar():
    q = PhasePolynomial.coordinate(1, 0)
    rep = classical_limit_report(
        oscillator_hamiltonian(), q * q, [1.0, 0.0], 0,
        time_grid(0, 1.0, 1e-3), HBARS, cutoff=24, observable_label="q^2")
    for hb, err in zip(HBARS, rep.max_errors):
        assert abs(err - hb / 2) < 1e-8
    assert abs(rep.fit.slope - 1.0) < 0.05


def test_classical_limit_quartic_first_moment_slope():
    rep = classical_limit_report(
        quartic_hamiltonian(), PhasePolynomial.coordinate(1, 0), [1.0, 0.0],
        0, time_grid(0, 2.0, 1e-3), (1e-1, 3e-2, 1e-2, 3e-3, 1e-3),
        cutoff=64, observable_label="q")
    assert rep.fit.slope >= 0.4


def test_moment_evolution_rate_matches_commutator_series():
    # Finite-difference time derivative of <q> under a fixed base point
    # against the commutator of the generator, and against the terminating
    # gradient series assembled from quantized partial derivatives.
    basis = BasisConfig(n=1, cutoff=48, hbar=0.4)
    H = quartic_hamiltonian()
    xi = np.array([0.4, 0.2])
    K = quantize_at(H, xi, basis=basis)
    v = np.zeros(basis.dim, dtype=complex)
    v[0], v[1] = 0.8, 0.6
    psi = StateVector(basis, v)
    dt = 1e-4
    spec = CurveSpec(kind="constant", start=xi)
    grid = time_grid(0, 2 * dt, dt)
    res = evolve(psi, spec, H, THETA, grid)
    mq = [moment(res.state(k), (0,)).real for k in range(3)]
    fd = (mq[2] - mq[0]) / (2 * dt)
    # evaluate the rate at the middle state to match the centered stencil
    mid = res.state(1)
    comm = (1j / basis.hbar) * np.vdot(
        mid.vector, (K.matrix @ canonical_ops(basis)[0].matrix
                     - canonical_ops(basis)[0].matrix @ K.matrix) @ mid.vector)
    assert abs(fd - comm.real) < 1e-5
    series = 0.0
    omega_raised = np.array([[0.0, 1.0], [-1.0, 0.0]])
    for alpha in range(2):
        w = omega_raised[0, alpha]
        if w == 0.0:
            continue
        dH = H.partial_derivative(alpha)
        series += w * np.vdot(mid.vector,
                              quantize_at(dH, xi, basis=basis).matrix
                              @ mid.vector).real
    assert abs(fd - series) < 1e-5
    assert abs(comm.real - series) < 1e-10
