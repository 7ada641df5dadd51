"""Unitary transport between Hilbert-space fibers over phase-space points.

The connection one-form evaluated on a tangent vector v at xi is

    A_xi(v) = -(i/hbar) [theta_xi(v) I + omega_lowered[a, b] y^a v^b],

anti-Hermitian, so its transport is unitary.  Integrating it along a
straight segment (the connection is flat) gives the displacement operator

    U(xi, sigma) = exp[(i/hbar) ((p0 - p).q_hat + (q - q0).p_hat
                                 + (q.p0 - p.q0)/2)],

with (q0, p0) = xi the source and (q, p) = sigma the target.  The scalar
piece comes from the symplectic potential theta = (p dq - q dp)/2; its
exactness d theta = omega is what makes compositions path independent.

Applying a displacement to a state can push amplitude into the top Fock
levels; every state-producing operation here runs the tail-mass guard.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .fock import (BasisConfig, OperatorMatrix, StateVector, canonical_ops,
                   check_tail, unitary_exp)
from .polynomials import PhasePolynomial, SymplecticForm, as_phase_point


def default_potential_components(n: int) -> list[PhasePolynomial]:
    """theta = (p_j dq^j - q^j dp_j)/2 as 2n polynomial component functions."""
    comps = []
    for j in range(n):
        comps.append(0.5 * PhasePolynomial.coordinate(n, n + j))   # theta_{q^j} = p_j/2
    for j in range(n):
        comps.append(-0.5 * PhasePolynomial.coordinate(n, j))      # theta_{p_j} = -q^j/2
    return comps


@dataclass(frozen=True)
class SymplecticPotential:
    """A 1-form on R^{2n} with polynomial components, constrained by d theta = omega."""

    n: int
    components: tuple = field(default=None)

    def __post_init__(self):
        comps = self.components
        if comps is None:
            comps = tuple(default_potential_components(self.n))
        else:
            comps = tuple(comps)
        if len(comps) != 2 * self.n:
            raise DimensionMismatchError(
                f"theta needs {2 * self.n} components, got {len(comps)}"
            )
        object.__setattr__(self, "components", comps)
        omega = SymplecticForm(self.n).lowered
        for mu in range(2 * self.n):
            for nu in range(mu + 1, 2 * self.n):
                d = (self.components[nu].partial_derivative(mu)
                     - self.components[mu].partial_derivative(nu)
                     - PhasePolynomial.constant(self.n, omega[mu, nu]))
                if d.terms:
                    raise ValueError(
                        f"d theta != omega at component pair ({mu}, {nu}): "
                        f"defect {d}"
                    )

    def pairing(self, xi, v) -> float:
        """theta_xi(v) = sum_mu theta_mu(xi) v^mu."""
        pt = as_phase_point(xi, self.n)
        vec = as_phase_point(v, self.n)
        return float(sum(c.eval(pt) * vec[mu]
                         for mu, c in enumerate(self.components)))

    @property
    def is_default(self) -> bool:
        return self.components == tuple(default_potential_components(self.n))


@dataclass(frozen=True)
class ConnectionForm:
    """Connection data: a symplectic potential plus the basis it acts on."""

    theta: SymplecticPotential
    basis: BasisConfig

    def __post_init__(self):
        if self.theta.n != self.basis.n:
            raise DimensionMismatchError(
                f"theta has n={self.theta.n} but basis has n={self.basis.n}"
            )


def connection_apply(conn: ConnectionForm, xi, v) -> OperatorMatrix:
    """Evaluate the connection one-form at xi on tangent v.

    Returns -(i/hbar)(theta_xi(v) I + omega_lowered y v); anti-Hermitian,
    and linear in v.
    """
    basis = conn.basis
    n = basis.n
    pt = as_phase_point(xi, n)
    vec = as_phase_point(v, n)
    ops = canonical_ops(basis)
    wv = SymplecticForm(n).lowered @ vec       # omega_{a b} v^b, indexed by a
    acc = conn.theta.pairing(pt, vec) * np.eye(basis.dim, dtype=complex)
    for a in range(2 * n):
        if wv[a] != 0.0:
            acc += wv[a] * ops[a].matrix
    return OperatorMatrix(basis, (-1j / basis.hbar) * acc)


@dataclass(frozen=True)
class TransportPair:
    """Source and target points of a displacement."""

    source: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.source, dtype=float).reshape(-1)
        dst = np.asarray(self.target, dtype=float).reshape(-1)
        if src.shape != dst.shape:
            raise DimensionMismatchError(
                f"source/target dimension mismatch: {src.shape} vs {dst.shape}"
            )
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", dst)


def displacement(pair: TransportPair, basis: BasisConfig, ops=None) -> OperatorMatrix:
    """Transport operator U(source, target) on the truncated basis.

    Exponentiated via Hermitian eigendecomposition, hence unitary to
    machine precision on the full truncated space.
    """
    n = basis.n
    src = as_phase_point(pair.source, n)
    dst = as_phase_point(pair.target, n)
    if ops is None:
        ops = canonical_ops(basis)
    q0, p0 = src[:n], src[n:]
    q1, p1 = dst[:n], dst[n:]
    herm = 0.5 * float(q1 @ p0 - p1 @ q0) * np.eye(basis.dim, dtype=complex)
    for j in range(n):
        herm += (p0[j] - p1[j]) * ops[j].matrix
        herm += (q1[j] - q0[j]) * ops[n + j].matrix
    return unitary_exp(basis, herm / basis.hbar)


def parallel_section_value(chi: StateVector, xi) -> StateVector:
    """Value at xi of the parallel section through chi at the origin.

    Equals U(0, xi) chi; for a single mode this reproduces the closed-form
    position-space section chi(q + x) exp(-(i/hbar) p (x + q/2)).
    """
    basis = chi.basis
    origin = np.zeros(2 * basis.n)
    U = displacement(TransportPair(origin, as_phase_point(xi, basis.n)), basis)
    out = StateVector(basis, U.matrix @ chi.vector)
    check_tail(out, context="parallel_section_value")
    return out


def equivalence_map(psi: StateVector, curve_point, target_point) -> StateVector:
    """Re-represent a state from the fiber at curve_point to target_point."""
    basis = psi.basis
    U = displacement(
        TransportPair(as_phase_point(curve_point, basis.n),
                      as_phase_point(target_point, basis.n)),
        basis,
    )
    out = StateVector(basis, U.matrix @ psi.vector)
    check_tail(out, context="equivalence_map")
    return out
