"""Moment and scaling diagnostics for evolutions over curves.

Moments are expectations of symmetrized canonical monomials taken in the
fiber the state lives in (no re-transport to the origin).  Their hbar
scaling is probed by sweeping hbar over a log-spaced grid with an
hbar-independent Fock label as initial state, then fitting

    log |moment|  against  log hbar

by least squares.  Values at the numerical floor are excluded; if all of
them sit there the quantity is reported as identically zero instead of
pretending a slope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .fock import (BasisConfig, StateVector, canonical_ops, expectation,
                   fock_state, symmetrized_monomials)
from .polynomials import (PhasePolynomial, as_phase_point, coordinate_labels,
                          quantize_at)
from .transport import SymplecticPotential, equivalence_map
from .dynamics import CurveSpec, evolve, time_grid

NUMERICAL_FLOOR = 1e-13


def indices_to_multiplicity(index_tuple, n: int) -> tuple[int, ...]:
    alpha = [0] * (2 * n)
    for mu in index_tuple:
        if not 0 <= mu < 2 * n:
            raise DimensionMismatchError(
                f"operator index {mu} out of range for n={n}"
            )
        alpha[mu] += 1
    return tuple(alpha)


def moment(state: StateVector, index_tuple, ops=None) -> complex:
    """Expectation of the symmetrized product of the indexed canonical ops."""
    basis = state.basis
    if ops is None:
        ops = canonical_ops(basis)
    alpha = indices_to_multiplicity(index_tuple, basis.n)
    table = symmetrized_monomials(basis, sum(alpha), ops=ops)
    return complex(np.vdot(state.vector, table[alpha] @ state.vector))


def moment_label(index_tuple, n: int) -> str:
    labels = coordinate_labels(n)
    return "".join(labels[mu] for mu in index_tuple)


def moment_tuples(n: int, max_order: int) -> list[tuple[int, ...]]:
    """All distinct symmetrized index tuples of order 1..max_order.

    Order within a tuple is immaterial for a symmetrized product, so
    non-decreasing tuples enumerate each moment once.
    """
    out = []
    def extend(prefix, start, remaining):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for mu in range(start, 2 * n):
            extend(prefix + [mu], mu, remaining - 1)
    for k in range(1, max_order + 1):
        extend([], 0, k)
    return out


@dataclass(frozen=True)
class MomentReport:
    order: int
    indices: tuple
    label: str
    value: complex
    hbar: float
    time: float


@dataclass(frozen=True)
class ObservableExpectation:
    """Full expectation with its classical/quantum split at the base point."""

    value: float
    classical_part: float
    quantum_part: float
    imag_defect: float


def observable_expectation(state: StateVector, f: PhasePolynomial,
                           base_point, ops=None) -> ObservableExpectation:
    """<state, rho(f)_xi state> split as f(xi) plus the quantum remainder."""
    basis = state.basis
    if ops is None:
        ops = canonical_ops(basis)
    op = quantize_at(f, base_point, ops=ops, basis=basis)
    raw = expectation(state, op)
    classical = f.eval(as_phase_point(base_point, f.n))
    return ObservableExpectation(
        value=raw.real,
        classical_part=classical,
        quantum_part=raw.real - classical,
        imag_defect=abs(raw.imag),
    )


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares exponent of |value| against hbar on a log-log scale."""

    hbar_grid: tuple
    values: tuple
    slope: float | None
    intercept: float | None
    r2: float | None
    n_used: int
    identically_zero: bool

    def passes_at_least(self, bound: float) -> bool:
        """Microscopic-scaling check: identically zero counts as passing."""
        if self.identically_zero:
            return True
        return self.slope is not None and self.slope >= bound

    def passes_below(self, bound: float) -> bool:
        """Macroscopic check: needs a real fitted slope under the bound."""
        return (not self.identically_zero and self.slope is not None
                and self.slope < bound)


def scaling_fit(hbar_grid, values) -> ScalingFit:
    """Fit log|value| = slope log hbar + b, excluding floor-level points."""
    hb = np.asarray(hbar_grid, dtype=float)
    v = np.abs(np.asarray(values, dtype=complex))
    if len(hb) != len(v):
        raise DimensionMismatchError("hbar grid and values must align")
    if len(hb) < 4:
        raise ValueError("scaling fit needs at least 4 grid points")
    if np.any(np.diff(hb) >= 0):
        raise ValueError("hbar grid must be strictly decreasing")
    if hb[0] / hb[-1] < 99.0:
        raise ValueError("hbar grid must span at least two decades")
    keep = v > NUMERICAL_FLOOR
    if keep.sum() == 0:
        return ScalingFit(tuple(hb), tuple(v), None, None, None, 0, True)
    if keep.sum() < 2:
        # One stray point above the floor still has no slope to speak of.
        return ScalingFit(tuple(hb), tuple(v), None, None, None,
                          int(keep.sum()), True)
    x = np.log(hb[keep])
    y = np.log(v[keep])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    total = y - y.mean()
    denom = float(total @ total)
    r2 = 1.0 - float(resid @ resid) / denom if denom > 0 else 1.0
    return ScalingFit(tuple(hb), tuple(v), float(slope), float(intercept),
                      r2, int(keep.sum()), False)


@dataclass(frozen=True)
class ClassicalLimitReport:
    """Per-hbar classical-limit errors of one observable along a curve."""

    observable_label: str
    hbar_grid: tuple
    times: np.ndarray = field(repr=False)
    quantum_values: dict = field(repr=False)    # hbar -> array over times
    classical_values: np.ndarray = field(repr=False)
    max_errors: tuple = ()
    fit: ScalingFit | None = None
    imag_defect_max: float = 0.0


def classical_limit_report(H: PhasePolynomial, f: PhasePolynomial,
                           xi0, fock_label, t_grid, hbar_grid,
                           cutoff, theta: SymplecticPotential | None = None,
                           curve_kind: str = "hamiltonian",
                           store_every: int = 10,
                           observable_label: str | None = None,
                           dt_override=None,
                           initial_transport_from=None) -> ClassicalLimitReport:
    """Evolve |fock_label> over the curve for each hbar and compare
    <f> against f(c(t)).

    `cutoff` may be an int or a mapping hbar -> int; `dt_override` likewise
    maps hbar to a finer step where the dynamics needs it.  The initial
    state is the same Fock label for every hbar, which keeps the
    microscopic-moment hypothesis uniform across the sweep.  When
    `initial_transport_from` is a point, the label state is attached to the
    fiber there and transported to the curve start before evolving; this is
    how the same physical state is re-represented over a different curve.
    """
    theta = theta if theta is not None else SymplecticPotential(H.n)
    hbars = tuple(float(h) for h in hbar_grid)
    quantum = {}
    max_errors = []
    imag_max = 0.0
    times_out = None
    classical_out = None
    for hb in hbars:
        N = cutoff[hb] if isinstance(cutoff, dict) else int(cutoff)
        basis = BasisConfig(n=H.n, cutoff=N, hbar=hb)
        grid = np.asarray(t_grid, dtype=float)
        if dt_override and hb in dt_override:
            grid = time_grid(grid[0], grid[-1], dt_override[hb])
        spec = CurveSpec(kind=curve_kind, start=as_phase_point(xi0, H.n))
        psi0 = fock_state(basis, fock_label)
        if initial_transport_from is not None:
            psi0 = equivalence_map(psi0,
                                   as_phase_point(initial_transport_from, H.n),
                                   spec.start)
        result = evolve(psi0, spec, H, theta, grid, store_every=store_every)
        traj = result.trajectory
        ops = canonical_ops(basis)
        vals = np.empty(len(traj.times))
        for k in range(len(traj.times)):
            est = observable_expectation(result.state(k), f, traj.points[k],
                                         ops=ops)
            vals[k] = est.value
            imag_max = max(imag_max, est.imag_defect)
        classical = np.array([f.eval(c) for c in traj.points])
        errors = np.abs(vals - classical)
        quantum[hb] = vals
        max_errors.append(float(errors.max()))
        if times_out is None:
            times_out = traj.times
            classical_out = classical
    fit = scaling_fit(hbars, max_errors)
    return ClassicalLimitReport(
        observable_label=observable_label or "f",
        hbar_grid=hbars,
        times=times_out,
        quantum_values=quantum,
        classical_values=classical_out,
        max_errors=tuple(max_errors),
        fit=fit,
        imag_defect_max=imag_max,
    )
