"""Truncated-Fock-basis representation of the canonical (Weyl) algebra.

Phase space is R^{2n} with coordinates ordered (q^1..q^n, p_1..p_n).  Each
mode carries a ladder of `cutoff` levels; the total Hilbert space is the
n-fold tensor product, dimension cutoff**n.  The canonical operators are

    q_j = sqrt(hbar/2) (a_j + a_j^dag),     p_j = i sqrt(hbar/2) (a_j^dag - a_j),

built from the per-mode ladder matrices and tensored with identities on the
other modes.  They satisfy [y^mu, y^nu] = i hbar omega^{mu nu} exactly on
the block of states whose mode levels all stay below cutoff-1; the top
level violates the commutation relation, which is why callers that test
algebraic identities restrict to `safe_indices`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, NormalizationError, TruncationError

# Tail mass above this aborts an evolution or transport application.
TAIL_MASS_LIMIT = 1e-6


@dataclass(frozen=True)
class BasisConfig:
    """Degrees of freedom, per-mode Fock cutoff, and the value of hbar."""

    n: int
    cutoff: int
    hbar: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need n >= 1 degrees of freedom, got {self.n}")
        if self.cutoff < 2:
            raise ValueError(f"need cutoff >= 2 Fock levels, got {self.cutoff}")
        if not self.hbar > 0:
            raise ValueError(f"need hbar > 0, got {self.hbar}")

    @property
    def dim(self) -> int:
        return self.cutoff ** self.n

    def level_tuples(self) -> np.ndarray:
        """(dim, n) array of per-mode levels, row i = levels of basis state i."""
        grids = np.meshgrid(*[np.arange(self.cutoff)] * self.n, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def safe_indices(self, margin: int = 1) -> np.ndarray:
        """Basis states with every mode level <= cutoff - 1 - margin.

        margin=1 is the block on which the commutation relations hold
        exactly; larger margins give the interior blocks used when testing
        identities involving dense operator products.
        """
        levels = self.level_tuples()
        return np.flatnonzero((levels <= self.cutoff - 1 - margin).all(axis=1))

    def tail_indices(self) -> np.ndarray:
        """Basis states with any mode level in the top 10% of the ladder."""
        n_tail = max(1, self.cutoff // 10)
        levels = self.level_tuples()
        return np.flatnonzero((levels >= self.cutoff - n_tail).any(axis=1))


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense complex matrix over the truncated Fock basis of `basis`."""

    basis: BasisConfig
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise DimensionMismatchError(
                f"matrix shape {m.shape} does not match basis dim {self.basis.dim}"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.basis, self.matrix.conj().T)

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _same_basis(self, other)
        return OperatorMatrix(self.basis, self.matrix + other.matrix)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _same_basis(self, other)
        return OperatorMatrix(self.basis, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "OperatorMatrix":
        return OperatorMatrix(self.basis, self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _same_basis(self, other)
        return OperatorMatrix(self.basis, self.matrix @ other.matrix)


@dataclass(frozen=True)
class StateVector:
    """Complex coefficient vector over the truncated Fock basis of `basis`."""

    basis: BasisConfig
    vector: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex)
        if v.shape != (self.basis.dim,):
            raise DimensionMismatchError(
                f"vector shape {v.shape} does not match basis dim {self.basis.dim}"
            )
        object.__setattr__(self, "vector", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise NormalizationError("cannot normalize the zero vector")
        return StateVector(self.basis, self.vector / n)

    def tail_mass(self) -> float:
        idx = self.basis.tail_indices()
        return float(np.sum(np.abs(self.vector[idx]) ** 2))

    def overlap(self, other: "StateVector") -> complex:
        _same_basis(self, other)
        return complex(np.vdot(self.vector, other.vector))


def _same_basis(a, b):
    if a.basis != b.basis:
        raise DimensionMismatchError(
            f"operands built over different bases: {a.basis} vs {b.basis}"
        )


def check_tail(state: StateVector, context: str = "") -> float:
    """Return the state's tail mass, raising TruncationError above the guard."""
    tm = state.tail_mass()
    if tm > TAIL_MASS_LIMIT:
        raise TruncationError(
            f"tail mass {tm:.3e} exceeds guard {TAIL_MASS_LIMIT:.0e}"
            + (f" ({context})" if context else "")
            + "; increase the Fock cutoff"
        )
    return tm


def ladder_matrix(cutoff: int) -> np.ndarray:
    """Single-mode annihilation matrix: a|m> = sqrt(m)|m-1>."""
    return np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)


def _embed(single: np.ndarray, mode: int, basis: BasisConfig) -> np.ndarray:
    """Tensor a single-mode matrix with identities on all other modes."""
    out = np.array([[1.0 + 0j]])
    eye = np.eye(basis.cutoff, dtype=complex)
    for j in range(basis.n):
        out = np.kron(out, single if j == mode else eye)
    return out


def build_canonical_ops(basis: BasisConfig) -> tuple[OperatorMatrix, ...]:
    """The 2n canonical operators, ordered (q^1..q^n, p_1..p_n).

    Each is Hermitian to machine precision by construction; entries scale
    as sqrt(hbar).
    """
    a = ladder_matrix(basis.cutoff)
    ad = a.conj().T
    scale = math.sqrt(basis.hbar / 2.0)
    q_single = scale * (a + ad)
    p_single = 1j * scale * (ad - a)
    qs = [OperatorMatrix(basis, _embed(q_single, j, basis)) for j in range(basis.n)]
    ps = [OperatorMatrix(basis, _embed(p_single, j, basis)) for j in range(basis.n)]
    return tuple(qs + ps)


_CANONICAL_CACHE: dict[BasisConfig, tuple[OperatorMatrix, ...]] = {}


def canonical_ops(basis: BasisConfig) -> tuple[OperatorMatrix, ...]:
    """Cached variant of build_canonical_ops (operators are immutable)."""
    ops = _CANONICAL_CACHE.get(basis)
    if ops is None:
        ops = build_canonical_ops(basis)
        _CANONICAL_CACHE[basis] = ops
    return ops


def identity_op(basis: BasisConfig) -> OperatorMatrix:
    return OperatorMatrix(basis, np.eye(basis.dim, dtype=complex))


def commutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    _same_basis(a, b)
    return OperatorMatrix(a.basis, a.matrix @ b.matrix - b.matrix @ a.matrix)


def symmetrized_product(ops, basis: BasisConfig | None = None) -> OperatorMatrix:
    """Average of the operator product over all orderings of the factors.

    The empty product is the identity (pass `basis` to fix its dimension).
    Computed by the recursion sym(A_1..A_k) = (1/k) sum_j A_j sym(rest),
    with memoization over sub-multisets so repeated factors cost far less
    than k! products.
    """
    ops = list(ops)
    if not ops:
        if basis is None:
            raise ValueError("empty symmetrized product needs an explicit basis")
        return identity_op(basis)
    basis = ops[0].basis
    for op in ops[1:]:
        _same_basis(ops[0], op)
    if len(ops) > 12:
        raise ValueError(f"symmetrized product of {len(ops)} factors rejected "
                         "(factorial growth; cap is 12)")

    # Group identical factors (by object identity) so the memo key is a
    # multiplicity vector.
    unique: list[OperatorMatrix] = []
    counts: list[int] = []
    for op in ops:
        for i, u in enumerate(unique):
            if u is op or u.matrix is op.matrix:
                counts[i] += 1
                break
        else:
            unique.append(op)
            counts.append(1)
    mats = [u.matrix for u in unique]
    result = _symmetrized_from_counts(mats, tuple(counts), basis.dim)
    return OperatorMatrix(basis, result)


def _symmetrized_from_counts(mats, counts, dim, _memo=None):
    if _memo is None:
        _memo = {}
    cached = _memo.get(counts)
    if cached is not None:
        return cached
    k = sum(counts)
    if k == 0:
        out = np.eye(dim, dtype=complex)
    else:
        out = np.zeros((dim, dim), dtype=complex)
        for i, c in enumerate(counts):
            if c == 0:
                continue
            rest = list(counts)
            rest[i] -= 1
            out += c * (mats[i] @ _symmetrized_from_counts(mats, tuple(rest), dim, _memo))
        out /= k
    _memo[counts] = out
    return out


def symmetrized_monomials(basis: BasisConfig, max_degree: int,
                          ops=None) -> dict[tuple[int, ...], np.ndarray]:
    """All Weyl-symmetrized monomials sym(y^alpha) with |alpha| <= max_degree.

    Keys are multiplicity vectors alpha over the 2n canonical operators.
    Built bottom-up by degree; the table is what quantization and moment
    evaluation share, so it is cached per (basis, degree).
    """
    if ops is None:
        ops = canonical_ops(basis)
    key = (basis, max_degree)
    cached = _MONOMIAL_CACHE.get(key)
    if cached is not None and ops is canonical_ops(basis):
        return cached
    mats = [op.matrix for op in ops]
    dim = basis.dim
    nvar = len(mats)
    table: dict[tuple[int, ...], np.ndarray] = {
        (0,) * nvar: np.eye(dim, dtype=complex)
    }
    for k in range(1, max_degree + 1):
        for alpha in _multi_indices(nvar, k):
            acc = np.zeros((dim, dim), dtype=complex)
            for mu in range(nvar):
                if alpha[mu] == 0:
                    continue
                prev = list(alpha)
                prev[mu] -= 1
                acc += alpha[mu] * (mats[mu] @ table[tuple(prev)])
            table[alpha] = acc / k
    if ops is canonical_ops(basis):
        _MONOMIAL_CACHE[key] = table
    return table


_MONOMIAL_CACHE: dict[tuple[BasisConfig, int], dict] = {}


def _multi_indices(nvar: int, degree: int):
    """All multi-indices over nvar slots with |alpha| = degree."""
    for cuts in itertools.combinations(range(degree + nvar - 1), nvar - 1):
        alpha = []
        prev = -1
        for c in cuts:
            alpha.append(c - prev - 1)
            prev = c
        alpha.append(degree + nvar - 2 - prev)
        yield tuple(alpha)


def expectation(state: StateVector, op: OperatorMatrix) -> complex:
    """<state, op state> for a normalized state.

    The imaginary part is returned, not dropped; for Hermitian op it is
    below 1e-10 and callers may assert on it.
    """
    _same_basis(state, op)
    if abs(state.norm - 1.0) > 1e-10:
        raise NormalizationError(
            f"expectation requires a normalized state; got norm {state.norm:.12f}"
        )
    return complex(np.vdot(state.vector, op.matrix @ state.vector))


def fock_state(basis: BasisConfig, levels) -> StateVector:
    """Basis state |m_1..m_n>; accepts an int for n=1."""
    if isinstance(levels, (int, np.integer)):
        levels = (int(levels),)
    levels = tuple(int(m) for m in levels)
    if len(levels) != basis.n:
        raise DimensionMismatchError(
            f"need {basis.n} mode labels, got {len(levels)}"
        )
    if any(m < 0 or m >= basis.cutoff for m in levels):
        raise ValueError(f"mode levels {levels} outside 0..{basis.cutoff - 1}")
    index = 0
    for m in levels:
        index = index * basis.cutoff + m
    v = np.zeros(basis.dim, dtype=complex)
    v[index] = 1.0
    return StateVector(basis, v)


def unitary_exp(basis: BasisConfig, hermitian: np.ndarray) -> OperatorMatrix:
    """exp(i K) for Hermitian K, via eigendecomposition.

    Unitary to machine precision, no scaling-and-squaring tuning.
    """
    w, V = np.linalg.eigh(hermitian)
    return OperatorMatrix(basis, (V * np.exp(1j * w)) @ V.conj().T)


def hermite_functions(x: np.ndarray, count: int, hbar: float) -> np.ndarray:
    """Oscillator eigenfunctions phi_0..phi_{count-1} evaluated at x.

    Returns array (count, len(x)).  Uses the stable two-term recursion for
    the normalized Hermite functions; the hbar scaling is
    phi_m(x) = hbar^{-1/4} htilde_m(x / sqrt(hbar)).
    """
    x = np.asarray(x, dtype=float)
    u = x / math.sqrt(hbar)
    out = np.empty((count, x.size))
    out[0] = np.pi ** (-0.25) * np.exp(-0.5 * u * u)
    if count > 1:
        out[1] = math.sqrt(2.0) * u * out[0]
    for m in range(2, count):
        out[m] = (math.sqrt(2.0 / m) * u * out[m - 1]
                  - math.sqrt((m - 1) / m) * out[m - 2])
    return out * hbar ** (-0.25)


def position_wavefunction(state: StateVector, x: np.ndarray) -> np.ndarray:
    """Evaluate a single-mode state's position-space wave function at x."""
    if state.basis.n != 1:
        raise DimensionMismatchError("position_wavefunction supports n=1 only")
    phi = hermite_functions(np.asarray(x, dtype=float), state.basis.cutoff,
                            state.basis.hbar)
    return state.vector @ phi
