"""Polynomial observables on phase space and their Weyl quantization.

A PhasePolynomial stores real coefficients keyed by multi-indices over the
2n coordinates (q^1..q^n, p_1..p_n).  Restricting observables to
polynomials keeps the quantization series finite: the operator assigned to
f at base point xi is

    rho(f)_xi = sum_alpha (1/alpha!) d^alpha f(xi) sym(y^alpha),

a terminating sum once deg f is reached, assembled from the shared
symmetrized-monomial table.  At xi = 0 this is the standard Weyl-ordered
quantization.

Sign conventions are pinned so that Hamilton's equation reads
dc/dt = omega_raised grad H and the canonical pair has {q, p} = +1; the
matrix of the symplectic 2-form in (q, p) ordering then has
omega_lowered[q, p] = -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .fock import BasisConfig, OperatorMatrix, canonical_ops, symmetrized_monomials

MAX_QUANTIZE_DEGREE = 12


def as_phase_point(xi, n: int) -> np.ndarray:
    """Validate and convert a phase-space point to a float array of length 2n."""
    pt = np.asarray(xi, dtype=float).reshape(-1)
    if pt.shape != (2 * n,):
        raise DimensionMismatchError(
            f"phase point must have 2n = {2 * n} coordinates, got shape {pt.shape}"
        )
    return pt


@dataclass(frozen=True)
class SymplecticForm:
    """Constant symplectic structure on R^{2n} in (q, p) coordinate ordering."""

    n: int

    @property
    def lowered(self) -> np.ndarray:
        """Matrix of the 2-form (index-lowered): omega[q_j, p_j] = -1."""
        w = np.zeros((2 * self.n, 2 * self.n))
        w[: self.n, self.n:] = -np.eye(self.n)
        w[self.n:, : self.n] = np.eye(self.n)
        return w

    @property
    def raised(self) -> np.ndarray:
        """Inverse matrix (index-raised): dc/dt = raised @ grad H."""
        w = np.zeros((2 * self.n, 2 * self.n))
        w[: self.n, self.n:] = np.eye(self.n)
        w[self.n:, : self.n] = -np.eye(self.n)
        return w


class PhasePolynomial:
    """Real polynomial on R^{2n}, stored as {multi-index: coefficient}.

    Immutable in use: arithmetic returns new instances, zero coefficients
    are never stored.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms=None):
        if n < 1:
            raise ValueError("need n >= 1")
        object.__setattr__(self, "n", n)
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(e) for e in alpha)
            if len(alpha) != 2 * n or any(e < 0 for e in alpha):
                raise ValueError(f"bad multi-index {alpha} for n={n}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        object.__setattr__(self, "terms", {a: c for a, c in clean.items() if c != 0.0})

    def __setattr__(self, *_):
        raise AttributeError("PhasePolynomial is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "PhasePolynomial":
        return cls(n, {})

    @classmethod
    def constant(cls, n: int, value: float) -> "PhasePolynomial":
        return cls(n, {(0,) * (2 * n): value})

    @classmethod
    def coordinate(cls, n: int, mu: int) -> "PhasePolynomial":
        """The coordinate function y^mu, mu in 0..2n-1 ((q..., p...) order)."""
        if not 0 <= mu < 2 * n:
            raise ValueError(f"coordinate index {mu} out of range for n={n}")
        alpha = [0] * (2 * n)
        alpha[mu] = 1
        return cls(n, {tuple(alpha): 1.0})

    @classmethod
    def from_term_list(cls, n: int, term_list) -> "PhasePolynomial":
        """Build from [{'exponents': [...], 'coefficient': c}, ...] records."""
        terms = {}
        for rec in term_list:
            alpha = tuple(int(e) for e in rec["exponents"])
            terms[alpha] = terms.get(alpha, 0.0) + float(rec["coefficient"])
        return cls(n, terms)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: "PhasePolynomial") -> "PhasePolynomial":
        self._check(other)
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return PhasePolynomial(self.n, terms)

    def __sub__(self, other: "PhasePolynomial") -> "PhasePolynomial":
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, PhasePolynomial):
            self._check(other)
            terms = {}
            for a, ca in self.terms.items():
                for b, cb in other.terms.items():
                    key = tuple(x + y for x, y in zip(a, b))
                    terms[key] = terms.get(key, 0.0) + ca * cb
            return PhasePolynomial(self.n, terms)
        return PhasePolynomial(self.n, {a: c * float(other) for a, c in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return (isinstance(other, PhasePolynomial) and self.n == other.n
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return f"PhasePolynomial(n={self.n}, 0)"
        bits = [f"{c:+g}*y^{list(a)}" for a, c in sorted(self.terms.items())]
        return f"PhasePolynomial(n={self.n}, {' '.join(bits)})"

    def _check(self, other: "PhasePolynomial"):
        if self.n != other.n:
            raise DimensionMismatchError(
                f"polynomials over different phase spaces: n={self.n} vs n={other.n}"
            )

    # -- calculus ----------------------------------------------------------

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def eval(self, xi) -> float:
        pt = as_phase_point(xi, self.n)
        total = 0.0
        for alpha, c in self.terms.items():
            term = c
            for x, e in zip(pt, alpha):
                if e:
                    term *= x ** e
            total += term
        return total

    def partial_derivative(self, mu: int) -> "PhasePolynomial":
        """Exact formal derivative along coordinate mu (0-based)."""
        if not 0 <= mu < 2 * self.n:
            raise ValueError(f"derivative index {mu} out of range for n={self.n}")
        terms = {}
        for alpha, c in self.terms.items():
            if alpha[mu] == 0:
                continue
            beta = list(alpha)
            beta[mu] -= 1
            terms[tuple(beta)] = terms.get(tuple(beta), 0.0) + c * alpha[mu]
        return PhasePolynomial(self.n, terms)

    def gradient(self, xi) -> np.ndarray:
        return np.array([self.partial_derivative(mu).eval(xi)
                         for mu in range(2 * self.n)])

    def taylor_coefficient(self, alpha, xi) -> float:
        """d^alpha f(xi) / alpha!, computed exactly from the coefficients."""
        pt = as_phase_point(xi, self.n)
        total = 0.0
        for beta, c in self.terms.items():
            if any(b < a for a, b in zip(alpha, beta)):
                continue
            term = c
            for a, b, x in zip(alpha, beta, pt):
                term *= math.comb(b, a)
                e = b - a
                if e:
                    term *= x ** e
            total += term
        return total


def poisson_bracket(f: PhasePolynomial, g: PhasePolynomial) -> PhasePolynomial:
    """{f, g} = omega_raised^{mu nu} d_mu f d_nu g; yields {q, p} = +1."""
    f._check(g)
    n = f.n
    out = PhasePolynomial.zero(n)
    for j in range(n):
        out = out + f.partial_derivative(j) * g.partial_derivative(n + j)
        out = out - f.partial_derivative(n + j) * g.partial_derivative(j)
    return out


def quantize_at(f: PhasePolynomial, xi, ops=None,
                basis: BasisConfig | None = None) -> OperatorMatrix:
    """Operator assigned to f at base point xi over the given basis.

    Terminating Taylor series around xi contracted with the symmetrized
    canonical monomials; Hermitian to machine precision, linear in f, and
    Weyl-ordered quantization when xi = 0.
    """
    if ops is None:
        if basis is None:
            raise ValueError("quantize_at needs canonical ops or a basis")
        ops = canonical_ops(basis)
    if basis is None:
        basis = ops[0].basis
    if len(ops) != 2 * f.n:
        raise DimensionMismatchError(
            f"got {len(ops)} canonical operators for a polynomial with n={f.n}"
        )
    if f.degree > MAX_QUANTIZE_DEGREE:
        raise ValueError(
            f"polynomial degree {f.degree} exceeds the quantization cap "
            f"{MAX_QUANTIZE_DEGREE}"
        )
    pt = as_phase_point(xi, f.n)
    table = symmetrized_monomials(basis, f.degree, ops=ops)
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for alpha in sorted(table):
        coeff = f.taylor_coefficient(alpha, pt)
        if coeff != 0.0:
            out += coeff * table[alpha]
    return OperatorMatrix(basis, out)


# -- convenience builders used by experiments and tests ---------------------

def coordinate_labels(n: int) -> list[str]:
    if n == 1:
        return ["q", "p"]
    return [f"q{j+1}" for j in range(n)] + [f"p{j+1}" for j in range(n)]


def oscillator_hamiltonian(n: int = 1) -> PhasePolynomial:
    """H = (q^2 + p^2) / 2 summed over modes."""
    H = PhasePolynomial.zero(n)
    for mu in range(2 * n):
        y = PhasePolynomial.coordinate(n, mu)
        H = H + 0.5 * (y * y)
    return H


def quartic_hamiltonian() -> PhasePolynomial:
    """H = p^2/2 + q^4/4 on one degree of freedom."""
    q = PhasePolynomial.coordinate(1, 0)
    p = PhasePolynomial.coordinate(1, 1)
    return 0.5 * (p * p) + 0.25 * (q * q * q * q)
