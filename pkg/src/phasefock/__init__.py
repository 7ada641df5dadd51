"""Phase-space quantum mechanics in a truncated Fock basis.

The package quantizes polynomial observables at arbitrary phase-space base
points, transports states unitarily between base points, integrates
Schrodinger dynamics over carrier curves, and measures how canonical
moments scale with hbar; the bundled experiments contrast curves solving
Hamilton's equation with fixed base points.
"""

__version__ = "0.1.0"

from .errors import (ConfigSchemaError, DimensionMismatchError,
                     NormalizationError, PhasefockError, SolverError,
                     TruncationError)
from .fock import (BasisConfig, OperatorMatrix, StateVector,
                   build_canonical_ops, canonical_ops, commutator,
                   expectation, fock_state, identity_op,
                   position_wavefunction, symmetrized_product, unitary_exp)
from .polynomials import (PhasePolynomial, SymplecticForm, as_phase_point,
                          oscillator_hamiltonian, poisson_bracket,
                          quantize_at, quartic_hamiltonian)
from .transport import (ConnectionForm, SymplecticPotential, TransportPair,
                        connection_apply, displacement, equivalence_map,
                        parallel_section_value)
from .dynamics import (CurveSpec, EvolutionResult, Trajectory, energy_drift,
                       evolve, integrate_hamilton, modified_hamiltonian,
                       time_grid)
from .diagnostics import (ClassicalLimitReport, MomentReport, ScalingFit,
                          classical_limit_report, moment, moment_tuples,
                          observable_expectation, scaling_fit)

__all__ = [name for name in dir() if not name.startswith("_")]
