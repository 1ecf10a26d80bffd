"""Exact lumping of polynomial ODE systems by differential equivalence.

Two reduction notions are supported: forward (block sums obey a reduced
system of their own) and backward (variables in a block have identical
solutions from blockwise-equal initial values). Candidate partitions come
from a syntactic partition-refinement engine or from a counterexample-guided
loop over an external SMT solver; every accepted reduction can be validated
numerically against the original system.
"""

from .errors import (BenchSpecError, DegreeError, DequivError, DivergenceError,
                     FreeParameterError, MissingInitialError,
                     NotFbRepresentableError, OracleError, ParseError,
                     PartitionError, QuotientError, SimulationError,
                     SolverError, SolverModelError, SolverTransportError,
                     UnequalBlockInitialsError)
from .model import (Parameter, PolynomialODESystem, Reaction, ReactionNetwork,
                    mass_action_odes)
from .partition import Partition, refinements, set_partitions
from .poly import Coeff, Polynomial, format_scalar
from .quotient import (QuotientModel, block_sum, build_bde_quotient,
                       build_fde_quotient, collapse)
from .ingest import (format_poly, load_model, load_partition, parse_ode,
                     parse_partition, parse_rn, print_model, print_ode,
                     print_partition, print_report, print_rn)
from .syntactic import (CheckResult, Violation, check_bde, check_fb,
                        oracle_coarsest, refine_bde, refine_fb)

__version__ = "0.1.0"
