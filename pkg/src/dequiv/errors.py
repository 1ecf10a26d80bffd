"""Exception hierarchy shared across the package."""


class DequivError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(DequivError):
    """Raised on malformed model, partition, or expression text.

    Attributes:
        message: description of the problem.
        line: 1-based line number of the offending token.
        col: 1-based column number of the offending token.
    """

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class DegreeError(DequivError):
    """Raised when an operation is restricted to a maximum polynomial degree."""


class FreeParameterError(DequivError):
    """Raised when unbound parameters block a numeric or syntactic operation."""


class MissingInitialError(DequivError):
    """Raised when an operation needs initial values that are not present."""


class PartitionError(DequivError):
    """Raised for malformed partitions (bad cover, unknown names, bad block)."""


class QuotientError(DequivError):
    """Base class for errors while building a reduced model."""


class UnequalBlockInitialsError(QuotientError):
    """Raised when a backward-mode quotient needs blockwise-equal initials."""


class NotFbRepresentableError(QuotientError):
    """Raised when a block-sum derivative cannot be rewritten exactly over
    the macro-variables, i.e. the candidate partition is not forward-valid."""


class SimulationError(DequivError):
    """Raised when numerical integration cannot be carried out."""


class DivergenceError(SimulationError):
    """Raised when a trajectory leaves the representable range.

    Attributes:
        time: integration time at which the state became non-finite.
    """

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class SolverError(DequivError):
    """Base class for SMT backend errors."""


class SolverTransportError(SolverError):
    """Raised when the solver process dies or the protocol breaks down.

    Distinct from a solver answering `unknown`, which is a normal result.
    """


class SolverModelError(SolverError):
    """Raised when a solver model is inconsistent with the query it answers
    (e.g. a witness that fails to separate anything during refinement)."""


class BenchSpecError(DequivError):
    """Raised for infeasible benchmark-generator requests."""


class OracleError(DequivError):
    """Raised when the brute-force oracle refuses or cannot certify a result."""
