"""Exception types shared across the solver."""


class SolverError(Exception):
    """Base class for all solver-raised errors."""


class ParseError(SolverError):
    """Syntax error in the concrete formula syntax, with position info."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class AlphabetMismatch(SolverError):
    """Two automata over different alphabets were combined."""


class NotDeterministic(SolverError):
    """Complement was requested on a nondeterministic or incomplete automaton."""


class ResourceLimit(SolverError):
    """A configured state/term cap was exceeded; distinct from any verdict."""


class SolverTimeout(SolverError):
    """Cooperative wall-clock timeout hit inside a fixpoint loop."""


class OracleCapExceeded(SolverError):
    """The brute-force oracle hit its assignment-count budget.

    Means "no witness found within budget", never a definite verdict.
    """
