"""Exception hierarchy shared by all modules."""


class RewreachError(Exception):
    """Base class for all library errors."""


class SortError(RewreachError):
    """Bad sort graph: undeclared sorts or a cycle through distinct sorts."""


class TermError(RewreachError):
    """Ill-formed term: unknown operator, arity mismatch, or sort clash.

    Carries ``position``, the argument path to the offending subterm,
    when the construction site knows it.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {list(position)})"
        super().__init__(message)
        self.position = position


class SignatureError(RewreachError):
    """Inconsistent operator declarations."""


class UnifyBudgetError(RewreachError):
    """A matching or unification problem exceeded the complexity cap."""


class RewriteBudgetError(RewreachError):
    """Simplification did not reach a normal form within the step budget.

    Convergence of the equations is a declared, unchecked assumption; this
    error is how a wrong declaration surfaces instead of a hang.
    """


class TheoryError(RewreachError):
    """A rewrite theory violates a hard validity requirement."""


class FormulaError(RewreachError):
    """A constraint or reachability formula violates a well-formedness rule."""


class PatternError(RewreachError):
    """A pattern predicate cannot be put in the required shape."""


class TransformError(RewreachError):
    """A theory transformation was applied to an unsuitable theory."""


class ProverError(RewreachError):
    """The proof search hit a configuration it is not allowed to work around."""


class OracleError(RewreachError):
    """Ground exploration cannot proceed (usually a missing environment domain)."""


class ParseError(RewreachError):
    """Syntax or static error in a theory or goal file, with a source line."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            message = f"{loc}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column
