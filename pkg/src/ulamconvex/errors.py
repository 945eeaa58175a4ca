"""Exception hierarchy shared by all modules."""


class UlamError(Exception):
    """Base class for every error raised by :mod:`ulamconvex`."""


class NumericalError(UlamError):
    """A numerical procedure failed (non-convergence, singularity, ...)."""


# map_model
class OutOfDomain(UlamError, ValueError):
    pass


class BelowResolutionFloor(UlamError, ValueError):
    """A point lies below the smallest materialised partition point."""


class NotInImage(UlamError, ValueError):
    pass


class NotContracting(UlamError, ValueError):
    """``a_n + D1 >= 1``: the sup-norm inequality gives no uniform bound."""


# truncation
class IndexOutOfRange(UlamError, IndexError):
    pass


# ulam_core
class InvalidK(UlamError, ValueError):
    pass


class DimensionMismatch(UlamError, ValueError):
    pass


class QuadratureFailure(NumericalError):
    pass


# solver
class NoConvergence(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class NegativeDensity(NumericalError):
    pass


# orbit_oracle
class DegenerateOrbit(NumericalError):
    pass


# branch_dsl
class DSLSyntaxError(UlamError, SyntaxError):
    """Parse failure; ``offset`` is the byte offset into the source text."""

    def __init__(self, message, text="", offset=0):
        self.text_source = text
        self.offset_bytes = offset
        pointer = ""
        if text:
            pointer = "\n  " + text + "\n  " + " " * len(text.encode()[:offset].decode(errors="ignore")) + "^"
        full = f"{message} at byte {offset}{pointer}"
        super().__init__(full)
        self.msg = full
        self.offset = offset
        self.expected = message


class DomainError(UlamError, ArithmeticError):
    """Expression evaluation left the real domain (sqrt of a negative, 1/0, ...)."""

    def __init__(self, kind, subexpr, branch=None):
        self.kind = kind
        self.subexpr = subexpr
        self.branch = branch
        where = f" (branch {branch})" if branch is not None else ""
        super().__init__(f"{kind} in '{subexpr}'{where}")


class MapDefinitionError(UlamError, ValueError):
    pass
