"""
Error types shared by every service.
Each error carries the machine-readable code reported by the CLI and the exit
code it maps to (1 = domain failure, 2 = usage or parse error).
"""


class BoundError(Exception):
    """Base class for all calculator errors"""

    code = "ERROR"
    exit_code = 1

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class ProblemError(BoundError):
    """Malformed moment problem (EMPTY_BOX, DIM_MISMATCH, BAD_EXPR)"""

    code = "BAD_EXPR"
    exit_code = 2


class ExpressionError(BoundError):
    code = "BAD_EXPR"
    exit_code = 2


class ExprSyntaxError(ExpressionError):
    code = "SYNTAX_ERROR"

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset

    def to_dict(self):
        data = super().to_dict()
        data["offset"] = self.offset
        return data


class UnknownIdentifierError(ExpressionError):
    code = "UNKNOWN_IDENTIFIER"


class ArityError(ExpressionError):
    code = "ARITY_ERROR"


class DomainError(BoundError):
    """A function was evaluated outside its domain; `subtree` is the culprit"""

    code = "DOMAIN_ERROR"

    def __init__(self, message, subtree=None):
        super().__init__(message)
        self.subtree = subtree


class ParameterError(BoundError):
    code = "PARAM_OUT_OF_RANGE"


class NonConvexError(BoundError):
    code = "NONCONVEX_PHI"


class InfeasibleProblemError(BoundError):
    code = "INFEASIBLE"


class SingularMatrixError(BoundError):
    code = "SINGULAR_A"


class PolynomialError(BoundError):
    code = "ZERO_LEADING_COEFF"


class TooLargeError(BoundError):
    code = "TOO_LARGE"


def require(condition, message, code=None, error=ParameterError):
    """Raise `error` unless `condition` holds"""
    if not condition:
        raise error(message, code)
