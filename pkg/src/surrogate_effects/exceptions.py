"""Exception hierarchy shared across the package."""


class GraphError(ValueError):
    """Malformed path diagram or invalid graph query."""


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("directed edges form a cycle: " + " -> ".join(self.cycle))


class UnknownVertexError(GraphError):
    pass


class MissingEdgeError(GraphError):
    pass


class OverlapError(GraphError):
    pass


class RoleError(ValueError):
    """A role assignment does not fit the diagram it is checked against."""


class ParseError(ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.reason = message


class InfeasibleModelError(ValueError):
    """Coefficients leave no room for a positive error variance."""


class IdentificationError(ArithmeticError):
    """Base class for failures while recovering a squared total effect.

    ``condition`` names the check that failed, so callers (and the CLI)
    can report it without parsing the message.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "message": str(self),
            "condition": self.condition,
        }


class CriterionNotSatisfied(IdentificationError):
    pass


class NotStandardized(IdentificationError):
    pass


class NonFactorizable(IdentificationError):
    pass


class NearZeroConcentration(IdentificationError):
    pass


class ModelMisfit(IdentificationError):
    pass


class EmptyPivot(IdentificationError):
    pass


class DegenerateDenominator(IdentificationError):
    pass


class SingularMatrixError(IdentificationError):
    pass
