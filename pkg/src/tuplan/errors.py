"""Exception types shared across the package."""


class TuplanError(Exception):
    """Base class for all errors raised by tuplan."""


class EmptyEnvironment(TuplanError):
    pass


class RobotOnObstacle(TuplanError):
    pass


class NegativeMarking(TuplanError):
    pass


class NotStateMachine(TuplanError):
    pass


class DimensionMismatch(TuplanError):
    pass


class TokenCountMismatch(TuplanError):
    pass


class UnsupportedLayout(TuplanError):
    pass


class TooLarge(TuplanError):
    pass


class NumericalFailure(TuplanError):
    pass


class NotIntegral(TuplanError):
    pass


class FlowInconsistent(TuplanError):
    pass


class BoundaryMismatch(TuplanError):
    pass


class InsufficientFreeSpace(TuplanError):
    pass


class ParseError(TuplanError):
    """Malformed input file. ``where`` names the offending line or field."""

    def __init__(self, message, where=None):
        self.where = where
        if where is not None:
            message = f"{where}: {message}"
        super().__init__(message)


class Infeasible(TuplanError):
    """A planning phase found no feasible solution.

    ``phase`` is one of ``"boolean-task"``, ``"reachability"`` or ``"staged"``.
    """

    def __init__(self, phase, message="", iteration=None):
        self.phase = phase
        self.iteration = iteration
        text = f"infeasible in phase {phase!r}"
        if iteration is not None:
            text += f" at iteration {iteration}"
        if message:
            text += f": {message}"
        super().__init__(text)


class BudgetExhausted(TuplanError):
    """Branch-and-bound ran out of nodes before proving optimality."""

    def __init__(self, incumbent, bound, nodes):
        self.incumbent = incumbent
        self.bound = bound
        self.nodes = nodes
        if incumbent is not None:
            gap = incumbent.objective_value - bound
            msg = f"node budget exhausted after {nodes} nodes (gap {gap:.6g})"
        else:
            msg = f"node budget exhausted after {nodes} nodes, no incumbent"
        self.gap = None if incumbent is None else incumbent.objective_value - bound
        super().__init__(msg)
