"""
Error hierarchy for Submersion Lab

Every failure a numerical service can signal is a LabError subclass,
so callers (runner, API, CLI) can catch the family at once.
"""

from typing import Optional


class LabError(Exception):
    """Base class for all lab errors"""


class ChartDomainError(LabError, ValueError):
    """Point or finite-difference stencil outside a non-periodic chart axis"""


class ConditioningError(LabError, ArithmeticError):
    """Near-degenerate metric or singular horizontal restriction"""


class EscapeError(LabError, RuntimeError):
    """Trajectory left the chart during integration"""

    def __init__(self, message: str, exit_time: float):
        super().__init__(f"{message} (exit time {exit_time:.6g})")
        self.exit_time = exit_time


class NoConvergenceError(LabError, RuntimeError):
    """Shooting did not converge"""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class OutOfRangeError(LabError, ValueError):
    """Target beyond the declared trust radius"""


class ContractError(LabError, ValueError):
    """Caller violated an operation precondition"""


class NotASubmersionError(LabError, ValueError):
    """Differential is rank deficient at the queried point"""


class ScenarioNotFoundError(LabError, KeyError):
    """Unknown scenario name"""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown scenario"


class ScenarioParamsError(LabError, ValueError):
    """Scenario parameters do not satisfy the schema"""


class OracleMismatchError(LabError, AssertionError):
    """Closed-form oracle disagrees with the generic pipeline"""


class OutputPathError(LabError, OSError):
    """Report destination cannot be created or written"""
