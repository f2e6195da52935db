"""
Error kinds raised by the sensing services.

Each class carries the process exit code the management commands use when the
error escapes to the command line.
"""
from typing import List, Optional


class SensingError(Exception):
    """Base class for all simulator, training and runner errors"""
    exit_code = 1


class InvalidCutoffError(SensingError):
    """Fock cutoff below the minimum of two levels"""


class ShapeError(SensingError):
    """Vector or operator dimensions do not match the subsystem layout"""


class ContractError(SensingError):
    """A precondition on an argument was violated"""


class LeakageError(SensingError):
    """Population in the top Fock levels exceeds the leakage tolerance"""

    def __init__(self, message: str, leakage: float = 0.0, cutoff: Optional[int] = None):
        super().__init__(message)
        self.leakage = leakage
        self.cutoff = cutoff


class ConfigError(SensingError):
    """Invalid task, architecture or experiment configuration"""
    exit_code = 3

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class PrecisionError(SensingError):
    """Quadrature rule failed its node-doubling convergence check"""


class NumericError(SensingError):
    """A loss or gradient evaluation produced non-finite values"""


class TransformError(SensingError):
    """A symplectic data transform cannot be applied"""


class UndefinedError(SensingError):
    """Quantity is undefined for the given arguments"""


class MissingInputError(SensingError):
    """A referenced record, state or map does not exist"""
    exit_code = 4


class OptimizationFailure(SensingError):
    """Every restart diverged or stayed infeasible"""
    exit_code = 2

    def __init__(self, message: str, traces: Optional[List[List[float]]] = None):
        super().__init__(message)
        self.traces = traces or []
