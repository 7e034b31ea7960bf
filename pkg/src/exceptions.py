"""Error hierarchy shared by the engine modules."""
from typing import Optional


class OOFSKError(Exception):
    """Base class for every engine error"""


class DomainError(OOFSKError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class ConfigurationError(OOFSKError, ValueError):
    """Invalid estimator, sweep or run configuration"""


class EstimationError(OOFSKError, ArithmeticError):
    """A non-finite integrand, log-ratio or finite-difference evaluation"""

    def __init__(self, message: str, sample_index: Optional[int] = None):
        if sample_index is not None:
            message = f"{message} (sample {sample_index})"
        super().__init__(message)
        self.sample_index = sample_index


class MinimizationError(EstimationError):
    """Bit-energy curve could not be evaluated for a minimum search"""
