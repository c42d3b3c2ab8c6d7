"""
Exception hierarchy for hkflow
"""

from typing import Optional


class HKFlowError(Exception):
    """Base class for every error raised by hkflow"""


class ParameterError(HKFlowError, ValueError):
    """A value lies outside the domain an operation accepts"""


class ConfigError(HKFlowError):
    """Malformed run configuration"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class PairValidationError(HKFlowError):
    """A (g, psi) pair violates one of the structural assumptions"""

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class SolverAbort(HKFlowError):
    """The time integrator stopped before reaching t_end"""

    def __init__(self, reason: str, step: int, time: float):
        self.reason = reason
        self.step = step
        self.time = time
        super().__init__(f"solver aborted at step {step} (t={time:.6g}): {reason}")


class HarnessError(HKFlowError):
    """An experiment cannot be evaluated on the data it was given"""
