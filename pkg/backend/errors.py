"""
Exception types shared by the lab modules.

The CLI maps these onto exit codes:
- ConfigError, DomainError, PreconditionError, SamplingError and other LabErrors -> 2
- ConvergenceError -> 3
"""
from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for every error raised by the lab."""


class DomainError(LabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class PreconditionError(LabError, ValueError):
    """An operation precondition does not hold for the given inputs."""


class ConfigError(LabError, ValueError):
    """Invalid run configuration."""


class DegenerateFamilyError(LabError):
    """A trial family collapsed to (numerically) zero after projection."""


class SamplingError(LabError, RuntimeError):
    """A seeded random draw kept landing in a null set."""


class ConvergenceError(LabError, RuntimeError):
    """Iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v}" for k, v in sorted(self.diagnostics.items()))
        return f"{base} ({details})"
