"""Exact analysis and fast simulation of j-sample majority consensus dynamics."""

from .core import (
    CapacityError,
    CheckResult,
    DomainError,
    MajorityLabError,
    MajorityState,
    ModelKind,
    NumericError,
    ProcessSpec,
    SeedPolicy,
    ValidationError,
    derive_stream,
    validate_state,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CheckResult",
    "DomainError",
    "MajorityLabError",
    "MajorityState",
    "ModelKind",
    "NumericError",
    "ProcessSpec",
    "SeedPolicy",
    "ValidationError",
    "derive_stream",
    "validate_state",
    "__version__",
]
