"""Exception hierarchy shared by every tnfo module."""

from __future__ import annotations

from dataclasses import dataclass


class TnfoError(Exception):
    """Base class for all errors raised by tnfo."""


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ValidationError(TnfoError):
    """Network failed topology or parameter validation.

    Carries every violation found, not just the first one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


class InvalidParameter(TnfoError, ValueError):
    pass


class NonpositiveDiameter(InvalidParameter):
    pass


class NonpositiveInput(InvalidParameter):
    pass


class InvalidGeometry(InvalidParameter):
    pass


class PhaseOrderViolation(TnfoError, ValueError):
    pass


class InfeasibleSpec(TnfoError, ValueError):
    pass


class ScenarioMismatch(TnfoError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


class UnknownLoad(ScenarioMismatch):
    pass


class ZeroDemand(TnfoError, ZeroDivisionError):
    pass


class NonSquareSystem(TnfoError):
    pass


class NonFiniteValue(TnfoError, ArithmeticError):
    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)


class SolverError(TnfoError):
    pass


class LinearSolveFailure(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


class IterationLimit(SolverError):
    def __init__(self, message: str, x=None, report=None):
        self.x = x
        self.report = report
        super().__init__(message)


class FileFormatError(TnfoError):
    pass


class SchemaVersionMismatch(FileFormatError):
    pass


class UnitError(FileFormatError):
    pass
