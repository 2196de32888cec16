"""Error types raised across the measurement library and the CLI."""

from typing import Optional


class QmeasError(Exception):
    """Base error. Carries a machine-readable code, a module of origin and an exit code."""

    code: str = "QmeasError"
    module: str = "core"
    exit_code: int = 3

    def __init__(self, message: str, module: Optional[str] = None):
        super().__init__(message)
        if module is not None:
            self.module = module

    def as_line(self) -> str:
        """Single-line, machine-parsable rendering used by the CLI."""
        message = str(self).replace("\n", " ").replace('"', "'")
        return (
            f'error={self.code} module={self.module} exit={self.exit_code} '
            f'message="{message}"'
        )


# Configuration errors (exit 2)


class ConfigError(QmeasError):
    code = "ConfigError"
    module = "cli"
    exit_code = 2


class ConfigParseError(ConfigError):
    code = "ConfigParseError"


class ConfigValidationError(ConfigError):
    code = "ValidationError"


# Numerical errors (exit 3)


class NumericalError(QmeasError, ValueError):
    code = "NumericalError"
    exit_code = 3


class NotHermitian(NumericalError):
    code = "NotHermitian"
    module = "spectral"


class ToleranceCollapse(NumericalError):
    code = "ToleranceCollapse"
    module = "spectral"


class DimensionMismatch(NumericalError):
    code = "DimensionMismatch"
    module = "spectral"


class InvalidState(NumericalError):
    code = "InvalidState"
    module = "measurement"


class ZeroProbabilityBranch(NumericalError):
    code = "ZeroProbabilityBranch"
    module = "measurement"


class RefinementMismatch(NumericalError):
    code = "RefinementMismatch"
    module = "measurement"


class IncompleteBasis(NumericalError):
    code = "IncompleteBasis"
    module = "measurement"


class DuplicateLabels(NumericalError):
    code = "DuplicateLabels"
    module = "measurement"


class NonCommutingObservables(NumericalError):
    code = "NonCommutingObservables"
    module = "measurement"


class NotNormalized(NumericalError):
    code = "NotNormalized"
    module = "composite"


class IndexOutOfRange(NumericalError):
    code = "IndexOutOfRange"
    module = "composite"


class EqualIndices(NumericalError):
    code = "EqualIndices"
    module = "composite"


class DegenerateLocalObservable(NumericalError):
    code = "DegenerateLocalObservable"
    module = "composite"


class NonUnitDirection(NumericalError):
    code = "NonUnitDirection"
    module = "composite"


class EmptySample(NumericalError):
    code = "EmptySample"
    module = "chsh"


class InvalidModelParams(NumericalError):
    code = "InvalidModelParams"
    module = "coincidence"


# I/O errors (exit 4)


class ReportIOError(QmeasError):
    code = "IoError"
    module = "reports"
    exit_code = 4
