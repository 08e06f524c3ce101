from typing import List, NamedTuple


class WasteSensingError(ValueError):
    """Base class for all data and domain errors raised by this package"""


class DomainError(WasteSensingError):
    """A numeric argument lies outside the domain of the operation"""


class EmptySessionError(WasteSensingError):
    """A session (or session log body) holds no readings"""


class CalibrationError(WasteSensingError):
    """Calibration points cannot produce a model"""


class ProfileFormatError(WasteSensingError):
    """A calibration profile or scenario document is malformed"""


class ScenarioError(WasteSensingError):
    """A simulator scenario or series request is invalid"""


class LineDiagnostic(NamedTuple):
    line_number: int
    line: str
    message: str

    def __str__(self) -> str:
        return f"line {self.line_number}: {self.message} ({self.line.strip()!r})"


class SessionParseError(WasteSensingError):
    """One or more session log lines could not be parsed; the whole file is rejected"""

    def __init__(self, diagnostics: List[LineDiagnostic], source: str = "<session>"):
        self.diagnostics = list(diagnostics)
        self.source = source
        lines = "\n".join(f"  {source}: {diag}" for diag in self.diagnostics)
        super().__init__(f"{len(self.diagnostics)} malformed line(s) in {source}:\n{lines}")
