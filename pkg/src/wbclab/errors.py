"""Exception hierarchy shared across the workbench."""


class WorkbenchError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(WorkbenchError):
    """A file or buffer does not match its declared format."""


class ConfigError(WorkbenchError):
    """A configuration value violates its contract."""


class AlignmentError(WorkbenchError):
    """Ids, shapes, or lengths of paired inputs do not line up."""


class NumericFailure(WorkbenchError):
    """A non-finite value appeared where finite math was required."""

    def __init__(self, message: str, parameter: str | None = None):
        super().__init__(message)
        self.parameter = parameter


class VerdictRuleError(WorkbenchError):
    """A review verdict violates the category/origin rules."""


class UnknownCaseError(WorkbenchError):
    """A verdict referenced a case id that is not in the catalog."""
