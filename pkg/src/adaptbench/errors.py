"""Exception hierarchy shared by all pipeline stages.

The CLI maps these onto exit codes: :class:`ConfigError` exits 2, any
:class:`DataError` exits 3, and plain ``OSError`` exits 4.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError):
    """Invalid or incomplete configuration (bad key, bad value, bad flag)."""


class DataError(ToolkitError):
    """Input data violates a stage contract."""

    line_no: int | None = None

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no
