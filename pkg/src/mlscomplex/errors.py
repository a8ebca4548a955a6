"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class ScanParseError(ValueError):
    """A scan file could not be read.

    ``line`` is the 1-based line (text) or record (binary) number when known.
    """

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ScanOrderError(ScanParseError):
    """Pulse ids are not strictly increasing and contiguous."""


class ScanFormatError(ScanParseError):
    """A row is well-formed but violates the format rules (echo count, ranks...)."""


class ParameterError(ValueError):
    """Invalid numeric parameter or configuration."""


class ConfigurationError(ParameterError):
    """Required configuration is missing, e.g. no theta and no N_p override."""


class DegenerateEdgeError(ValueError):
    """Edge with coincident endpoints; it has no direction and cannot be scored."""


class ConsistencyError(RuntimeError):
    """Inputs that should describe the same scan or complex disagree."""
