"""Error kinds shared by every module; the CLI maps them to exit codes."""
from __future__ import annotations


class DomainError(Exception):
    """A domain failure with a machine-readable kind (CLI exit code 1)."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.message = message

    def to_json(self) -> dict:
        return {"error": self.kind, "message": self.message}


class Infeasible(DomainError):
    def __init__(self, message: str):
        super().__init__("infeasible", message)


class Unsupported(DomainError):
    def __init__(self, message: str):
        super().__init__("unsupported", message)


class NotFound(DomainError):
    def __init__(self, message: str):
        super().__init__("not-found", message)


class Degenerate(DomainError):
    def __init__(self, message: str):
        super().__init__("degenerate-sample", message)
