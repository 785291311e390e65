"""Exception types carrying a machine-readable ``code``."""

from __future__ import annotations


class LabError(Exception):
    """Base error. ``code`` is a short upper-case tag such as ``NOT_NORMALIZED``."""

    exit_code = 3

    def __init__(self, code: str, message: str = ""):
        self.code = code
        self.message = message or code
        super().__init__(f"{code}: {message}" if message else code)


class ValidationError(LabError, ValueError):
    """Bad input: malformed distribution, parameter out of range, failed precondition."""

    exit_code = 1


class InfeasibleError(LabError):
    """A constrained problem has no admissible solution within the search bracket."""

    exit_code = 2
