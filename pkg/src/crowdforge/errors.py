"""Error types shared across the package.

Every operational error carries a stable ``code`` string so the HTTP
gateway and the CLI can map failures without parsing messages.
"""

from __future__ import annotations


class CrowdforgeError(Exception):
    """Base class for operational errors with a stable code."""

    code = "error"

    def __init__(self, message: str, *, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class AttemptsExhaustedError(CrowdforgeError):
    code = "attempts-exhausted"


class AlreadyPassedError(CrowdforgeError):
    code = "already-passed"


class NotLaunchedError(CrowdforgeError):
    code = "not-launched"


class InvalidOptionError(CrowdforgeError):
    code = "invalid-option"


class AlreadySubmittedError(CrowdforgeError):
    code = "already-submitted"


class LeaseExpiredError(CrowdforgeError):
    code = "lease-expired"


class DigestMismatchError(CrowdforgeError):
    code = "digest-mismatch"


class UnsupportedFormatError(CrowdforgeError):
    code = "unsupported-format-version"


class DuplicateRegistrationError(CrowdforgeError):
    code = "duplicate-registration"


class UnknownEntityError(CrowdforgeError):
    code = "unknown-entity"
