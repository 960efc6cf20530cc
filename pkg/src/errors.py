# src/errors.py
# Error codes and exception classes shared by every module.
#
# Each exception carries a machine-readable ErrorCode plus the offending
# path/field, so the CLI can print it and tests can match on the code.

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ErrorCode(str, Enum):
    CAPACITY_OVERFLOW = "CAPACITY_OVERFLOW"
    INELIGIBLE_PREFERENCE = "INELIGIBLE_PREFERENCE"
    DUPLICATE_PREFERENCE = "DUPLICATE_PREFERENCE"
    SCORE_TIE = "SCORE_TIE"
    HIERARCHY_VIOLATION = "HIERARCHY_VIOLATION"
    CYCLE = "CYCLE"
    UNKNOWN_TYPE = "UNKNOWN_TYPE"
    UNKNOWN_INDIVIDUAL = "UNKNOWN_INDIVIDUAL"
    UNKNOWN_INSTITUTION = "UNKNOWN_INSTITUTION"
    UNKNOWN_CATEGORY = "UNKNOWN_CATEGORY"
    MISSING_SCORE = "MISSING_SCORE"
    DUPLICATE_ID = "DUPLICATE_ID"
    NEGATIVE_VALUE = "NEGATIVE_VALUE"
    BAD_SCHEMA = "BAD_SCHEMA"
    PARSE_ERROR = "PARSE_ERROR"
    QUOTA_INDEX_MISMATCH = "QUOTA_INDEX_MISMATCH"
    QUOTA_EXCEEDS_CAPACITY = "QUOTA_EXCEEDS_CAPACITY"
    FOREIGN_CONTRACT = "FOREIGN_CONTRACT"
    MIXED_INDIVIDUAL_STATE = "MIXED_INDIVIDUAL_STATE"
    NONTERMINATION_GUARD = "NONTERMINATION_GUARD"
    MALFORMED_LOG = "MALFORMED_LOG"
    SIZE_MISMATCH = "SIZE_MISMATCH"
    SIZE_TOO_LARGE = "SIZE_TOO_LARGE"
    INSTANCE_TOO_LARGE_FOR_EXHAUSTIVE = "INSTANCE_TOO_LARGE_FOR_EXHAUSTIVE"
    ENUMERATION_CAP_EXCEEDED = "ENUMERATION_CAP_EXCEEDED"
    BAD_PARAMS = "BAD_PARAMS"
    BAD_CONFIG = "BAD_CONFIG"


@dataclass(frozen=True)
class ValidationIssue:
    """One violated constraint: code, human message, and where it was found."""

    code: ErrorCode
    message: str
    path: str = ""

    def to_dict(self):
        return {"code": self.code.value, "message": self.message, "path": self.path}

    def __str__(self):
        where = f" (at {self.path})" if self.path else ""
        return f"{self.code.value}: {self.message}{where}"


class ReservationError(Exception):
    """Base class. `code` is an ErrorCode, `path` names the offending field."""

    def __init__(self, code, message, path=""):
        super().__init__(message)
        self.code = ErrorCode(code)
        self.message = message
        self.path = path

    def __str__(self):
        where = f" (at {self.path})" if self.path else ""
        return f"{self.code.value}: {self.message}{where}"


class InstanceValidationError(ReservationError):
    """Raised by validate_instance with every issue found, never just the first."""

    def __init__(self, issues, path=""):
        issues = list(issues)
        first = issues[0].code if issues else ErrorCode.BAD_SCHEMA
        summary = f"{len(issues)} validation issue(s)"
        super().__init__(first, summary, path)
        self.issues = issues

    def codes(self):
        return {issue.code for issue in self.issues}

    def __str__(self):
        lines = [f"{self.message}{' in ' + self.path if self.path else ''}:"]
        lines += [f"  - {issue}" for issue in self.issues]
        return "\n".join(lines)


class HierarchyError(InstanceValidationError):
    pass


class ParseError(ReservationError):
    def __init__(self, message, path="", line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(ErrorCode.PARSE_ERROR, message, path)
        self.line = line
        self.column = column


class ChoiceError(ReservationError):
    pass


class EngineError(ReservationError):
    pass


class OracleError(ReservationError):
    pass


class ConfigError(ReservationError):
    pass
