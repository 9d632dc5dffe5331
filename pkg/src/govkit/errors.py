"""Error taxonomy shared by the engine, DSL, API, and CLI.

Every error carries a stable machine code; the API maps codes 1:1 onto HTTP
responses, and the engine records recoverable ones in the audit log instead
of crashing.
"""

from __future__ import annotations


class GovkitError(Exception):
    code = "INTERNAL"
    http_status = 500

    def __init__(self, message: str, *, field_errors: list[dict] | None = None):
        super().__init__(message)
        self.message = message
        self.field_errors = field_errors or []

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.field_errors:
            out["field_errors"] = self.field_errors
        return out


class ConflictError(GovkitError):
    code = "CONFLICT"
    http_status = 409


class InvalidInputError(GovkitError):
    code = "INVALID_INPUT"
    http_status = 400


class UnknownActionTypeError(GovkitError):
    code = "UNKNOWN_ACTION_TYPE"
    http_status = 400


class ForbiddenError(GovkitError):
    code = "FORBIDDEN"
    http_status = 403


class UnauthorizedError(GovkitError):
    code = "UNAUTHORIZED"
    http_status = 401


class NotFoundError(GovkitError):
    code = "NOT_FOUND"
    http_status = 404


class StaleVoteError(GovkitError):
    code = "STALE_VOTE"
    http_status = 409


class SchemaViolationError(GovkitError):
    code = "SCHEMA_VIOLATION"
    http_status = 422


class DataLimitError(GovkitError):
    code = "DATA_LIMIT"
    http_status = 413


class LastConstitutionPolicyError(GovkitError):
    code = "LAST_CONSTITUTION_POLICY"
    http_status = 409


class NoUndoRecordError(GovkitError):
    code = "NO_UNDO_RECORD"
    http_status = 409


class DependentStateError(GovkitError):
    code = "DEPENDENT_STATE"
    http_status = 409


class ExecutionFailedError(GovkitError):
    code = "EXECUTION_FAILED"
    http_status = 502


class StorageFailedError(GovkitError):
    code = "STORAGE_FAILED"
    http_status = 503


class BadSignatureError(GovkitError):
    code = "BAD_SIGNATURE"
    http_status = 401


# ---------------------------------------------------------------------------
# Policy-language errors. Parse-time errors abort enactment; evaluation errors
# are recoverable decisions (the engine audits them and substitutes the
# function's neutral value).
# ---------------------------------------------------------------------------


class PolicySyntaxError(GovkitError):
    code = "SYNTAX_ERROR"
    http_status = 422

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.detail = message


class MissingFunctionError(GovkitError):
    code = "MISSING_FUNCTION"
    http_status = 422

    def __init__(self, missing: list[str]):
        super().__init__("missing required functions: " + ", ".join(sorted(missing)))
        self.missing = sorted(missing)


class UnknownIdentifierError(GovkitError):
    code = "UNKNOWN_IDENTIFIER"
    http_status = 422

    def __init__(self, name: str, line: int, col: int):
        super().__init__(f"{line}:{col}: unknown identifier {name!r}")
        self.name = name
        self.line = line
        self.col = col


class PolicyEvalError(GovkitError):
    """Base for errors raised while a policy function runs."""

    code = "RUNTIME_ERROR"
    http_status = 422


class PolicyRuntimeError(PolicyEvalError):
    code = "RUNTIME_ERROR"


class PolicyTypeError(PolicyEvalError):
    code = "TYPE_ERROR"


class BudgetExceededError(PolicyEvalError):
    code = "BUDGET_EXCEEDED"


class CapabilityDeniedError(PolicyEvalError):
    code = "CAPABILITY_DENIED"
