"""Exception types shared across the toolkit.

Every error carries a stable ``code`` string so CLI output and service
responses can report machine-readable causes.
"""


class ToolkitError(Exception):
    code = "TOOLKIT_ERROR"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class MalformedFileError(ToolkitError):
    code = "MALFORMED_FILE"


class DuplicateDomainError(ToolkitError):
    code = "DUPLICATE_DOMAIN"


class EmptySchemaError(ToolkitError):
    code = "EMPTY_SCHEMA"


class OutOfRangeError(ToolkitError):
    code = "OUT_OF_RANGE"


class UnknownDomainError(ToolkitError):
    code = "UNKNOWN_DOMAIN"


class UnknownNameError(ToolkitError):
    code = "UNKNOWN_NAME"


class CollisionError(ToolkitError):
    code = "COLLISION"


class EmptyInputError(ToolkitError):
    code = "EMPTY_INPUT"


class InsufficientCorpusError(ToolkitError):
    code = "INSUFFICIENT_CORPUS"


class InvalidScoreError(ToolkitError):
    code = "INVALID_SCORE"


class UnknownStudyError(ToolkitError):
    code = "UNKNOWN_STUDY"


class UnknownItemError(ToolkitError):
    code = "UNKNOWN_ITEM"
