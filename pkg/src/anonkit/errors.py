"""Exception hierarchy.

Every error raised on purpose by the toolkit derives from :class:`AnonkitError`
so the CLI can tell configuration problems from bugs.
"""

from __future__ import annotations


class AnonkitError(Exception):
    """Base class for all toolkit errors."""


# -- core / policy ---------------------------------------------------------

class InvalidEntityType(AnonkitError, ValueError):
    pass


class PolicyError(AnonkitError):
    """Raised by ``validate_policy`` with every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(f"invalid policy: {lines}")


class MissingSecretKey(AnonkitError):
    pass


# -- pseudonym -------------------------------------------------------------

class EmptyValue(AnonkitError, ValueError):
    pass


class EmptyKey(AnonkitError, ValueError):
    pass


class LengthOutOfRange(AnonkitError, ValueError):
    pass


class MalformedSlug(AnonkitError, ValueError):
    pass


class SlugSpaceExhausted(AnonkitError):
    pass


# -- vault -----------------------------------------------------------------

class VaultError(AnonkitError):
    pass


class VaultMissing(VaultError):
    pass


class VaultWriteFailure(VaultError):
    pass


class CorruptRecordLine(VaultError):
    def __init__(self, path, line_no: int, reason: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: corrupt record ({reason})")


class DuplicateDigest(VaultError):
    pass


class DuplicateSlug(VaultError):
    pass


class SlugConflict(VaultError):
    """Same slug already bound to a different digest; the caller must extend."""


class InvalidAuditEvent(VaultError, ValueError):
    pass


class KeyMismatch(VaultError):
    """Stored digest does not verify under the supplied key."""


# -- recognizers -----------------------------------------------------------

class PatternRuntimeFailure(AnonkitError):
    def __init__(self, recognizer_id: str, cause: BaseException):
        self.recognizer_id = recognizer_id
        super().__init__(f"recognizer {recognizer_id!r} failed: {cause}")


class EmptyTerm(AnonkitError, ValueError):
    pass


class DeclarationError(AnonkitError):
    pass


# -- processors ------------------------------------------------------------

class DocumentError(AnonkitError):
    pass


class UnreadableFile(DocumentError):
    pass


class MalformedCsv(DocumentError):
    def __init__(self, row: int, col: int, reason: str):
        self.row = row
        self.col = col
        super().__init__(f"malformed CSV at row {row}, column {col}: {reason}")


class MalformedJson(DocumentError):
    pass


class MalformedXml(DocumentError):
    def __init__(self, line: int, col: int, reason: str):
        self.line = line
        self.col = col
        super().__init__(f"malformed XML at line {line}, column {col}: {reason}")


class ProcessingFailed(DocumentError):
    """Wraps any processor error together with the offending path."""

    def __init__(self, path, cause: BaseException):
        self.path = path
        self.cause = cause
        super().__init__(f"{path}: {cause}")


# -- ocr -------------------------------------------------------------------

class OcrError(AnonkitError):
    pass


class OcrEngineMissing(OcrError):
    pass


class OcrEngineFailed(OcrError):
    def __init__(self, returncode: int, stderr: str):
        self.returncode = returncode
        self.stderr = stderr
        super().__init__(f"OCR engine exited with {returncode}: {stderr.strip()}")


class MissingPlaceholder(OcrError, ValueError):
    pass


# -- eval ------------------------------------------------------------------

class OverlappingGold(AnonkitError, ValueError):
    pass
