"""Exception hierarchy.

Every error carries a machine-readable ``code`` (the class name) so the
service and CLI can report failures without parsing messages.
"""

from __future__ import annotations


class OracleError(Exception):
    """Base class for all domain errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InvalidCoordinate(OracleError):
    pass


class ParseError(OracleError):
    def __init__(self, message: str, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DanglingReference(OracleError):
    def __init__(self, way_id: int, missing: list[int]) -> None:
        super().__init__(f"way {way_id} references missing nodes {missing}")
        self.way_id = way_id
        self.missing = missing


class DuplicateObject(OracleError):
    pass


class BuildRejected(OracleError):
    pass


class AreaNotFound(OracleError):
    pass


class AmbiguousArea(OracleError):
    def __init__(self, name: str, candidates: list[int]) -> None:
        super().__init__(f"area {name!r} is ambiguous; candidate ways {candidates}")
        self.candidates = candidates


class NoObjects(OracleError):
    pass


class InvalidLimit(OracleError):
    pass


class InvalidBoundingBox(OracleError):
    pass


class ObjectNotFound(OracleError):
    pass


class NoMatch(OracleError):
    pass


class IdOverflow(OracleError):
    pass


class MalformedPayload(OracleError):
    pass


class UnknownFunction(OracleError):
    pass


class BadRequest(OracleError):
    def __init__(self, field: str, reason: str = "invalid") -> None:
        super().__init__(f"{field}: {reason}")
        self.field = field
