"""Exception hierarchy shared across paraforge modules."""

from __future__ import annotations


class ParaforgeError(Exception):
    """Base class for every error raised by this package."""


class EmptyPair(ParaforgeError, ValueError):
    """Both sentences of a BLEU comparison are empty."""


class SkipRecord(ParaforgeError):
    """A record cannot yield a paraphrase pair.

    ``reason`` is one of ``too_few_candidates``, ``all_duplicates``,
    ``all_empty`` or ``malformed``.
    """

    def __init__(self, reason: str, record_id: str | None = None, detail: str = ""):
        self.reason = reason
        self.record_id = record_id
        self.detail = detail
        msg = f"record {record_id!r} skipped: {reason}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class BackendError(ParaforgeError):
    """Failure talking to a translation or embedding backend."""

    def __init__(self, message: str, request_id: str | None = None):
        self.request_id = request_id
        super().__init__(f"[request {request_id}] {message}" if request_id else message)


class BackendUnavailable(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class BackendTimeout(BackendError):
    pass


class RoundTripError(ParaforgeError):
    """A round-trip leg failed; ``leg`` is ``forward`` or ``backward``."""

    def __init__(self, leg: str, cause: BaseException):
        self.leg = leg
        self.cause = cause
        super().__init__(f"{leg} leg failed: {cause}")


class DimensionMismatch(ParaforgeError, ValueError):
    pass


class ZeroVector(ParaforgeError, ValueError):
    pass


class EmptyCorpus(ParaforgeError, ValueError):
    pass


class MissingAnnotation(ParaforgeError, KeyError):
    pass


class ConstantInput(ParaforgeError, ValueError):
    pass


class UnknownMetric(ParaforgeError, KeyError):
    pass


class SchemaViolation(ParaforgeError, ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class EncodingError(SchemaViolation):
    pass


class CheckpointMismatch(ParaforgeError):
    """Resuming was attempted against a different input or configuration."""
