"""Exception hierarchy shared by the services, clients and harness."""


class PidcollError(Exception):
    """Base class for every error raised by this package."""

    # HTTP status used when the error crosses a service boundary.
    status = 500


class InvalidParams(PidcollError, ValueError):
    status = 400


class InvalidGraph(PidcollError, ValueError):
    status = 400


class CycleDetected(InvalidGraph):
    pass


class MalformedPid(PidcollError, ValueError):
    status = 400


class MalformedRecord(PidcollError, ValueError):
    status = 400


class DuplicatePid(PidcollError):
    status = 409


class RecordTooLarge(PidcollError):
    status = 413


class StoreFailure(PidcollError):
    status = 500


class NotFound(PidcollError, LookupError):
    status = 404


class DuplicateId(PidcollError):
    status = 409


class DuplicateMemberId(PidcollError):
    status = 409


class UnknownMemberRef(PidcollError):
    status = 422


class UnknownCollection(NotFound):
    pass


class UnknownMember(NotFound):
    pass


class UnsupportedOperation(PidcollError):
    status = 405


class MaxLengthExceeded(PidcollError):
    status = 409


class UnclassifiableReference(PidcollError, ValueError):
    status = 400


class DepthExceeded(PidcollError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ServiceUnreachable(PidcollError, ConnectionError):
    status = 503


class ConfigInvalid(PidcollError, ValueError):
    pass


class DepositError(PidcollError):
    """A deposit action failed; ``index`` is the position of the failing action."""

    def __init__(self, index, action, cause):
        super().__init__(f"action {index} ({action.op}) failed: {type(cause).__name__}: {cause}")
        self.index = index
        self.action = action
        self.cause = cause


_BY_NAME = {
    cls.__name__: cls
    for cls in [
        InvalidParams, InvalidGraph, CycleDetected, MalformedPid, MalformedRecord,
        DuplicatePid, RecordTooLarge, StoreFailure, NotFound, DuplicateId,
        DuplicateMemberId, UnknownMemberRef, UnknownCollection, UnknownMember,
        UnsupportedOperation, MaxLengthExceeded, UnclassifiableReference,
    ]
}


def error_from_name(name: str, message: str) -> PidcollError:
    """Rebuild an error received over the wire from its class name."""
    return _BY_NAME.get(name, PidcollError)(message)
