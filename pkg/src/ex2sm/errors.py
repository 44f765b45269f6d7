"""Exception hierarchy shared by every stage."""


class Ex2smError(Exception):
    """Base class for all errors raised by this package."""


class FastaFormatError(Ex2smError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ParameterError(Ex2smError, ValueError):
    """An argument is outside the documented domain."""


class OracleGuardError(ParameterError):
    """The brute-force oracle refused an input that is too large to enumerate."""


class ContractError(Ex2smError, RuntimeError):
    """A precondition on program state (sortedness, finalization, ...) is violated."""


class StorageError(Ex2smError, OSError):
    """Reading or writing an on-disk artifact failed."""
