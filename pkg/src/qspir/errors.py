"""Exception taxonomy shared by all qspir modules.

Every error raised by the package derives from :class:`SpirError` so callers
can catch one type at the boundary.  The CLI maps subclasses to exit codes:

* :class:`ConfigurationError` -> 2 (bad flags, malformed config, bad inputs)
* :class:`BudgetExhaustedError` -> 4 (not enough key material)
* :class:`StorageError` -> 5 (corrupt or unreadable on-disk state)
* anything else derived from :class:`SpirError` -> 3 (protocol failure)
"""

from __future__ import annotations


class SpirError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SpirError):
    """Invalid configuration, command-line arguments, or input files."""


class ValidationError(SpirError):
    """A value failed a structural or semantic check."""


class RangeError(ValidationError):
    """A numeric argument is outside its legal range."""


class ProtocolError(SpirError):
    """A peer violated the wire protocol or the retrieval state machine."""


class FramingError(ProtocolError):
    """A byte stream could not be parsed as a valid frame."""


class BudgetExhaustedError(SpirError):
    """A key pool does not hold enough unconsumed bits for an operation.

    Attributes:
        needed: bits the operation required.
        available: unconsumed bits actually present.
        pool: name of the pool that ran dry.
    """

    def __init__(self, pool: str, needed: int, available: int):
        self.pool = pool
        self.needed = int(needed)
        self.available = int(available)
        super().__init__(
            f"key pool {pool!r} exhausted: need {self.needed} bits, "
            f"have {self.available}"
        )


class KeyReuseError(SpirError):
    """An attempt was made to consume key bits that were already consumed.

    This is a hard fault: one-time-pad security is void on reuse, so the
    keystore refuses and the caller must abort the session.
    """


class StorageError(SpirError):
    """On-disk state (pool files, snapshots, ledgers) is corrupt."""
