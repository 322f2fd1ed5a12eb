"""Exception hierarchy shared by every poolea module."""


class PoolEAError(Exception):
    """Base class for all library errors."""


class InvalidArgument(PoolEAError, ValueError):
    pass


class InvalidState(PoolEAError, RuntimeError):
    pass


class StoreError(PoolEAError, OSError):
    """A shared-store operation failed (read or write)."""


class ConflictError(StoreError):
    """An object with this name already exists; store objects are write-once."""


class NotFoundError(StoreError):
    """The object is not (yet) visible to this participant."""


class MigrationError(PoolEAError):
    """Emitting or receiving a migrant failed; the node keeps running."""


class ProtocolError(PoolEAError):
    """A pool record is malformed or does not fit the running problem."""


class ConfigError(PoolEAError, ValueError):
    """An experiment configuration could not be parsed or validated."""


class NodeRunError(PoolEAError):
    """A node stopped on a store failure; ``result`` holds its partial outcome."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result
