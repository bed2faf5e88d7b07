"""Exception hierarchy shared across the engine."""


class RdmError(Exception):
    """Base class for all engine errors."""


class LookupError_(RdmError):
    """An entity id did not resolve."""

    def __init__(self, entity_id):
        super().__init__(f"unknown entity id {entity_id}")
        self.entity_id = entity_id


class UnitError(RdmError):
    """Unknown unit symbol."""

    def __init__(self, symbol: str):
        super().__init__(f"unknown unit symbol {symbol!r}")
        self.symbol = symbol


class IncompatibleDimensionError(RdmError):
    """Conversion between units of different physical dimension."""


class QuerySyntaxError(RdmError):
    """Query text failed to parse.

    Carries a character position and the set of token kinds that would
    have been accepted at that point.
    """

    def __init__(self, message: str, position: int, expected=()):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.expected = tuple(expected)


class WireFormatError(RdmError):
    """Malformed or out-of-vocabulary XML document."""


class AuthorizationError(RdmError):
    """Principal lacks the required permission."""


class AuthenticationError(RdmError):
    """Login failed; message is deliberately uniform."""

    def __init__(self):
        super().__init__("authentication failed")


class RecoveryError(RdmError):
    """Corrupt interior record found during recovery."""

    def __init__(self, offset: int):
        super().__init__(f"corrupt log record at offset {offset}")
        self.offset = offset


class ConflictError(RdmError):
    """Duplicate target path or similar uniqueness violation."""


class ConfigError(RdmError):
    """Invalid configuration file."""
