"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class XBethError(Exception):
    """Base class for all pipeline errors."""


class ParseError(XBethError, ValueError):
    """Malformed text encoding of a core value."""


class AmountOverflowError(XBethError, ArithmeticError):
    """Amount left the unsigned 256-bit range."""


class IntegrityError(XBethError):
    """Raw data violates a structural invariant."""


class MissingBlockError(IntegrityError):
    def __init__(self, height: int, message: str | None = None):
        self.height = height
        super().__init__(message or f"missing block {height}")


class TransportError(XBethError):
    """Retryable transport failure talking to an RPC endpoint."""


class NotFoundError(XBethError):
    """Requested block is beyond the chain head."""


class RpcError(XBethError):
    """Endpoint answered with a JSON-RPC error object."""

    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(f"rpc error {code}: {message}")


class MetadataUnavailable(XBethError):
    """A read-only contract call produced no usable answer."""


class EmptyReportError(XBethError):
    """A statistic was requested over empty input."""


class ConfigError(XBethError):
    """Invalid or incomplete run configuration."""
