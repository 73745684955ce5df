"""Exception hierarchy shared across the toolkit."""


class RfbError(Exception):
    """Base class for all toolkit errors."""


class TransportError(RfbError):
    """Connection closed, short read, or write failure on a live transport."""


class HandshakeError(RfbError):
    """Version or security negotiation failed."""


class ProtocolError(RfbError):
    """Unknown message type or encoding id on an otherwise healthy stream."""


class FramingError(RfbError):
    """Payload bytes do not match the declared layout (truncated, trailing, bad length)."""


class BoundsError(RfbError):
    """Rectangle or subrectangle escapes the framebuffer or tile it belongs to."""
