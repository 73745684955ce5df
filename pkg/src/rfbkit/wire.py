"""Wire protocol: transports, the version/security handshake, and message
serialization for both directions of a client <-> server session."""

from __future__ import annotations

import socket
import struct
import threading
from dataclasses import dataclass
from typing import Sequence, Union

from .codecs import SUPPORTED_ENCODINGS, ZlibStream, read_rect_payload
from .errors import HandshakeError, ProtocolError, TransportError
from .model import Framebuffer, PixelFormat, Rect, RectUpdate

PROTOCOL_VERSION = b"RFB 003.008\n"
SECURITY_NONE = 1
DEFAULT_PORT = 5900

# client -> server message types
MSG_SET_PIXEL_FORMAT = 0
MSG_SET_ENCODINGS = 2
MSG_UPDATE_REQUEST = 3
MSG_KEY_EVENT = 4
MSG_POINTER_EVENT = 5
MSG_CLIENT_CUT_TEXT = 6

# server -> client message types
MSG_FRAMEBUFFER_UPDATE = 0
MSG_SET_COLOUR_MAP = 1
MSG_BELL = 2
MSG_SERVER_CUT_TEXT = 3


class Connection:
    """Blocking byte-stream endpoint. Subclasses provide the transport."""

    def read_exact(self, n: int) -> bytes:
        raise NotImplementedError

    def write(self, data: bytes) -> None:
        raise NotImplementedError

    def flush(self) -> None:
        pass

    def close(self) -> None:
        pass

    # big-endian integer helpers
    def read_u8(self) -> int:
        return self.read_exact(1)[0]

    def read_u16(self) -> int:
        return struct.unpack(">H", self.read_exact(2))[0]

    def read_u32(self) -> int:
        return struct.unpack(">I", self.read_exact(4))[0]

    def read_s32(self) -> int:
        return struct.unpack(">i", self.read_exact(4))[0]


class SocketConnection(Connection):
    def __init__(self, sock: socket.socket):
        self._sock = sock
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self._sock.recv(n - len(buf))
            except (OSError, ValueError) as exc:
                raise TransportError(f"socket read failed: {exc}") from exc
            if not chunk:
                raise TransportError(f"connection closed mid-read ({len(buf)}/{n} bytes)")
            buf += chunk
        return bytes(buf)

    def write(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"socket write failed: {exc}") from exc

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class _ByteQueue:
    """Thread-safe byte FIFO backing one direction of an in-memory pipe."""

    def __init__(self):
        self._buf = bytearray()
        self._cond = threading.Condition()
        self._closed = False

    def put(self, data: bytes) -> None:
        with self._cond:
            if self._closed:
                raise TransportError("pipe closed")
            self._buf += data
            self._cond.notify_all()

    def take(self, n: int, timeout: float | None) -> bytes:
        with self._cond:
            while len(self._buf) < n:
                if self._closed:
                    raise TransportError(f"pipe closed mid-read ({len(self._buf)}/{n} bytes)")
                if not self._cond.wait(timeout):
                    raise TransportError(f"pipe read timed out after {timeout}s")
            out = bytes(self._buf[:n])
            del self._buf[:n]
            return out

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()


class PipeConnection(Connection):
    """One endpoint of an in-memory duplex pipe (see duplex_pipe)."""

    def __init__(self, rx: _ByteQueue, tx: _ByteQueue, timeout: float | None = None):
        self._rx = rx
        self._tx = tx
        self.timeout = timeout

    def read_exact(self, n: int) -> bytes:
        return self._rx.take(n, self.timeout)

    def write(self, data: bytes) -> None:
        self._tx.put(data)

    def close(self) -> None:
        self._rx.close()
        self._tx.close()


def duplex_pipe(timeout: float | None = None) -> tuple[PipeConnection, PipeConnection]:
    a2b, b2a = _ByteQueue(), _ByteQueue()
    return PipeConnection(b2a, a2b, timeout), PipeConnection(a2b, b2a, timeout)


class LoggingConnection(Connection):
    """Tees all traffic of an inner connection into two capture buffers."""

    def __init__(self, inner: Connection):
        self.inner = inner
        self.read_log = bytearray()
        self.write_log = bytearray()

    def read_exact(self, n: int) -> bytes:
        data = self.inner.read_exact(n)
        self.read_log += data
        return data

    def write(self, data: bytes) -> None:
        self.write_log += data
        self.inner.write(data)

    def close(self) -> None:
        self.inner.close()


# ---------------------------------------------------------------------------
# handshake

@dataclass(frozen=True)
class HandshakeResult:
    negotiated_version: str
    security: str
    fb_width: int
    fb_height: int
    server_format: PixelFormat
    desktop_name: str
    shared: bool = True


def _server_init_bytes(width: int, height: int, fmt: PixelFormat, name: str) -> bytes:
    name_bytes = name.encode("utf-8")
    return struct.pack(">HH", width, height) + fmt.to_wire() + struct.pack(">I", len(name_bytes)) + name_bytes


def server_handshake(
    conn: Connection,
    *,
    width: int,
    height: int,
    format: PixelFormat,
    name: str,
) -> HandshakeResult:
    """Server side: version exchange, security None, ClientInit, ServerInit."""
    conn.write(PROTOCOL_VERSION)
    conn.flush()
    peer = conn.read_exact(12)
    if peer != PROTOCOL_VERSION:
        raise HandshakeError(f"unsupported client version {peer!r}")
    conn.write(bytes([1, SECURITY_NONE]))
    conn.flush()
    chosen = conn.read_u8()
    if chosen != SECURITY_NONE:
        raise HandshakeError(f"client chose unsupported security type {chosen}")
    conn.write(struct.pack(">I", 0))  # SecurityResult OK
    shared = bool(conn.read_u8())
    conn.write(_server_init_bytes(width, height, format, name))
    conn.flush()
    return HandshakeResult(
        negotiated_version="RFB 003.008",
        security="None",
        fb_width=width,
        fb_height=height,
        server_format=format,
        desktop_name=name,
        shared=shared,
    )


def client_handshake(conn: Connection, shared: bool = True) -> HandshakeResult:
    """Client side mirror of server_handshake."""
    peer = conn.read_exact(12)
    if peer != PROTOCOL_VERSION:
        raise HandshakeError(f"unsupported server version {peer!r}")
    conn.write(PROTOCOL_VERSION)
    conn.flush()
    count = conn.read_u8()
    if count == 0:
        reason = conn.read_exact(conn.read_u32())
        raise HandshakeError(f"server refused connection: {reason.decode('utf-8', 'replace')}")
    types = conn.read_exact(count)
    if SECURITY_NONE not in types:
        raise HandshakeError(f"server offers no supported security type (got {list(types)})")
    conn.write(bytes([SECURITY_NONE]))
    conn.flush()
    result = conn.read_u32()
    if result != 0:
        reason = conn.read_exact(conn.read_u32())
        raise HandshakeError(f"security handshake failed: {reason.decode('utf-8', 'replace')}")
    conn.write(bytes([1 if shared else 0]))
    conn.flush()
    width, height = struct.unpack(">HH", conn.read_exact(4))
    fmt = PixelFormat.from_wire(conn.read_exact(16))
    name = conn.read_exact(conn.read_u32()).decode("utf-8", "replace")
    if width < 1 or height < 1:
        raise HandshakeError(f"server announced empty framebuffer {width}x{height}")
    return HandshakeResult(
        negotiated_version="RFB 003.008",
        security="None",
        fb_width=width,
        fb_height=height,
        server_format=fmt,
        desktop_name=name,
        shared=shared,
    )


# ---------------------------------------------------------------------------
# client -> server messages

@dataclass(frozen=True)
class SetPixelFormat:
    format: PixelFormat


@dataclass(frozen=True)
class SetEncodings:
    encodings: tuple[int, ...]


@dataclass(frozen=True)
class FramebufferUpdateRequest:
    incremental: bool
    rect: Rect


@dataclass(frozen=True)
class KeyEvent:
    down: bool
    keysym: int


@dataclass(frozen=True)
class PointerEvent:
    buttons: int
    x: int
    y: int


@dataclass(frozen=True)
class ClientCutText:
    text: str


ClientMessage = Union[
    SetPixelFormat, SetEncodings, FramebufferUpdateRequest, KeyEvent, PointerEvent, ClientCutText
]


def write_client_message(conn: Connection, msg: ClientMessage) -> None:
    if isinstance(msg, SetPixelFormat):
        conn.write(struct.pack(">B3x", MSG_SET_PIXEL_FORMAT) + msg.format.to_wire())
    elif isinstance(msg, SetEncodings):
        conn.write(
            struct.pack(">BxH", MSG_SET_ENCODINGS, len(msg.encodings))
            + b"".join(struct.pack(">i", e) for e in msg.encodings)
        )
    elif isinstance(msg, FramebufferUpdateRequest):
        r = msg.rect
        conn.write(struct.pack(">BBHHHH", MSG_UPDATE_REQUEST, 1 if msg.incremental else 0, r.x, r.y, r.w, r.h))
    elif isinstance(msg, KeyEvent):
        conn.write(struct.pack(">BB2xI", MSG_KEY_EVENT, 1 if msg.down else 0, msg.keysym))
    elif isinstance(msg, PointerEvent):
        conn.write(struct.pack(">BBHH", MSG_POINTER_EVENT, msg.buttons, msg.x, msg.y))
    elif isinstance(msg, ClientCutText):
        text = msg.text.encode("latin-1", "replace")
        conn.write(struct.pack(">B3xI", MSG_CLIENT_CUT_TEXT, len(text)) + text)
    else:
        raise TypeError(f"not a client message: {msg!r}")
    conn.flush()


def read_client_message(conn: Connection) -> ClientMessage:
    """Parse exactly one client message; unknown types consume only the type byte."""
    msg_type = conn.read_u8()
    if msg_type == MSG_SET_PIXEL_FORMAT:
        conn.read_exact(3)
        return SetPixelFormat(PixelFormat.from_wire(conn.read_exact(16)))
    if msg_type == MSG_SET_ENCODINGS:
        conn.read_exact(1)
        count = conn.read_u16()
        return SetEncodings(tuple(conn.read_s32() for _ in range(count)))
    if msg_type == MSG_UPDATE_REQUEST:
        incremental = bool(conn.read_u8())
        x, y, w, h = struct.unpack(">HHHH", conn.read_exact(8))
        return FramebufferUpdateRequest(incremental, Rect(x, y, max(w, 1), max(h, 1)))
    if msg_type == MSG_KEY_EVENT:
        down = bool(conn.read_u8())
        conn.read_exact(2)
        return KeyEvent(down, conn.read_u32())
    if msg_type == MSG_POINTER_EVENT:
        buttons = conn.read_u8()
        x, y = struct.unpack(">HH", conn.read_exact(4))
        return PointerEvent(buttons, x, y)
    if msg_type == MSG_CLIENT_CUT_TEXT:
        conn.read_exact(3)
        length = conn.read_u32()
        return ClientCutText(conn.read_exact(length).decode("latin-1", "replace"))
    raise ProtocolError(f"unknown client message type {msg_type}")


# ---------------------------------------------------------------------------
# server -> client messages

def write_update(conn: Connection, updates: Sequence[RectUpdate]) -> int:
    """Send one FramebufferUpdate; returns total bytes written."""
    if len(updates) > 0xFFFF:
        raise ValueError(f"{len(updates)} rects do not fit a 16-bit count")
    buf = bytearray(struct.pack(">BxH", MSG_FRAMEBUFFER_UPDATE, len(updates)))
    for u in updates:
        r = u.rect
        buf += struct.pack(">HHHHi", r.x, r.y, r.w, r.h, u.encoding_id)
        buf += u.payload
    conn.write(bytes(buf))
    conn.flush()
    return len(buf)


def write_bell(conn: Connection) -> None:
    conn.write(bytes([MSG_BELL]))
    conn.flush()


def read_update_rects(conn: Connection, fb: Framebuffer, stream: ZlibStream | None) -> list[RectUpdate]:
    """Read the body of a FramebufferUpdate (after the type byte), decoding each
    rect into fb as it arrives. Returns the updates with their wire payloads."""
    conn.read_exact(1)
    count = conn.read_u16()
    updates: list[RectUpdate] = []
    for _ in range(count):
        x, y, w, h, enc_id = struct.unpack(">HHHHi", conn.read_exact(12))
        if enc_id not in SUPPORTED_ENCODINGS:
            raise ProtocolError(f"unknown encoding id {enc_id} in update")
        rect = Rect(x, y, w, h)
        payload = read_rect_payload(conn, rect, enc_id, fb.format, fb, stream)
        updates.append(RectUpdate(rect, enc_id, payload))
    return updates


ServerEvent = tuple[str, object]


def read_server_message(conn: Connection, fb: Framebuffer, stream: ZlibStream | None) -> ServerEvent:
    """Parse one server message. Updates decode into fb; colour-map entries,
    bell, and cut text are parsed and surfaced for the caller to ignore."""
    msg_type = conn.read_u8()
    if msg_type == MSG_FRAMEBUFFER_UPDATE:
        return "update", read_update_rects(conn, fb, stream)
    if msg_type == MSG_SET_COLOUR_MAP:
        conn.read_exact(1)
        _first, count = struct.unpack(">HH", conn.read_exact(4))
        conn.read_exact(6 * count)
        return "colour_map", None
    if msg_type == MSG_BELL:
        return "bell", None
    if msg_type == MSG_SERVER_CUT_TEXT:
        conn.read_exact(3)
        length = conn.read_u32()
        return "cut_text", conn.read_exact(length).decode("latin-1", "replace")
    raise ProtocolError(f"unknown server message type {msg_type}")


def read_update(conn: Connection, fb: Framebuffer, stream: ZlibStream | None) -> list[RectUpdate]:
    """Read exactly one FramebufferUpdate, skipping interleaved bell/cut-text."""
    while True:
        kind, body = read_server_message(conn, fb, stream)
        if kind == "update":
            return body  # type: ignore[return-value]
