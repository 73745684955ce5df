"""Minimal RFC 6455 endpoint carrying a raw byte stream in binary frames.

Message boundaries are ignored on receive (the protocol above is
self-framing); each write becomes one binary frame. Ping, pong, close and
fragmentation are handled; extensions and subprotocols are not offered.
"""

from __future__ import annotations

import base64
import hashlib
import os
import struct

from .errors import HandshakeError, TransportError
from .wire import Connection

_GUID = b"258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA

_MAX_HEADER_BYTES = 8192


def _accept_key(key: str) -> str:
    digest = hashlib.sha1(key.encode("ascii") + _GUID).digest()
    return base64.b64encode(digest).decode("ascii")


def _read_http_head(conn: Connection) -> list[str]:
    buf = bytearray()
    while not buf.endswith(b"\r\n\r\n"):
        buf += conn.read_exact(1)
        if len(buf) > _MAX_HEADER_BYTES:
            raise HandshakeError("oversized HTTP header block")
    return buf.decode("latin-1").split("\r\n")


def _mask_bytes(data: bytes, key: bytes) -> bytes:
    if not data:
        return data
    repeated = (key * (len(data) // 4 + 1))[: len(data)]
    return bytes(a ^ b for a, b in zip(data, repeated))


class WebSocketConnection(Connection):
    def __init__(self, inner: Connection, *, mask_outgoing: bool):
        self._inner = inner
        self._mask = mask_outgoing
        self._buf = bytearray()
        self._closed = False

    def _read_frame(self) -> None:
        b0, b1 = self._inner.read_exact(2)
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        if length == 126:
            length = struct.unpack(">H", self._inner.read_exact(2))[0]
        elif length == 127:
            length = struct.unpack(">Q", self._inner.read_exact(8))[0]
        key = self._inner.read_exact(4) if masked else b""
        payload = self._inner.read_exact(length)
        if masked:
            payload = _mask_bytes(payload, key)
        if opcode in (OP_BINARY, OP_TEXT, OP_CONT):
            self._buf += payload
        elif opcode == OP_PING:
            self._write_frame(OP_PONG, payload)
        elif opcode == OP_PONG:
            pass
        elif opcode == OP_CLOSE:
            if not self._closed:
                self._closed = True
                try:
                    self._write_frame(OP_CLOSE, payload[:2])
                except TransportError:
                    pass
            raise TransportError("websocket closed by peer")
        else:
            raise TransportError(f"unexpected websocket opcode {opcode:#x}")

    def read_exact(self, n: int) -> bytes:
        while len(self._buf) < n:
            self._read_frame()
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out

    def _write_frame(self, opcode: int, payload: bytes) -> None:
        header = bytearray([0x80 | opcode])
        mask_bit = 0x80 if self._mask else 0
        if len(payload) < 126:
            header.append(mask_bit | len(payload))
        elif len(payload) <= 0xFFFF:
            header.append(mask_bit | 126)
            header += struct.pack(">H", len(payload))
        else:
            header.append(mask_bit | 127)
            header += struct.pack(">Q", len(payload))
        if self._mask:
            key = os.urandom(4)
            header += key
            payload = _mask_bytes(payload, key)
        self._inner.write(bytes(header) + payload)
        self._inner.flush()

    def write(self, data: bytes) -> None:
        self._write_frame(OP_BINARY, data)

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                self._write_frame(OP_CLOSE, struct.pack(">H", 1000))
            except TransportError:
                pass
        self._inner.close()


def accept_websocket(conn: Connection) -> WebSocketConnection:
    """Server side of the upgrade; raises HandshakeError on a bad request."""
    lines = _read_http_head(conn)
    request = lines[0] if lines else ""
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
    if not request.startswith("GET "):
        raise HandshakeError(f"not a websocket upgrade: {request!r}")
    if "websocket" not in headers.get("upgrade", "").lower():
        raise HandshakeError("missing Upgrade: websocket header")
    key = headers.get("sec-websocket-key")
    if not key:
        raise HandshakeError("missing Sec-WebSocket-Key header")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {_accept_key(key)}\r\n"
        "\r\n"
    )
    conn.write(response.encode("latin-1"))
    conn.flush()
    return WebSocketConnection(conn, mask_outgoing=False)


def connect_websocket(conn: Connection, host: str = "localhost", path: str = "/") -> WebSocketConnection:
    """Client side of the upgrade over an already-open connection."""
    key = base64.b64encode(os.urandom(16)).decode("ascii")
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n"
        "\r\n"
    )
    conn.write(request.encode("latin-1"))
    conn.flush()
    lines = _read_http_head(conn)
    if " 101 " not in lines[0]:
        raise HandshakeError(f"websocket upgrade refused: {lines[0]!r}")
    accept = ""
    for line in lines[1:]:
        if line.lower().startswith("sec-websocket-accept:"):
            accept = line.partition(":")[2].strip()
    if accept != _accept_key(key):
        raise HandshakeError("websocket accept key mismatch")
    return WebSocketConnection(conn, mask_outgoing=True)
