"""RFB session serving on top of a shared synthetic scene.

Virtual-clock sessions are strictly request-driven and single-threaded per
connection: an incremental request advances the scene in 100 ms ticks until
damage exists (or the scenario ends), which makes replays deterministic.
Realtime sessions add a reader thread so key/pointer input keeps flowing while
an update request is parked waiting for damage.
"""

from __future__ import annotations

import queue
import socket
import threading
import time
from dataclasses import dataclass, field

from . import wire
from .codecs import (
    ENC_COPYRECT,
    ENC_RAW,
    SUPPORTED_ENCODINGS,
    EncodingChoice,
    ZlibStream,
    encode_copyrect,
    encode_rect,
    negotiate_encoding,
)
from .errors import HandshakeError, TransportError
from .model import Framebuffer, PixelFormat, Rect, RectUpdate, convert_pixels
from .scene import SceneState

DEFAULT_DESKTOP_NAME = "rfbkit"


@dataclass
class SessionSummary:
    updates_sent: int = 0
    rects_sent: int = 0
    payload_bytes: int = 0
    messages_received: int = 0
    error: str | None = None


@dataclass
class _SessionState:
    client_id: int
    choice: EncodingChoice = field(default_factory=lambda: EncodingChoice(ENC_RAW))
    copyrect_ok: bool = False
    format: PixelFormat | None = None  # None: use the scene's format
    pending_format: PixelFormat | None = None
    zlib: ZlibStream = field(default_factory=ZlibStream)
    force_full: bool = False


class DisplayServer:
    """Serves RFB sessions for one scene; 'virtual' or 'real' clock."""

    def __init__(
        self,
        scene: SceneState,
        *,
        clock: str = "virtual",
        desktop_name: str = DEFAULT_DESKTOP_NAME,
        zlib_level: int = 6,
        strict_encodings: bool = False,
    ):
        if clock not in ("virtual", "real"):
            raise ValueError(f"clock must be 'virtual' or 'real', got {clock!r}")
        self.scene = scene
        self.clock = clock
        self.desktop_name = desktop_name
        self.zlib_level = zlib_level
        self.strict_encodings = strict_encodings
        self._t0 = time.monotonic()

    # -- session ------------------------------------------------------------

    def serve_connection(self, conn: wire.Connection) -> SessionSummary:
        summary = SessionSummary()
        scene = self.scene
        try:
            wire.server_handshake(
                conn,
                width=scene.width,
                height=scene.height,
                format=scene.format,
                name=self.desktop_name,
            )
        except (TransportError, HandshakeError) as exc:
            summary.error = str(exc)
            conn.close()
            return summary

        state = _SessionState(client_id=scene.register_client())
        state.zlib = ZlibStream(self.zlib_level)
        try:
            if self.clock == "virtual":
                self._run_virtual(conn, state, summary)
            else:
                self._run_realtime(conn, state, summary)
        except TransportError:
            pass  # peer closed: a normal end of session
        finally:
            scene.drop_client(state.client_id)
            conn.close()
        return summary

    def _run_virtual(self, conn: wire.Connection, state: _SessionState, summary: SessionSummary) -> None:
        while True:
            msg = wire.read_client_message(conn)
            summary.messages_received += 1
            request = self._dispatch(msg, state)
            if request is None:
                continue
            if request.incremental:
                with self.scene.lock:
                    while not self.scene.has_pending(state.client_id) and not self.scene.ended:
                        self.scene.advance_ticks(1)
                self._send_incremental(conn, state, summary)
            else:
                self._send_full(conn, state, summary, request.rect)

    def _run_realtime(self, conn: wire.Connection, state: _SessionState, summary: SessionSummary) -> None:
        inbox: queue.Queue = queue.Queue()

        def reader() -> None:
            try:
                while True:
                    inbox.put(wire.read_client_message(conn))
            except Exception as exc:  # deliver the failure to the session loop and stop
                inbox.put(exc)

        threading.Thread(target=reader, daemon=True).start()
        while True:
            item = inbox.get()
            if isinstance(item, Exception):
                raise item if isinstance(item, TransportError) else TransportError(str(item))
            self.scene.advance_wall(time.monotonic() - self._t0)
            summary.messages_received += 1
            request = self._dispatch(item, state)
            if request is None:
                continue
            if not request.incremental:
                self._send_full(conn, state, summary, request.rect)
                continue
            if not self._wait_for_damage(state, inbox, summary):
                time.sleep(0.02)  # pace end-of-scenario polling
            self._send_incremental(conn, state, summary)

    def _wait_for_damage(self, state: _SessionState, inbox: queue.Queue, summary: SessionSummary) -> bool:
        """Realtime deferral: self-drive the wall clock and keep handling input
        until this client has damage. False when the scenario has ended idle."""
        scene = self.scene
        while True:
            try:
                while True:
                    item = inbox.get_nowait()
                    if isinstance(item, Exception):
                        raise item if isinstance(item, TransportError) else TransportError(str(item))
                    summary.messages_received += 1
                    nested = self._dispatch(item, state)
                    if nested is not None and not nested.incremental:
                        state.force_full = True
            except queue.Empty:
                pass
            scene.advance_wall(time.monotonic() - self._t0)
            with scene.lock:
                if state.force_full or scene.has_pending(state.client_id):
                    return True
                if scene.ended:
                    return False
                scene.changed.wait(0.02)

    # -- message dispatch ------------------------------------------------------

    def _dispatch(self, msg: wire.ClientMessage, state: _SessionState):
        scene = self.scene
        if isinstance(msg, wire.FramebufferUpdateRequest):
            return msg
        if isinstance(msg, wire.SetEncodings):
            state.choice = EncodingChoice(
                negotiate_encoding(msg.encodings, SUPPORTED_ENCODINGS).encoding_id,
                strict=self.strict_encodings,
            )
            state.copyrect_ok = ENC_COPYRECT in msg.encodings
            if state.choice.encoding_id == ENC_COPYRECT:
                state.choice = EncodingChoice(ENC_RAW, strict=self.strict_encodings)
        elif isinstance(msg, wire.SetPixelFormat):
            if msg.format.true_color:
                state.pending_format = msg.format  # honored at the next update
        elif isinstance(msg, wire.KeyEvent):
            scene.apply_key(msg.down, msg.keysym)
        elif isinstance(msg, wire.PointerEvent):
            scene.apply_pointer(msg.x, msg.y, msg.buttons)
        # cut text and colour-map messages: parsed, ignored
        return None

    # -- update building -------------------------------------------------------

    def _wire_framebuffer(self, snapshot: Framebuffer, state: _SessionState) -> Framebuffer:
        fmt = state.format or snapshot.format
        if fmt == snapshot.format:
            return snapshot
        return Framebuffer(
            snapshot.width, snapshot.height, fmt, convert_pixels(snapshot.pixels, snapshot.format, fmt)
        )

    def _apply_pending_format(self, state: _SessionState) -> None:
        if state.pending_format is not None:
            state.format = state.pending_format
            state.pending_format = None

    def _send_full(self, conn: wire.Connection, state: _SessionState, summary: SessionSummary, rect: Rect) -> None:
        self._apply_pending_format(state)
        scene = self.scene
        with scene.lock:
            snapshot = scene.snapshot()
            full = rect.intersect(snapshot.bounds) or snapshot.bounds
            if full == snapshot.bounds:
                scene.mark_synced(state.client_id)
        state.force_full = False
        fb = self._wire_framebuffer(snapshot, state)
        updates = [encode_rect(fb, full, state.choice, state.zlib)]
        self._write(conn, updates, summary)

    def _send_incremental(self, conn: wire.Connection, state: _SessionState, summary: SessionSummary) -> None:
        self._apply_pending_format(state)
        if state.force_full:
            self._send_full(conn, state, summary, self.scene.snapshot().bounds)
            return
        snapshot, damage, hint = self.scene.claim_update(state.client_id)
        fb = self._wire_framebuffer(snapshot, state)
        updates: list[RectUpdate] = []
        if hint is not None and state.copyrect_ok and hint.dy < hint.region.h:
            region, dy = hint.region, hint.dy
            copy_dst = Rect(region.x, region.y, region.w, region.h - dy)
            updates.append(RectUpdate(copy_dst, ENC_COPYRECT, encode_copyrect(region.x, region.y + dy)))
            strip = Rect(region.x, region.bottom - dy, region.w, dy)
            updates.append(encode_rect(fb, strip, state.choice, state.zlib))
            damage = damage.subtract_rect(region)
        updates.extend(encode_rect(fb, r, state.choice, state.zlib) for r in damage.rects)
        self._write(conn, updates, summary)

    def _write(self, conn: wire.Connection, updates: list[RectUpdate], summary: SessionSummary) -> None:
        wire.write_update(conn, updates)
        if updates:
            summary.updates_sent += 1
            summary.rects_sent += len(updates)
            summary.payload_bytes += sum(len(u.payload) for u in updates)


class TcpServer:
    """Accept loop running one session thread per client."""

    def __init__(self, server: DisplayServer, host: str = "127.0.0.1", port: int = wire.DEFAULT_PORT):
        self.server = server
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(8)
        self.address = self._sock.getsockname()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, _ = self._sock.accept()
            except OSError:
                return
            conn = wire.SocketConnection(sock)
            threading.Thread(target=self.server.serve_connection, args=(conn,), daemon=True).start()

    def serve_forever(self) -> None:
        self.start()
        try:
            while not self._stop.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.close()

    def close(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass
