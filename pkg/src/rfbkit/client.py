"""Headless RFB client: decodes every encoding into a local framebuffer,
drives the request loop, and can replay a scripted event schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import wire
from .codecs import ENC_COPYRECT, ENC_RAW, ZlibStream
from .model import Framebuffer, PixelFormat, Rect, RectUpdate

DEFAULT_PREFS = (ENC_COPYRECT, ENC_RAW)


@dataclass
class ClientCounters:
    updates: int = 0
    rectangles: int = 0
    payload_bytes: int = 0
    captured_bytes: int = 0
    encodings_seen: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class ScheduledEvent:
    """A client message sent right after the update with this 1-based index."""

    after_update: int
    message: wire.ClientMessage


class HeadlessClient:
    def __init__(
        self,
        conn: wire.Connection,
        encodings: Sequence[int] = DEFAULT_PREFS,
        shared: bool = True,
    ):
        self.conn = conn
        self.encodings = tuple(encodings)
        self.shared = shared
        self.fb: Framebuffer | None = None
        self.zlib = ZlibStream()
        self.counters = ClientCounters()
        self.handshake: wire.HandshakeResult | None = None

    def connect(self) -> wire.HandshakeResult:
        hs = wire.client_handshake(self.conn, shared=self.shared)
        self.handshake = hs
        self.fb = Framebuffer(hs.fb_width, hs.fb_height, hs.server_format)
        wire.write_client_message(self.conn, wire.SetEncodings(self.encodings))
        return hs

    # -- requests -------------------------------------------------------------

    def request_full(self, rect: Rect | None = None) -> None:
        assert self.fb is not None
        wire.write_client_message(
            self.conn, wire.FramebufferUpdateRequest(False, rect or self.fb.bounds)
        )

    def request_incremental(self) -> None:
        assert self.fb is not None
        wire.write_client_message(self.conn, wire.FramebufferUpdateRequest(True, self.fb.bounds))

    def set_pixel_format(self, fmt: PixelFormat) -> None:
        """Switch the session's wire format; takes effect at the next update."""
        assert self.fb is not None
        wire.write_client_message(self.conn, wire.SetPixelFormat(fmt))
        self.fb = Framebuffer(self.fb.width, self.fb.height, fmt)

    def send_key(self, keysym: int, down: bool = True) -> None:
        wire.write_client_message(self.conn, wire.KeyEvent(down, keysym))

    def send_pointer(self, x: int, y: int, buttons: int = 0) -> None:
        wire.write_client_message(self.conn, wire.PointerEvent(buttons, x, y))

    # -- receiving --------------------------------------------------------------

    def next_update(self) -> list[RectUpdate]:
        """Block until one FramebufferUpdate is decoded into the framebuffer."""
        assert self.fb is not None
        updates = wire.read_update(self.conn, self.fb, self.zlib)
        if updates:
            self.counters.updates += 1
            self.counters.rectangles += len(updates)
            bpp = self.fb.format.bytes_per_pixel
            for u in updates:
                self.counters.payload_bytes += len(u.payload)
                self.counters.captured_bytes += u.rect.area * bpp
                seen = self.counters.encodings_seen
                seen[u.encoding_id] = seen.get(u.encoding_id, 0) + 1
        return updates

    def run_until_end(
        self,
        events: Iterable[ScheduledEvent] = (),
        max_updates: int = 100_000,
    ) -> int:
        """Full request, then incremental requests until the end-of-scenario
        signal (an empty update). Returns the number of content updates."""
        schedule: dict[int, list[wire.ClientMessage]] = {}
        for ev in events:
            schedule.setdefault(ev.after_update, []).append(ev.message)
        self.request_full()
        received = 0
        while received < max_updates:
            updates = self.next_update()
            if not updates:
                break
            received += 1
            for msg in schedule.pop(received, ()):
                wire.write_client_message(self.conn, msg)
            self.request_incremental()
        return received

    def close(self) -> None:
        self.conn.close()
