"""Transcoding relay: terminates an upstream session into a shadow
framebuffer, re-encodes damage with a target encoding for downstream viewers,
meters the traffic, and paces the constrained downstream link.

Upstream fetches are demand-driven (one per downstream update request), so a
relayed session replays deterministically; key and pointer input is forwarded
upstream immediately by the downstream reader thread, even while an update is
in flight.
"""

from __future__ import annotations

import os
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import wire, ws
from .codecs import (
    ENC_COPYRECT,
    ENC_RAW,
    SUPPORTED_ENCODINGS,
    EncodingChoice,
    ZlibStream,
    apply_update,
    encode_rect,
    negotiate_encoding,
)
from .errors import TransportError
from .model import (
    DamageRegion,
    Framebuffer,
    PixelFormat,
    RectUpdate,
    SessionMetrics,
    convert_pixels,
    region_normalize,
)

METRICS_CSV_HEADER = "encoding,updates,duration_s,updates_per_s,rects,captured_bytes,compressed_bytes,ratio"


@dataclass(frozen=True)
class LinkConfig:
    """Token-bucket model of the constrained downstream link."""

    rate_bps: float = 0.0  # bits per second; 0 = unlimited
    burst_bytes: int = 65536
    latency_s: float = 0.0

    def __post_init__(self) -> None:
        if self.rate_bps < 0:
            raise ValueError("rate must be >= 0")
        if self.rate_bps and self.burst_bytes < 1:
            raise ValueError("burst must be at least 1 byte")
        if self.latency_s < 0:
            raise ValueError("latency must be >= 0")

    @property
    def limited(self) -> bool:
        return self.rate_bps > 0


class TokenBucket:
    """Starts empty; refills at the link rate up to the burst size."""

    def __init__(
        self,
        rate_bytes_per_s: float,
        burst_bytes: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.rate = float(rate_bytes_per_s)
        self.burst = int(burst_bytes)
        self._clock = clock
        self._sleep = sleep
        self._tokens = 0.0
        self._stamp = clock()

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(self.burst, self._tokens + (now - self._stamp) * self.rate)
        self._stamp = now

    def acquire(self, n: int) -> None:
        """Block until n tokens are available (n must be <= burst)."""
        while True:
            self._refill()
            if self._tokens >= n - 1e-9:  # tolerance keeps float rounding from stalling the loop
                self._tokens = max(0.0, self._tokens - n)
                return
            self._sleep((n - self._tokens) / self.rate)


class ThrottledConnection(wire.Connection):
    """Paces writes through a token bucket and a one-way latency delay.

    Writes larger than the burst are split into burst-sized deliveries, so over
    any window T at most rate*T/8 + burst bytes reach the wire.
    """

    def __init__(
        self,
        inner: wire.Connection,
        link: LinkConfig,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.inner = inner
        self.link = link
        self._sleep = sleep
        self._bucket = (
            TokenBucket(link.rate_bps / 8.0, link.burst_bytes, clock, sleep) if link.limited else None
        )

    def read_exact(self, n: int) -> bytes:
        return self.inner.read_exact(n)

    def write(self, data: bytes) -> None:
        if self.link.latency_s:
            self._sleep(self.link.latency_s)
        if self._bucket is None:
            self.inner.write(data)
            return
        burst = self.link.burst_bytes
        for start in range(0, len(data), burst):
            chunk = data[start : start + burst]
            self._bucket.acquire(len(chunk))
            self.inner.write(chunk)

    def flush(self) -> None:
        self.inner.flush()

    def close(self) -> None:
        self.inner.close()


@dataclass
class RelayCounters:
    """Monotonic counters backing the Table-1 style metrics."""

    updates: int = 0
    rectangles: int = 0
    captured_bytes: int = 0
    compressed_bytes: int = 0
    first_update_time: Optional[float] = None
    last_update_time: Optional[float] = None

    def record(self, updates: list[RectUpdate], bytes_per_pixel: int, now: float) -> None:
        if not updates:
            return
        self.updates += 1
        self.rectangles += len(updates)
        for u in updates:
            self.captured_bytes += u.rect.area * bytes_per_pixel
            self.compressed_bytes += len(u.payload)
        if self.first_update_time is None:
            self.first_update_time = now
        self.last_update_time = now

    @property
    def wall_duration(self) -> float:
        if self.first_update_time is None or self.last_update_time is None:
            return 0.0
        return self.last_update_time - self.first_update_time


def tap_metrics(counters: RelayCounters, duration: Optional[float] = None) -> SessionMetrics:
    """Fold counters into the six benchmark quantities.

    Rect headers are excluded from compressed bytes by construction, which
    makes a pure-Raw session report a compression ratio of exactly 1.0.
    """
    return SessionMetrics.from_counters(
        updates=counters.updates,
        duration=counters.wall_duration if duration is None else duration,
        rectangles=counters.rectangles,
        captured_bytes=counters.captured_bytes,
        compressed_bytes=counters.compressed_bytes,
    )


def transcode_update(
    shadow: Framebuffer,
    incoming: list[RectUpdate],
    target: EncodingChoice,
    stream: ZlibStream | None = None,
    *,
    apply: bool = True,
    source_stream: ZlibStream | None = None,
) -> list[RectUpdate]:
    """Apply incoming updates to the shadow, then re-encode their union.

    CopyRect rects are absorbed: applied to the shadow and re-emitted as the
    target encoding of the destination rect. Callers that already decoded the
    incoming updates while reading them off a connection pass apply=False.
    """
    if apply:
        for u in incoming:
            apply_update(shadow, u, source_stream)
    if not incoming:
        return []
    region = region_normalize([u.rect for u in incoming], bounds=shadow.bounds)
    return [encode_rect(shadow, r, target, stream) for r in region.rects]


@dataclass
class RelayConfig:
    upstream: tuple[str, int]
    listen: Optional[tuple[str, int]] = None
    ws_listen: Optional[tuple[str, int]] = None
    target: EncodingChoice = field(default_factory=lambda: EncodingChoice(ENC_RAW))
    link: LinkConfig = field(default_factory=LinkConfig)
    metrics_path: Optional[str] = None
    upstream_prefs: tuple[int, ...] = (ENC_COPYRECT, ENC_RAW)
    zlib_level: int = 6

    def __post_init__(self) -> None:
        for addr in (self.listen, self.ws_listen):
            if addr is not None and addr == self.upstream:
                raise ValueError(f"listen address {addr} must differ from upstream")


class RelaySession:
    """One downstream viewer bridged to one fresh upstream session."""

    def __init__(
        self,
        upstream: wire.Connection,
        downstream: wire.Connection,
        *,
        target: EncodingChoice,
        link: LinkConfig = LinkConfig(),
        upstream_prefs: tuple[int, ...] = (ENC_COPYRECT, ENC_RAW),
        zlib_level: int = 6,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.upstream = upstream
        self.downstream_raw = downstream
        self.downstream = ThrottledConnection(downstream, link, clock, sleep)
        self.target = target
        self.upstream_prefs = upstream_prefs
        self.zlib_level = zlib_level
        self.counters = RelayCounters()
        self.shadow: Framebuffer | None = None
        self._clock = clock
        self._up_write_lock = threading.Lock()
        self._up_zlib = ZlibStream()
        self._down_zlib = ZlibStream(zlib_level)
        self._down_format: PixelFormat | None = None
        self._damage = DamageRegion()
        self.error: str | None = None

    # -- plumbing ---------------------------------------------------------

    def _forward_upstream(self, msg: wire.ClientMessage) -> None:
        with self._up_write_lock:
            wire.write_client_message(self.upstream, msg)

    def _fetch_upstream(self) -> bool:
        """One incremental upstream round-trip; False on the end signal."""
        assert self.shadow is not None
        self._forward_upstream(wire.FramebufferUpdateRequest(True, self.shadow.bounds))
        updates = wire.read_update(self.upstream, self.shadow, self._up_zlib)
        if not updates:
            return False
        self._damage = self._damage.union(region_normalize([u.rect for u in updates]))
        return True

    def _wire_shadow(self) -> Framebuffer:
        assert self.shadow is not None
        fmt = self._down_format or self.shadow.format
        if fmt == self.shadow.format:
            return self.shadow
        return Framebuffer(
            self.shadow.width,
            self.shadow.height,
            fmt,
            convert_pixels(self.shadow.pixels, self.shadow.format, fmt),
        )

    def _send_downstream(self, updates: list[RectUpdate]) -> None:
        wire.write_update(self.downstream, updates)
        fmt = self._down_format or self.shadow.format  # type: ignore[union-attr]
        self.counters.record(updates, fmt.bytes_per_pixel, self._clock())

    # -- request handling ----------------------------------------------------

    def _handle_request(self, request: wire.FramebufferUpdateRequest) -> None:
        assert self.shadow is not None
        if not request.incremental:
            rect = request.rect.intersect(self.shadow.bounds) or self.shadow.bounds
            if rect == self.shadow.bounds:
                self._damage = DamageRegion()
            fb = self._wire_shadow()
            self._send_downstream([encode_rect(fb, rect, self.target, self._down_zlib)])
            return
        ended = False
        if self._damage.empty:
            ended = not self._fetch_upstream()
        if self._damage.empty and ended:
            self._send_downstream([])  # propagate the end-of-content signal
            return
        fb = self._wire_shadow()
        updates = [encode_rect(fb, r, self.target, self._down_zlib) for r in self._damage.rects]
        self._damage = DamageRegion()
        self._send_downstream(updates)

    # -- session ------------------------------------------------------------------

    def run(self) -> RelayCounters:
        try:
            up_hs = wire.client_handshake(self.upstream)
            self.shadow = Framebuffer(up_hs.fb_width, up_hs.fb_height, up_hs.server_format)
            self._forward_upstream(wire.SetEncodings(self.upstream_prefs))
            # prime the shadow so non-incremental downstream requests are served locally
            self._forward_upstream(wire.FramebufferUpdateRequest(False, self.shadow.bounds))
            wire.read_update(self.upstream, self.shadow, self._up_zlib)
            wire.server_handshake(
                self.downstream_raw,
                width=up_hs.fb_width,
                height=up_hs.fb_height,
                format=up_hs.server_format,
                name=up_hs.desktop_name,
            )
            self._pump()
        except TransportError as exc:
            self.error = str(exc)
        finally:
            self.downstream.close()
            self.upstream.close()
        return self.counters

    def _pump(self) -> None:
        inbox: queue.Queue = queue.Queue()

        def reader() -> None:
            try:
                while True:
                    msg = wire.read_client_message(self.downstream_raw)
                    if isinstance(msg, (wire.KeyEvent, wire.PointerEvent, wire.ClientCutText)):
                        # inputs forwarded unmodified, even mid-update
                        self._forward_upstream(msg)
                    else:
                        inbox.put(msg)
            except Exception as exc:
                inbox.put(exc)

        threading.Thread(target=reader, daemon=True).start()
        while True:
            item = inbox.get()
            if isinstance(item, Exception):
                if isinstance(item, TransportError):
                    return  # downstream gone: session over
                raise TransportError(str(item))
            if isinstance(item, wire.FramebufferUpdateRequest):
                self._handle_request(item)
            elif isinstance(item, wire.SetEncodings):
                if not self.target.strict:
                    self.target = EncodingChoice(
                        negotiate_encoding(item.encodings, SUPPORTED_ENCODINGS - {ENC_COPYRECT}).encoding_id
                    )
            elif isinstance(item, wire.SetPixelFormat):
                if item.format.true_color:
                    self._down_format = item.format
                    self._down_zlib = ZlibStream(self.zlib_level)


class RelayServer:
    """Accept loop: each downstream connection gets its own upstream session."""

    def __init__(self, cfg: RelayConfig):
        self.cfg = cfg
        self._stop = threading.Event()
        self._listeners: list[socket.socket] = []
        self._metrics_lock = threading.Lock()
        self.addresses: dict[str, tuple[str, int]] = {}

    def _listen(self, addr: tuple[str, int]) -> socket.socket:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind(addr)
        sock.listen(8)
        self._listeners.append(sock)
        return sock

    def start(self) -> None:
        if self.cfg.listen is not None:
            sock = self._listen(self.cfg.listen)
            self.addresses["tcp"] = sock.getsockname()
            threading.Thread(target=self._accept_loop, args=(sock, False), daemon=True).start()
        if self.cfg.ws_listen is not None:
            sock = self._listen(self.cfg.ws_listen)
            self.addresses["ws"] = sock.getsockname()
            threading.Thread(target=self._accept_loop, args=(sock, True), daemon=True).start()
        if not self._listeners:
            raise ValueError("relay needs --listen or --ws-listen")

    def _accept_loop(self, sock: socket.socket, websocket: bool) -> None:
        while not self._stop.is_set():
            try:
                client, _ = sock.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_one, args=(client, websocket), daemon=True).start()

    def _serve_one(self, client_sock: socket.socket, websocket: bool) -> None:
        downstream: wire.Connection = wire.SocketConnection(client_sock)
        try:
            if websocket:
                downstream = ws.accept_websocket(downstream)
            up_sock = socket.create_connection(self.cfg.upstream, timeout=10)
            upstream = wire.SocketConnection(up_sock)
        except Exception:
            downstream.close()
            return
        session = RelaySession(
            upstream,
            downstream,
            target=self.cfg.target,
            link=self.cfg.link,
            upstream_prefs=self.cfg.upstream_prefs,
            zlib_level=self.cfg.zlib_level,
        )
        counters = session.run()
        if self.cfg.metrics_path:
            self._append_metrics(counters)

    def _append_metrics(self, counters: RelayCounters) -> None:
        metrics = tap_metrics(counters)
        row = format_metrics_row(self.cfg.target.name, metrics)
        with self._metrics_lock:
            fresh = not os.path.exists(self.cfg.metrics_path)
            with open(self.cfg.metrics_path, "a") as fh:
                if fresh:
                    fh.write(METRICS_CSV_HEADER + "\n")
                fh.write(row + "\n")

    def serve_forever(self) -> None:
        if not self._listeners:
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
        for sock in self._listeners:
            try:
                sock.close()
            except OSError:
                pass


def format_metrics_row(encoding: str, m: SessionMetrics) -> str:
    return (
        f"{encoding},{m.updates},{m.duration:.3f},{m.updates_per_second:.6f},"
        f"{m.rectangles_received},{m.data_captured_bytes},{m.data_compressed_bytes},"
        f"{m.compression_ratio:.6f}"
    )
