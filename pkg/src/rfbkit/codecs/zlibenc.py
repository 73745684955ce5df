"""Zlib encoding (id 6): raw pixel data through one persistent RFC 1950 stream
per connection direction, each payload prefixed with its compressed length."""

from __future__ import annotations

import struct
import zlib

from ..errors import FramingError
from ..model import Framebuffer, PixelFormat, Rect
from ._util import BytesReader, RecordingReader, read_u32
from .raw import decode_raw, encode_raw

DEFAULT_LEVEL = 6


class ZlibStream:
    """Per-connection compressor/decompressor pair.

    The stream is never reset mid-connection: sequential updates only decode
    in the order they were produced. Each side of a connection owns one.
    """

    def __init__(self, level: int = DEFAULT_LEVEL):
        self.level = level
        self._comp = zlib.compressobj(level)
        self._decomp = zlib.decompressobj()

    def compress(self, data: bytes) -> bytes:
        # sync flush so the decoder needs no lookahead past this payload
        return self._comp.compress(data) + self._comp.flush(zlib.Z_SYNC_FLUSH)

    def decompress(self, data: bytes, expected_len: int) -> bytes:
        try:
            out = self._decomp.decompress(data)
        except zlib.error as exc:
            raise FramingError(f"zlib stream corrupt: {exc}") from exc
        if len(out) != expected_len or self._decomp.unconsumed_tail:
            raise FramingError(
                f"zlib payload decoded to {len(out)} bytes, expected {expected_len} (stream out of sync?)"
            )
        return out


def encode_zlib(fb: Framebuffer, rect: Rect, stream: ZlibStream) -> bytes:
    body = stream.compress(encode_raw(fb, rect))
    return struct.pack(">I", len(body)) + body


def read_zlib(reader, rect: Rect, fmt: PixelFormat, dst: Framebuffer, stream: ZlibStream) -> bytes:
    rec = RecordingReader(reader)
    length = read_u32(rec)
    body = rec.read_exact(length)
    raw = stream.decompress(body, rect.area * fmt.bytes_per_pixel)
    decode_raw(raw, rect, fmt, dst)
    return rec.consumed


def decode_zlib(payload: bytes, rect: Rect, fmt: PixelFormat, dst: Framebuffer, stream: ZlibStream) -> None:
    reader = BytesReader(payload)
    read_zlib(reader, rect, fmt, dst, stream)
    if reader.remaining:
        raise FramingError(f"{reader.remaining} trailing bytes after zlib payload")
