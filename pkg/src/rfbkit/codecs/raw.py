"""Raw encoding (id 0): width*height pixel values, left-to-right, top-to-bottom."""

from __future__ import annotations

from ..model import Framebuffer, PixelFormat, Rect, pack_pixels, unpack_pixels
from ._util import RecordingReader


def encode_raw(fb: Framebuffer, rect: Rect) -> bytes:
    fb.check_rect(rect)
    return pack_pixels(fb.region(rect), fb.format)


def decode_raw(payload: bytes, rect: Rect, fmt: PixelFormat, dst: Framebuffer) -> None:
    values = unpack_pixels(payload, rect.area, fmt)
    dst.blit(rect, values.reshape(rect.h, rect.w))


def read_raw(reader, rect: Rect, fmt: PixelFormat, dst: Framebuffer) -> bytes:
    """Consume one raw rect from a stream; returns the wire payload."""
    rec = RecordingReader(reader)
    payload = rec.read_exact(rect.area * fmt.bytes_per_pixel)
    decode_raw(payload, rect, fmt, dst)
    return rec.consumed
