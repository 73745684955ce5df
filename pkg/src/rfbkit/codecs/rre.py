"""RRE encoding (id 2): background colour plus solid sub-rectangles.

Payload: subrect count (u32) | background pixel | per subrect
(pixel | x, y, w, h as u16 each, relative to the rect). All big-endian.
"""

from __future__ import annotations

import struct

from ..errors import BoundsError, FramingError
from ..model import Framebuffer, PixelFormat, Rect, bytes_to_pixel, pixel_bytes
from ._util import BytesReader, RecordingReader, most_frequent_value, read_u32, solid_subrects


def encode_rre(fb: Framebuffer, rect: Rect) -> bytes:
    fb.check_rect(rect)
    fmt = fb.format
    region = fb.region(rect)
    background = most_frequent_value(region)
    subrects = solid_subrects(region, background)
    out = bytearray(struct.pack(">I", len(subrects)))
    out += pixel_bytes(background, fmt)
    for x, y, w, h, color in subrects:
        out += pixel_bytes(color, fmt)
        out += struct.pack(">HHHH", x, y, w, h)
    return bytes(out)


def read_rre(reader, rect: Rect, fmt: PixelFormat, dst: Framebuffer) -> bytes:
    rec = RecordingReader(reader)
    count = read_u32(rec)
    bpp = fmt.bytes_per_pixel
    background = bytes_to_pixel(rec.read_exact(bpp), fmt)
    dst.fill_rect(rect, background)
    for _ in range(count):
        color = bytes_to_pixel(rec.read_exact(bpp), fmt)
        x, y, w, h = struct.unpack(">HHHH", rec.read_exact(8))
        if w < 1 or h < 1 or x + w > rect.w or y + h > rect.h:
            raise BoundsError(f"rre subrect ({x},{y},{w},{h}) escapes {rect.w}x{rect.h} rect")
        dst.fill_rect(Rect(rect.x + x, rect.y + y, w, h), color)
    return rec.consumed


def decode_rre(payload: bytes, rect: Rect, fmt: PixelFormat, dst: Framebuffer) -> None:
    reader = BytesReader(payload)
    read_rre(reader, rect, fmt, dst)
    if reader.remaining:
        raise FramingError(f"{reader.remaining} trailing bytes after rre payload")
