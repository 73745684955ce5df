"""CopyRect encoding (id 1): payload is only the source coordinate."""

from __future__ import annotations

import struct

from ..errors import BoundsError
from ..model import Framebuffer, Rect
from ._util import BytesReader


def encode_copyrect(src_x: int, src_y: int) -> bytes:
    if not (0 <= src_x <= 0xFFFF and 0 <= src_y <= 0xFFFF):
        raise ValueError(f"copyrect source ({src_x}, {src_y}) exceeds 16-bit range")
    return struct.pack(">HH", src_x, src_y)


def apply_copyrect(dst_fb: Framebuffer, dst_rect: Rect, src_x: int, src_y: int) -> None:
    """Copy the source region as it was before the operation began (overlap-safe)."""
    dst_fb.check_rect(dst_rect)
    src_rect = Rect(src_x, src_y, dst_rect.w, dst_rect.h)
    try:
        dst_fb.check_rect(src_rect)
    except BoundsError as exc:
        raise BoundsError(f"copyrect source {src_rect} outside framebuffer") from exc
    snapshot = dst_fb.region(src_rect).copy()
    dst_fb.region(dst_rect)[...] = snapshot


def read_copyrect(reader, rect: Rect, dst: Framebuffer) -> bytes:
    payload = reader.read_exact(4)
    src_x, src_y = struct.unpack(">HH", payload)
    apply_copyrect(dst, rect, src_x, src_y)
    return payload


def decode_copyrect(payload: bytes, rect: Rect, dst: Framebuffer) -> None:
    read_copyrect(BytesReader(payload), rect, dst)
