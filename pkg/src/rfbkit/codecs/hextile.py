"""Hextile encoding (id 5): 16x16 tiles, each subencoded independently.

Tile mask bits: 1 raw, 2 background-specified, 4 foreground-specified,
8 any-subrects, 16 subrects-coloured. Background/foreground values carry over
between consecutive tiles of one rectangle; the carry resets at every new
rectangle, and the encoder re-specifies both after emitting a raw tile.
"""

from __future__ import annotations

import numpy as np

from ..errors import BoundsError, FramingError
from ..model import Framebuffer, PixelFormat, Rect, bytes_to_pixel, iter_tiles, pack_pixels, pixel_bytes, unpack_pixels
from ._util import BytesReader, RecordingReader, most_frequent_value, read_u8, solid_subrects

RAW = 1
BACKGROUND_SPECIFIED = 2
FOREGROUND_SPECIFIED = 4
ANY_SUBRECTS = 8
SUBRECTS_COLOURED = 16


def _encode_tile(
    arr: np.ndarray,
    fmt: PixelFormat,
    carry_bg: int | None,
    carry_fg: int | None,
) -> tuple[bytes, int | None, int | None]:
    th, tw = arr.shape
    bpp = fmt.bytes_per_pixel
    colors = np.unique(arr)

    if len(colors) == 1:
        bg = int(colors[0])
        if bg == carry_bg:
            return bytes([0]), carry_bg, carry_fg
        return bytes([BACKGROUND_SPECIFIED]) + pixel_bytes(bg, fmt), bg, carry_fg

    bg = most_frequent_value(arr)
    subrects = solid_subrects(arr, bg)
    bg_cost = 0 if bg == carry_bg else bpp
    raw_size = 1 + th * tw * bpp

    candidates: list[tuple[int, str]] = []
    fg = None
    if len(colors) == 2 and len(subrects) <= 255:
        fg = int(colors[0]) if int(colors[1]) == bg else int(colors[1])
        fg_cost = 0 if fg == carry_fg else bpp
        candidates.append((1 + bg_cost + fg_cost + 1 + 2 * len(subrects), "mono"))
    if len(subrects) <= 255:
        candidates.append((1 + bg_cost + 1 + (bpp + 2) * len(subrects), "coloured"))
    candidates.append((raw_size, "raw"))
    _, kind = min(candidates, key=lambda c: c[0])  # ties prefer the non-raw candidate listed first

    if kind == "raw":
        return bytes([RAW]) + pack_pixels(arr, fmt), None, None

    mask = ANY_SUBRECTS
    out = bytearray(1)
    if bg != carry_bg:
        mask |= BACKGROUND_SPECIFIED
        out += pixel_bytes(bg, fmt)
    if kind == "mono":
        assert fg is not None
        if fg != carry_fg:
            mask |= FOREGROUND_SPECIFIED
            out += pixel_bytes(fg, fmt)
        carry_fg = fg
    else:
        mask |= SUBRECTS_COLOURED
    out += bytes([len(subrects)])
    for x, y, w, h, color in subrects:
        if kind == "coloured":
            out += pixel_bytes(color, fmt)
        out += bytes([(x << 4) | y, ((w - 1) << 4) | (h - 1)])
    out[0] = mask
    return bytes(out), bg, carry_fg


def encode_hextile(fb: Framebuffer, rect: Rect) -> bytes:
    fb.check_rect(rect)
    out = bytearray()
    carry_bg: int | None = None
    carry_fg: int | None = None
    for tile in iter_tiles(rect):
        piece, carry_bg, carry_fg = _encode_tile(fb.region(tile), fb.format, carry_bg, carry_fg)
        out += piece
    return bytes(out)


def read_hextile(reader, rect: Rect, fmt: PixelFormat, dst: Framebuffer) -> bytes:
    rec = RecordingReader(reader)
    bpp = fmt.bytes_per_pixel
    bg: int | None = None
    fg: int | None = None
    for tile in iter_tiles(rect):
        mask = read_u8(rec)
        if mask & RAW:
            values = unpack_pixels(rec.read_exact(tile.area * bpp), tile.area, fmt)
            dst.blit(tile, values.reshape(tile.h, tile.w))
            continue
        if mask & BACKGROUND_SPECIFIED:
            bg = bytes_to_pixel(rec.read_exact(bpp), fmt)
        if bg is None:
            raise FramingError("hextile tile used carried background before any was specified")
        dst.fill_rect(tile, bg)
        if mask & FOREGROUND_SPECIFIED:
            if mask & SUBRECTS_COLOURED:
                raise FramingError("hextile tile sets both foreground-specified and subrects-coloured")
            fg = bytes_to_pixel(rec.read_exact(bpp), fmt)
        if mask & ANY_SUBRECTS:
            count = read_u8(rec)
            coloured = bool(mask & SUBRECTS_COLOURED)
            if count and not coloured and fg is None:
                raise FramingError("hextile tile used carried foreground before any was specified")
            for _ in range(count):
                color = bytes_to_pixel(rec.read_exact(bpp), fmt) if coloured else fg
                xy = read_u8(rec)
                wh = read_u8(rec)
                x, y = xy >> 4, xy & 0xF
                w, h = (wh >> 4) + 1, (wh & 0xF) + 1
                if x + w > tile.w or y + h > tile.h:
                    raise BoundsError(f"hextile subrect ({x},{y},{w},{h}) escapes {tile.w}x{tile.h} tile")
                dst.fill_rect(Rect(tile.x + x, tile.y + y, w, h), color)
    return rec.consumed


def decode_hextile(payload: bytes, rect: Rect, fmt: PixelFormat, dst: Framebuffer) -> None:
    reader = BytesReader(payload)
    read_hextile(reader, rect, fmt, dst)
    if reader.remaining:
        raise FramingError(f"{reader.remaining} trailing bytes after hextile payload")


def hextile_tiles(rect: Rect) -> list[Rect]:
    """Tile grid for a rect, row-major with clipped edge tiles."""
    return list(iter_tiles(rect))
