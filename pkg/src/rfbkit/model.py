"""Domain types shared by every layer: pixel formats, framebuffers, rectangles,
damage regions, and per-session metrics."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import BoundsError, FramingError

MAX_COORD = 0xFFFF  # rect edges must stay addressable by unsigned 16-bit wire fields


def _bit_width(value: int) -> int:
    return value.bit_length()


@dataclass(frozen=True)
class PixelFormat:
    """True-colour pixel layout, mirroring the 16-byte wire structure."""

    bits_per_pixel: int = 32
    depth: int = 24
    big_endian: bool = False
    true_color: bool = True
    red_max: int = 255
    green_max: int = 255
    blue_max: int = 255
    red_shift: int = 16
    green_shift: int = 8
    blue_shift: int = 0

    def __post_init__(self) -> None:
        if self.bits_per_pixel not in (8, 16, 32):
            raise ValueError(f"bits_per_pixel must be 8, 16 or 32, got {self.bits_per_pixel}")
        if not 0 < self.depth <= self.bits_per_pixel:
            raise ValueError(f"depth {self.depth} exceeds bits_per_pixel {self.bits_per_pixel}")
        channels = []
        for name in ("red", "green", "blue"):
            cmax = getattr(self, f"{name}_max")
            shift = getattr(self, f"{name}_shift")
            if cmax < 1 or cmax != (1 << _bit_width(cmax)) - 1:
                raise ValueError(f"{name}_max must be 2^n - 1, got {cmax}")
            if shift < 0 or shift + _bit_width(cmax) > self.bits_per_pixel:
                raise ValueError(f"{name} channel ({cmax} << {shift}) escapes {self.bits_per_pixel} bpp")
            channels.append((shift, shift + _bit_width(cmax)))
        if self.true_color:
            channels.sort()
            for (_, hi), (lo, _) in zip(channels, channels[1:]):
                if lo < hi:
                    raise ValueError("channel bit ranges overlap")

    @property
    def bytes_per_pixel(self) -> int:
        return self.bits_per_pixel // 8

    @property
    def max_value(self) -> int:
        return (1 << self.bits_per_pixel) - 1

    def rgb(self, r: int, g: int, b: int) -> int:
        """Compose a pixel value from 8-bit channel intensities."""
        return (
            ((r * self.red_max + 127) // 255) << self.red_shift
            | ((g * self.green_max + 127) // 255) << self.green_shift
            | ((b * self.blue_max + 127) // 255) << self.blue_shift
        )

    def to_wire(self) -> bytes:
        return struct.pack(
            ">BBBBHHHBBB3x",
            self.bits_per_pixel,
            self.depth,
            1 if self.big_endian else 0,
            1 if self.true_color else 0,
            self.red_max,
            self.green_max,
            self.blue_max,
            self.red_shift,
            self.green_shift,
            self.blue_shift,
        )

    @classmethod
    def from_wire(cls, data: bytes) -> "PixelFormat":
        if len(data) != 16:
            raise FramingError(f"pixel format needs 16 bytes, got {len(data)}")
        bpp, depth, be, tc, rm, gm, bm, rs, gs, bs = struct.unpack(">BBBBHHHBBB3x", data)
        return cls(bpp, depth, bool(be), bool(tc), rm, gm, bm, rs, gs, bs)


DEFAULT_FORMAT = PixelFormat()

_NUMPY_DTYPES = {8: "u1", 16: "u2", 32: "u4"}


def _wire_dtype(fmt: PixelFormat) -> np.dtype:
    return np.dtype((">" if fmt.big_endian else "<") + _NUMPY_DTYPES[fmt.bits_per_pixel])


def pack_pixels(values: np.ndarray, fmt: PixelFormat) -> bytes:
    """Serialize an array of pixel values in row-major wire order."""
    arr = np.ascontiguousarray(values, dtype=np.uint32)
    if arr.size and int(arr.max()) > fmt.max_value:
        raise ValueError(f"pixel value {int(arr.max()):#x} does not fit {fmt.bits_per_pixel} bpp")
    return arr.astype(_wire_dtype(fmt)).tobytes()


def unpack_pixels(data: bytes, count: int, fmt: PixelFormat) -> np.ndarray:
    if len(data) != count * fmt.bytes_per_pixel:
        raise FramingError(f"expected {count * fmt.bytes_per_pixel} pixel bytes, got {len(data)}")
    return np.frombuffer(data, dtype=_wire_dtype(fmt)).astype(np.uint32)


def pixel_bytes(value: int, fmt: PixelFormat) -> bytes:
    """Serialize one pixel value per the format's byte order."""
    if not 0 <= value <= fmt.max_value:
        raise ValueError(f"pixel value {value:#x} out of range for {fmt.bits_per_pixel} bpp")
    return pack_pixels(np.array([value], dtype=np.uint32), fmt)


def bytes_to_pixel(data: bytes, fmt: PixelFormat) -> int:
    return int(unpack_pixels(data, 1, fmt)[0])


def convert_pixels(values: np.ndarray, src: PixelFormat, dst: PixelFormat) -> np.ndarray:
    """Re-map true-colour pixel values between channel layouts (integer rounding)."""
    if (
        src.red_max == dst.red_max and src.red_shift == dst.red_shift
        and src.green_max == dst.green_max and src.green_shift == dst.green_shift
        and src.blue_max == dst.blue_max and src.blue_shift == dst.blue_shift
    ):
        return values
    arr = values.astype(np.uint64)
    out = np.zeros_like(arr)
    for name in ("red", "green", "blue"):
        smax, sshift = getattr(src, f"{name}_max"), getattr(src, f"{name}_shift")
        dmax, dshift = getattr(dst, f"{name}_max"), getattr(dst, f"{name}_shift")
        chan = (arr >> sshift) & smax
        out |= ((chan * dmax + smax // 2) // smax) << dshift
    return out.astype(np.uint32)


def convert_pixel(value: int, src: PixelFormat, dst: PixelFormat) -> int:
    return int(convert_pixels(np.array([value], dtype=np.uint32), src, dst)[0])


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, top-left origin."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValueError(f"rect needs positive size, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0 or self.x + self.w > MAX_COORD + 1 or self.y + self.h > MAX_COORD + 1:
            raise ValueError(f"rect {self} exceeds 16-bit coordinate range")

    @property
    def scan_key(self) -> tuple[int, int, int, int]:
        """Top-to-bottom, left-to-right ordering key."""
        return (self.y, self.x, self.h, self.w)

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def intersects(self, other: "Rect") -> bool:
        return self.x < other.right and other.x < self.right and self.y < other.bottom and other.y < self.bottom

    def intersect(self, other: "Rect") -> "Rect | None":
        x0, y0 = max(self.x, other.x), max(self.y, other.y)
        x1, y1 = min(self.right, other.right), min(self.bottom, other.bottom)
        if x1 <= x0 or y1 <= y0:
            return None
        return Rect(x0, y0, x1 - x0, y1 - y0)

    def contains(self, other: "Rect") -> bool:
        return self.x <= other.x and self.y <= other.y and self.right >= other.right and self.bottom >= other.bottom

    def translated(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w, self.h)


def iter_tiles(rect: Rect, size: int = 16) -> Iterator[Rect]:
    """Split a rect into size x size tiles, row-major; edge tiles are clipped."""
    for ty in range(rect.y, rect.bottom, size):
        th = min(size, rect.bottom - ty)
        for tx in range(rect.x, rect.right, size):
            yield Rect(tx, ty, min(size, rect.right - tx), th)


@dataclass(frozen=True)
class RectUpdate:
    """One rectangle header plus its encoded payload — the unit of display transfer."""

    rect: Rect
    encoding_id: int
    payload: bytes

    def __post_init__(self) -> None:
        from .codecs import SUPPORTED_ENCODINGS  # local import avoids a cycle

        if self.encoding_id not in SUPPORTED_ENCODINGS:
            raise ValueError(f"unsupported encoding id {self.encoding_id}")


class Framebuffer:
    """Width x height grid of pixel values in a declared format.

    Values are stored one uint32 per pixel regardless of wire bpp; serialization
    converts at the edge.
    """

    __slots__ = ("width", "height", "format", "pixels")

    def __init__(
        self,
        width: int,
        height: int,
        format: PixelFormat = DEFAULT_FORMAT,
        pixels: np.ndarray | None = None,
        fill: int = 0,
    ):
        if width < 1 or height < 1:
            raise ValueError(f"framebuffer needs positive dimensions, got {width}x{height}")
        self.width = width
        self.height = height
        self.format = format
        if pixels is None:
            if not 0 <= fill <= format.max_value:
                raise ValueError("fill value out of range for format")
            self.pixels = np.full((height, width), fill, dtype=np.uint32)
        else:
            arr = np.ascontiguousarray(pixels, dtype=np.uint32)
            if arr.shape != (height, width):
                raise ValueError(f"pixel array shape {arr.shape} != ({height}, {width})")
            if arr.size and int(arr.max()) > format.max_value:
                raise ValueError("pixel value does not fit format")
            self.pixels = arr

    @property
    def bounds(self) -> Rect:
        return Rect(0, 0, self.width, self.height)

    def check_rect(self, rect: Rect) -> None:
        if rect.x < 0 or rect.y < 0 or rect.right > self.width or rect.bottom > self.height:
            raise BoundsError(f"{rect} outside {self.width}x{self.height} framebuffer")

    def region(self, rect: Rect) -> np.ndarray:
        """View (no copy) of the pixels inside rect."""
        self.check_rect(rect)
        return self.pixels[rect.y : rect.bottom, rect.x : rect.right]

    def blit(self, rect: Rect, values: np.ndarray) -> None:
        region = self.region(rect)
        arr = np.asarray(values, dtype=np.uint32).reshape(rect.h, rect.w)
        if arr.size and int(arr.max()) > self.format.max_value:
            raise ValueError("pixel value does not fit format")
        region[...] = arr

    def fill_rect(self, rect: Rect, value: int) -> None:
        if not 0 <= value <= self.format.max_value:
            raise ValueError("fill value out of range for format")
        self.region(rect)[...] = value

    def copy(self) -> "Framebuffer":
        return Framebuffer(self.width, self.height, self.format, self.pixels.copy())

    def to_bytes(self) -> bytes:
        """Full contents in row-major wire order (raw-equivalent serialization)."""
        return pack_pixels(self.pixels, self.format)

    def same_content(self, other: "Framebuffer") -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.pixels, other.pixels))
        )

    def first_difference(self, other: "Framebuffer") -> tuple[int, int] | None:
        """(x, y) of the first differing pixel in scan order, or None."""
        if (self.width, self.height) != (other.width, other.height):
            raise ValueError("framebuffer dimensions differ")
        diff = np.flatnonzero(self.pixels != other.pixels)
        if diff.size == 0:
            return None
        idx = int(diff[0])
        return idx % self.width, idx // self.width


@dataclass(frozen=True)
class DamageRegion:
    """Pairwise-disjoint rects covering every changed pixel."""

    rects: tuple[Rect, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.rects

    @property
    def area(self) -> int:
        return sum(r.area for r in self.rects)

    def union(self, other: "DamageRegion | Iterable[Rect]") -> "DamageRegion":
        extra = other.rects if isinstance(other, DamageRegion) else tuple(other)
        return region_normalize((*self.rects, *extra))

    def subtract_rect(self, hole: Rect) -> "DamageRegion":
        pieces: list[Rect] = []
        for r in self.rects:
            if not r.intersects(hole):
                pieces.append(r)
                continue
            # up to four L-shaped remainders around the hole
            if r.y < hole.y:
                pieces.append(Rect(r.x, r.y, r.w, hole.y - r.y))
            if r.bottom > hole.bottom:
                pieces.append(Rect(r.x, hole.bottom, r.w, r.bottom - hole.bottom))
            mid_top = max(r.y, hole.y)
            mid_h = min(r.bottom, hole.bottom) - mid_top
            if r.x < hole.x:
                pieces.append(Rect(r.x, mid_top, hole.x - r.x, mid_h))
            if r.right > hole.right:
                pieces.append(Rect(hole.right, mid_top, r.right - hole.right, mid_h))
        return DamageRegion(tuple(sorted(pieces, key=lambda r: r.scan_key)))

    def covers_pixel(self, x: int, y: int) -> bool:
        return any(r.x <= x < r.right and r.y <= y < r.bottom for r in self.rects)


def region_normalize(rects: Sequence[Rect], bounds: Rect | None = None) -> DamageRegion:
    """Collapse arbitrary rects into a disjoint cover of the same pixels.

    Already-disjoint inputs pass through unchanged (sorted); overlapping inputs
    are split on y-bands, x-runs merged per band, and vertically coalesced.
    Output order is top-to-bottom, left-to-right.
    """
    rects = list(rects)
    if bounds is not None:
        for r in rects:
            if not bounds.contains(r):
                raise BoundsError(f"{r} outside {bounds}")
    if not rects:
        return DamageRegion(())
    if len(rects) <= 64 and not any(
        a.intersects(b) for i, a in enumerate(rects) for b in rects[i + 1 :]
    ):
        return DamageRegion(tuple(sorted(rects, key=lambda r: r.scan_key)))

    edges = sorted({r.y for r in rects} | {r.bottom for r in rects})
    bands: list[tuple[int, int, tuple[tuple[int, int], ...]]] = []
    for y0, y1 in zip(edges, edges[1:]):
        spans = sorted((r.x, r.right) for r in rects if r.y < y1 and r.bottom > y0)
        if not spans:
            continue
        merged = [list(spans[0])]
        for x0, x1 in spans[1:]:
            if x0 <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], x1)
            else:
                merged.append([x0, x1])
        bands.append((y0, y1, tuple((a, b) for a, b in merged)))

    out: list[Rect] = []
    run_start, run_end, run_spans = bands[0]
    for y0, y1, spans in bands[1:]:
        if y0 == run_end and spans == run_spans:
            run_end = y1
        else:
            out.extend(Rect(a, run_start, b - a, run_end - run_start) for a, b in run_spans)
            run_start, run_end, run_spans = y0, y1, spans
    out.extend(Rect(a, run_start, b - a, run_end - run_start) for a, b in run_spans)
    return DamageRegion(tuple(sorted(out, key=lambda r: r.scan_key)))


def compute_damage(old: Framebuffer, new: Framebuffer, tile: int = 16) -> DamageRegion:
    """Tile-aligned cover of every pixel that differs between two framebuffers."""
    if (old.width, old.height) != (new.width, new.height):
        raise ValueError(
            f"framebuffer shapes differ: {old.width}x{old.height} vs {new.width}x{new.height}"
        )
    changed = old.pixels != new.pixels
    if not changed.any():
        return DamageRegion(())
    th = (new.height + tile - 1) // tile
    tw = (new.width + tile - 1) // tile
    padded = np.zeros((th * tile, tw * tile), dtype=bool)
    padded[: new.height, : new.width] = changed
    grid = padded.reshape(th, tile, tw, tile).any(axis=(1, 3))
    rects: list[Rect] = []
    # horizontal runs of dirty tiles, merged vertically when x-aligned
    open_runs: dict[tuple[int, int], Rect] = {}
    for ty in range(th):
        row = grid[ty]
        runs = []
        tx = 0
        while tx < tw:
            if row[tx]:
                start = tx
                while tx < tw and row[tx]:
                    tx += 1
                runs.append((start, tx))
            else:
                tx += 1
        next_open: dict[tuple[int, int], Rect] = {}
        for start, end in runs:
            x = start * tile
            w = min(end * tile, new.width) - x
            y = ty * tile
            h = min((ty + 1) * tile, new.height) - y
            prev = open_runs.pop((start, end), None)
            if prev is not None and prev.bottom == y:
                next_open[(start, end)] = Rect(x, prev.y, w, prev.h + h)
            else:
                if prev is not None:
                    rects.append(prev)
                next_open[(start, end)] = Rect(x, y, w, h)
        rects.extend(open_runs.values())
        open_runs = next_open
    rects.extend(open_runs.values())
    return DamageRegion(tuple(sorted(rects, key=lambda r: r.scan_key)))


@dataclass(frozen=True)
class SessionMetrics:
    """The six benchmark quantities for one session."""

    updates: int
    duration: float
    updates_per_second: float
    rectangles_received: int
    data_captured_bytes: int
    data_compressed_bytes: int
    compression_ratio: float

    @classmethod
    def from_counters(
        cls,
        updates: int,
        duration: float,
        rectangles: int,
        captured_bytes: int,
        compressed_bytes: int,
    ) -> "SessionMetrics":
        rate = updates / duration if duration > 0 else 0.0
        ratio = captured_bytes / compressed_bytes if compressed_bytes > 0 else 0.0
        return cls(updates, duration, rate, rectangles, captured_bytes, compressed_bytes, ratio)

    def check(self) -> None:
        """Assert the arithmetic identities between the stored fields."""
        if self.duration > 0:
            expect = self.updates / self.duration
            if abs(self.updates_per_second - expect) > 1e-9 * max(1.0, abs(expect)):
                raise ValueError("updates_per_second != updates / duration")
        if self.data_compressed_bytes > 0:
            expect = self.data_captured_bytes / self.data_compressed_bytes
            if abs(self.compression_ratio - expect) > 1e-9 * max(1.0, abs(expect)):
                raise ValueError("compression_ratio != captured / compressed")
