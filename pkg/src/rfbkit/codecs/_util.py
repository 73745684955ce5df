"""Byte-reader adapters and the shared solid-subrectangle extractor."""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FramingError


class BytesReader:
    """read_exact over an in-memory payload; short reads raise FramingError."""

    __slots__ = ("_data", "_pos")

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def read_exact(self, n: int) -> bytes:
        end = self._pos + n
        if end > len(self._data):
            raise FramingError(f"payload truncated: wanted {n} bytes, {len(self._data) - self._pos} left")
        chunk = self._data[self._pos : end]
        self._pos = end
        return chunk

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos


class RecordingReader:
    """Wraps any read_exact source and keeps every byte it consumed."""

    __slots__ = ("_inner", "_buf")

    def __init__(self, inner):
        self._inner = inner
        self._buf = bytearray()

    def read_exact(self, n: int) -> bytes:
        chunk = self._inner.read_exact(n)
        self._buf += chunk
        return chunk

    @property
    def consumed(self) -> bytes:
        return bytes(self._buf)


def read_u8(reader) -> int:
    return reader.read_exact(1)[0]


def read_u16(reader) -> int:
    return struct.unpack(">H", reader.read_exact(2))[0]


def read_u32(reader) -> int:
    return struct.unpack(">I", reader.read_exact(4))[0]


def most_frequent_value(arr: np.ndarray) -> int:
    """Most frequent pixel value; ties break to the lowest value."""
    colors, counts = np.unique(arr, return_counts=True)
    return int(colors[int(np.argmax(counts))])  # np.unique sorts, first max wins


def solid_subrects(arr: np.ndarray, background: int) -> list[tuple[int, int, int, int, int]]:
    """Greedy cover of all non-background pixels with solid-colour rects.

    Row-major maximal horizontal runs, merged vertically when consecutive rows
    carry an identical (x, w, colour) run. Returns (x, y, w, h, colour) tuples
    sorted in scan order of each rect's top-left corner.
    """
    h, w = arr.shape
    done: list[tuple[int, int, int, int, int]] = []
    open_runs: dict[tuple[int, int, int], list[int]] = {}  # (x, w, colour) -> [y0, h]
    for y in range(h):
        row = arr[y]
        if w == 1:
            breaks = np.empty(0, dtype=np.int64)
        else:
            breaks = np.flatnonzero(row[:-1] != row[1:]) + 1
        starts = np.concatenate(([0], breaks))
        ends = np.concatenate((breaks, [w]))
        row_keys = set()
        for s, e in zip(starts, ends):
            color = int(row[s])
            if color == background:
                continue
            key = (int(s), int(e - s), color)
            row_keys.add(key)
            run = open_runs.get(key)
            if run is not None and run[0] + run[1] == y:
                run[1] += 1
            else:
                if run is not None:
                    done.append((key[0], run[0], key[1], run[1], key[2]))
                open_runs[key] = [y, 1]
        for key in [k for k in open_runs if k not in row_keys]:
            y0, rh = open_runs.pop(key)
            done.append((key[0], y0, key[1], rh, key[2]))
    for key, (y0, rh) in open_runs.items():
        done.append((key[0], y0, key[1], rh, key[2]))
    done.sort(key=lambda t: (t[1], t[0]))
    return done
