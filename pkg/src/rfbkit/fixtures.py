"""Golden byte-vector export: seeded codec cases serialized to JSON so
decoders in other languages can prove bit-exact conformance against this
implementation.

The same generator feeds the randomized roundtrip acceptance corpus, so the
exported vectors are a prefix of exactly what the acceptance suite checks.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .codecs import (
    ZlibStream,
    encode_copyrect,
    encode_hextile,
    encode_raw,
    encode_rre,
    encode_zlib,
)
from .model import Framebuffer, PixelFormat, Rect

CORPUS_SEED = 0x5EED


@dataclass(frozen=True)
class RoundtripCase:
    fb: Framebuffer
    rect: Rect
    label: str


def _random_fb(rng: np.random.RandomState, width: int, height: int, palette: int | None,
               fmt: PixelFormat) -> Framebuffer:
    if palette is None:
        pixels = rng.randint(0, fmt.max_value + 1, size=(height, width), dtype=np.uint64)
    else:
        colors = rng.randint(0, fmt.max_value + 1, size=palette, dtype=np.uint64)
        pixels = colors[rng.randint(0, palette, size=(height, width))]
    return Framebuffer(width, height, fmt, pixels.astype(np.uint32))


def roundtrip_cases(
    seed: int = CORPUS_SEED,
    count: int = 1000,
    max_width: int = 64,
    max_height: int = 48,
    fmt: PixelFormat = PixelFormat(),
) -> Iterator[RoundtripCase]:
    """Seeded stream of (framebuffer, rect) cases mixing palettes and noise;
    rect sizes deliberately include non-multiples of 16."""
    rng = np.random.RandomState(seed)
    palettes = (None, 2, 3, 5, 9, 17)
    for i in range(count):
        width = int(rng.randint(18, max_width + 1))
        height = int(rng.randint(18, max_height + 1))
        fb = _random_fb(rng, width, height, palettes[i % len(palettes)], fmt)
        if i % 3 == 0:
            # force awkward geometry: 16m+1 edges exercise tile clipping
            w = min(width, 17)
            h = min(height, 17)
        else:
            w = int(rng.randint(1, width + 1))
            h = int(rng.randint(1, height + 1))
        x = int(rng.randint(0, width - w + 1))
        y = int(rng.randint(0, height - h + 1))
        yield RoundtripCase(fb, Rect(x, y, w, h), f"case-{i:04d}")


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _rect_list(rect: Rect) -> list[int]:
    return [rect.x, rect.y, rect.w, rect.h]


def _format_dict(fmt: PixelFormat) -> dict:
    return {
        "bits_per_pixel": fmt.bits_per_pixel,
        "depth": fmt.depth,
        "big_endian": fmt.big_endian,
        "true_color": fmt.true_color,
        "red_max": fmt.red_max,
        "green_max": fmt.green_max,
        "blue_max": fmt.blue_max,
        "red_shift": fmt.red_shift,
        "green_shift": fmt.green_shift,
        "blue_shift": fmt.blue_shift,
        "wire_hex": fmt.to_wire().hex(),
    }


def _simple_cases(encode, cases: list[RoundtripCase]) -> list[dict]:
    out = []
    for case in cases:
        payload = encode(case.fb, case.rect)
        expected = encode_raw(case.fb, case.rect)
        out.append({
            "name": case.label,
            "rect": _rect_list(case.rect),
            "payload_b64": _b64(payload),
            "expected_b64": _b64(expected),
        })
    return out


def _hextile_edge_cases(fmt: PixelFormat) -> list[RoundtripCase]:
    gradient = Framebuffer(
        17, 16, fmt, np.arange(17 * 16, dtype=np.uint32).reshape(16, 17)
    )
    solid = Framebuffer(40, 40, fmt, fill=fmt.rgb(10, 200, 30))
    two_tone = Framebuffer(32, 16, fmt, fill=fmt.rgb(50, 50, 50))
    two_tone.fill_rect(Rect(3, 3, 9, 9), fmt.rgb(250, 40, 40))
    two_tone.fill_rect(Rect(19, 3, 9, 9), fmt.rgb(250, 40, 40))
    return [
        RoundtripCase(gradient, Rect(0, 0, 17, 16), "edge-17x16-gradient"),
        RoundtripCase(solid, Rect(0, 0, 40, 40), "edge-40x40-solid"),
        RoundtripCase(two_tone, Rect(0, 0, 32, 16), "edge-carried-background"),
    ]


def _copyrect_cases(seed: int, fmt: PixelFormat) -> list[dict]:
    rng = np.random.RandomState(seed + 1)
    out = []
    specs = [
        (32, 24, Rect(16, 8, 12, 12), 0, 0, "copy-disjoint"),
        (32, 24, Rect(0, 1, 32, 20), 0, 0, "copy-overlap-down"),
        (40, 32, Rect(4, 4, 16, 16), 4, 4, "copy-identity"),
        (48, 32, Rect(3, 2, 21, 17), 20, 10, "copy-odd-sizes"),
    ]
    for width, height, rect, sx, sy, name in specs:
        fb = _random_fb(rng, width, height, 6, fmt)
        initial = fb.to_bytes()
        from .codecs import apply_copyrect

        apply_copyrect(fb, rect, sx, sy)
        out.append({
            "name": name,
            "width": width,
            "height": height,
            "initial_b64": _b64(initial),
            "rect": _rect_list(rect),
            "src": [sx, sy],
            "payload_b64": _b64(encode_copyrect(sx, sy)),
            "expected_full_b64": _b64(fb.to_bytes()),
        })
    return out


def _zlib_streams(seed: int, fmt: PixelFormat, streams: int = 3, updates_per_stream: int = 6) -> list[dict]:
    rng = np.random.RandomState(seed + 2)
    out = []
    for s in range(streams):
        stream = ZlibStream()
        updates = []
        for u in range(updates_per_stream):
            fb = _random_fb(rng, 48, 36, (None, 4, 9)[u % 3], fmt)
            w = int(rng.randint(1, 49))
            h = int(rng.randint(1, 37))
            rect = Rect(int(rng.randint(0, 48 - w + 1)), int(rng.randint(0, 36 - h + 1)), w, h)
            updates.append({
                "rect": _rect_list(rect),
                "payload_b64": _b64(encode_zlib(fb, rect, stream)),
                "expected_b64": _b64(encode_raw(fb, rect)),
            })
        out.append({"name": f"stream-{s}", "updates": updates})
    return out


def generate_fixtures(seed: int = CORPUS_SEED, cases_per_encoding: int = 24) -> dict:
    fmt = PixelFormat()
    corpus = list(roundtrip_cases(seed, cases_per_encoding, fmt=fmt))
    return {
        "seed": seed,
        "format": _format_dict(fmt),
        "raw": _simple_cases(encode_raw, corpus),
        "rre": _simple_cases(encode_rre, corpus),
        "hextile": _simple_cases(encode_hextile, corpus + _hextile_edge_cases(fmt)),
        "copyrect": _copyrect_cases(seed, fmt),
        "zlib": _zlib_streams(seed, fmt),
    }


def write_fixtures(path: str, seed: int = CORPUS_SEED, cases_per_encoding: int = 24) -> dict:
    data = generate_fixtures(seed, cases_per_encoding)
    with open(path, "w") as fh:
        json.dump(data, fh)
    return data
