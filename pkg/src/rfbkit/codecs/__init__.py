"""Rectangle encodings and encoding negotiation.

Encoding ids on the wire: 0 Raw, 1 CopyRect, 2 RRE, 5 Hextile, 6 Zlib.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..model import Framebuffer, PixelFormat, Rect, RectUpdate
from .copyrect import apply_copyrect, decode_copyrect, encode_copyrect, read_copyrect
from .hextile import decode_hextile, encode_hextile, hextile_tiles, read_hextile
from .raw import decode_raw, encode_raw, read_raw
from .rre import decode_rre, encode_rre, read_rre
from .zlibenc import ZlibStream, decode_zlib, encode_zlib, read_zlib

ENC_RAW = 0
ENC_COPYRECT = 1
ENC_RRE = 2
ENC_HEXTILE = 5
ENC_ZLIB = 6

SUPPORTED_ENCODINGS = frozenset({ENC_RAW, ENC_COPYRECT, ENC_RRE, ENC_HEXTILE, ENC_ZLIB})

ENCODING_NAMES = {
    ENC_RAW: "raw",
    ENC_COPYRECT: "copyrect",
    ENC_RRE: "rre",
    ENC_HEXTILE: "hextile",
    ENC_ZLIB: "zlib",
}

ENCODING_IDS = {name: enc_id for enc_id, name in ENCODING_NAMES.items()}


def encoding_id(name: str) -> int:
    try:
        return ENCODING_IDS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown encoding {name!r}; expected one of {sorted(ENCODING_IDS)}") from None


@dataclass(frozen=True)
class EncodingChoice:
    """Negotiated encoding for a session; strict forbids per-rect raw fallback."""

    encoding_id: int
    strict: bool = False

    def __post_init__(self) -> None:
        if self.encoding_id not in SUPPORTED_ENCODINGS:
            raise ValueError(f"unsupported encoding id {self.encoding_id}")

    @property
    def name(self) -> str:
        return ENCODING_NAMES[self.encoding_id]


def negotiate_encoding(client_prefs: Sequence[int], server_supported: Iterable[int]) -> EncodingChoice:
    """First client preference the server supports; Raw is the total fallback."""
    supported = set(server_supported) | {ENC_RAW}
    for enc_id in client_prefs:
        if enc_id in supported and enc_id in SUPPORTED_ENCODINGS:
            return EncodingChoice(enc_id)
    return EncodingChoice(ENC_RAW)


def encode_rect(fb: Framebuffer, rect: Rect, choice: EncodingChoice, stream: ZlibStream | None = None) -> RectUpdate:
    """Encode one rect with the session's encoding.

    In non-strict mode an encoding that came out larger than raw falls back to a
    raw rect; strict mode (benchmarks) always emits the chosen encoding.
    CopyRect cannot encode arbitrary content and is not a valid choice here.
    """
    enc = choice.encoding_id
    if enc == ENC_RAW:
        return RectUpdate(rect, ENC_RAW, encode_raw(fb, rect))
    if enc == ENC_RRE:
        payload = encode_rre(fb, rect)
    elif enc == ENC_HEXTILE:
        payload = encode_hextile(fb, rect)
    elif enc == ENC_ZLIB:
        if stream is None:
            raise ValueError("zlib encoding needs the connection's stream")
        payload = encode_zlib(fb, rect, stream)
    else:
        raise ValueError(f"cannot encode content as {ENCODING_NAMES.get(enc, enc)}")
    if not choice.strict and enc != ENC_ZLIB:
        # zlib never falls back: skipping a payload would desync the stream
        raw_len = rect.area * fb.format.bytes_per_pixel
        if len(payload) > raw_len:
            return RectUpdate(rect, ENC_RAW, encode_raw(fb, rect))
    return RectUpdate(rect, enc, payload)


def apply_update(fb: Framebuffer, update: RectUpdate, stream: ZlibStream | None = None) -> None:
    """Decode one payload-bearing update into a framebuffer."""
    from ..errors import FramingError
    from ._util import BytesReader

    reader = BytesReader(update.payload)
    read_rect_payload(reader, update.rect, update.encoding_id, fb.format, fb, stream)
    if reader.remaining:
        raise FramingError(f"{reader.remaining} trailing bytes after {update.encoding_id} payload")


def read_rect_payload(reader, rect: Rect, encoding_id: int, fmt: PixelFormat, dst: Framebuffer, stream: ZlibStream | None):
    """Consume and apply one rect body from a stream; returns the payload bytes."""
    if encoding_id == ENC_RAW:
        return read_raw(reader, rect, fmt, dst)
    if encoding_id == ENC_COPYRECT:
        return read_copyrect(reader, rect, dst)
    if encoding_id == ENC_RRE:
        return read_rre(reader, rect, fmt, dst)
    if encoding_id == ENC_HEXTILE:
        return read_hextile(reader, rect, fmt, dst)
    if encoding_id == ENC_ZLIB:
        if stream is None:
            raise ValueError("zlib decoding needs the connection's stream")
        return read_zlib(reader, rect, fmt, dst, stream)
    raise ValueError(f"unsupported encoding id {encoding_id}")


__all__ = [
    "ENC_RAW", "ENC_COPYRECT", "ENC_RRE", "ENC_HEXTILE", "ENC_ZLIB",
    "SUPPORTED_ENCODINGS", "ENCODING_NAMES", "ENCODING_IDS", "encoding_id",
    "EncodingChoice", "negotiate_encoding", "encode_rect", "read_rect_payload", "apply_update",
    "ZlibStream",
    "encode_raw", "decode_raw", "read_raw",
    "encode_copyrect", "apply_copyrect", "decode_copyrect", "read_copyrect",
    "encode_rre", "decode_rre", "read_rre",
    "encode_hextile", "decode_hextile", "read_hextile", "hextile_tiles",
    "encode_zlib", "decode_zlib", "read_zlib",
]
