import numpy as np
import pytest

from rfbkit.codecs import decode_raw, encode_raw
from rfbkit.errors import BoundsError, FramingError
from rfbkit.model import Framebuffer, PixelFormat, Rect, pixel_bytes

from conftest import random_fb, random_rect


def test_single_pixel_big_endian():
    fmt = PixelFormat(big_endian=True)
    fb = Framebuffer(1, 1, fmt, fill=0x00FF0000)
    assert encode_raw(fb, Rect(0, 0, 1, 1)) == bytes([0x00, 0xFF, 0x00, 0x00])


def test_two_pixels_concatenate_in_scan_order():
    fmt = PixelFormat()
    fb = Framebuffer(2, 1, fmt, pixels=np.array([[0x111111, 0x222222]], dtype=np.uint32))
    expected = pixel_bytes(0x111111, fmt) + pixel_bytes(0x222222, fmt)
    assert encode_raw(fb, Rect(0, 0, 2, 1)) == expected


def test_length_is_exactly_area_times_bpp():
    fb = Framebuffer(20, 10)
    rect = Rect(1, 2, 13, 7)
    assert len(encode_raw(fb, rect)) == 13 * 7 * 4


def test_rect_out_of_bounds():
    fb = Framebuffer(8, 8)
    with pytest.raises(BoundsError):
        encode_raw(fb, Rect(4, 4, 8, 8))


def test_decode_writes_only_inside_rect():
    fb = Framebuffer(8, 8, fill=5)
    rect = Rect(2, 2, 3, 3)
    payload = encode_raw(Framebuffer(8, 8, fill=9), rect)
    decode_raw(payload, rect, fb.format, fb)
    assert (fb.region(rect) == 9).all()
    outside = fb.pixels.copy()
    outside[2:5, 2:5] = 5
    assert (outside == 5).all()


def test_decode_rejects_wrong_length():
    fb = Framebuffer(4, 4)
    with pytest.raises(FramingError):
        decode_raw(b"\x00" * 7, Rect(0, 0, 2, 1), fb.format, fb)


def test_roundtrip_13x7(rng):
    src = random_fb(rng, 20, 11)
    rect = Rect(3, 2, 13, 7)
    dst = Framebuffer(20, 11)
    decode_raw(encode_raw(src, rect), rect, src.format, dst)
    assert np.array_equal(dst.region(rect), src.region(rect))


@pytest.mark.parametrize("seed", range(20))
def test_roundtrip_random(seed):
    rng = np.random.RandomState(seed)
    src = random_fb(rng, 33, 21)
    rect = random_rect(rng, 33, 21)
    dst = Framebuffer(33, 21)
    decode_raw(encode_raw(src, rect), rect, src.format, dst)
    assert np.array_equal(dst.region(rect), src.region(rect))
