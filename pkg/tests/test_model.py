import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfbkit.errors import BoundsError
from rfbkit.model import (
    DamageRegion,
    Framebuffer,
    PixelFormat,
    Rect,
    SessionMetrics,
    bytes_to_pixel,
    compute_damage,
    convert_pixel,
    iter_tiles,
    pixel_bytes,
    region_normalize,
)

from conftest import ALL_FORMATS, coverage_bitmap


class TestPixelFormat:
    def test_default_is_32bpp_depth24_little_endian(self):
        fmt = PixelFormat()
        assert (fmt.bits_per_pixel, fmt.depth, fmt.big_endian) == (32, 24, False)
        assert (fmt.red_shift, fmt.green_shift, fmt.blue_shift) == (16, 8, 0)

    def test_wire_roundtrip(self):
        for fmt in ALL_FORMATS:
            assert PixelFormat.from_wire(fmt.to_wire()) == fmt
            assert len(fmt.to_wire()) == 16

    def test_rejects_bad_bpp(self):
        with pytest.raises(ValueError):
            PixelFormat(bits_per_pixel=24)

    def test_rejects_depth_above_bpp(self):
        with pytest.raises(ValueError):
            PixelFormat(bits_per_pixel=8, depth=16)

    def test_rejects_channel_escaping_bpp(self):
        with pytest.raises(ValueError):
            PixelFormat(bits_per_pixel=16, depth=16, red_max=255, red_shift=10)

    def test_rejects_overlapping_channels(self):
        with pytest.raises(ValueError):
            PixelFormat(red_shift=8, green_shift=8)


class TestPixelBytes:
    def test_32bpp_big_endian(self):
        fmt = PixelFormat(big_endian=True)
        assert pixel_bytes(0x000000FF, fmt) == bytes([0x00, 0x00, 0x00, 0xFF])

    def test_32bpp_little_endian(self):
        assert pixel_bytes(0x000000FF, PixelFormat()) == bytes([0xFF, 0x00, 0x00, 0x00])

    def test_8bpp_single_byte_either_endianness(self):
        for be in (False, True):
            fmt = PixelFormat(8, 8, be, True, 7, 7, 3, 5, 2, 0)
            assert pixel_bytes(0xA5, fmt) == bytes([0xA5])

    def test_out_of_range_value_rejected(self):
        fmt = PixelFormat(8, 8, False, True, 7, 7, 3, 5, 2, 0)
        with pytest.raises(ValueError):
            pixel_bytes(0x100, fmt)

    @given(data=st.data())
    def test_roundtrip(self, data):
        fmt = data.draw(st.sampled_from(ALL_FORMATS))
        value = data.draw(st.integers(min_value=0, max_value=fmt.max_value))
        assert bytes_to_pixel(pixel_bytes(value, fmt), fmt) == value
        assert len(pixel_bytes(value, fmt)) == fmt.bytes_per_pixel


class TestConvertPixel:
    def test_888_to_565_known_colors(self):
        src = PixelFormat()
        dst = PixelFormat(16, 16, False, True, 31, 63, 31, 11, 5, 0)
        assert convert_pixel(0xFFFFFF, src, dst) == 0xFFFF
        assert convert_pixel(0x000000, src, dst) == 0x0000
        assert convert_pixel(0xFF0000, src, dst) == 0xF800  # red only

    def test_identity_when_layouts_match(self):
        le = PixelFormat()
        be = PixelFormat(big_endian=True)
        assert convert_pixel(0x123456, le, be) == 0x123456


class TestRect:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Rect(0, 0, 0, 1)

    def test_rejects_coords_beyond_u16(self):
        with pytest.raises(ValueError):
            Rect(0xFFFF, 0, 2, 1)

    def test_intersect(self):
        a, b = Rect(0, 0, 4, 4), Rect(2, 2, 4, 4)
        assert a.intersect(b) == Rect(2, 2, 2, 2)
        assert a.intersect(Rect(4, 4, 2, 2)) is None

    def test_iter_tiles_clips_edges(self):
        tiles = list(iter_tiles(Rect(0, 0, 40, 40)))
        assert len(tiles) == 9
        assert tiles[-1] == Rect(32, 32, 8, 8)
        assert all(t.w == (8 if t.x == 32 else 16) for t in tiles)


class TestFramebuffer:
    def test_rejects_pixels_exceeding_format(self):
        with pytest.raises(ValueError):
            Framebuffer(2, 2, PixelFormat(8, 8, False, True, 7, 7, 3, 5, 2, 0), fill=0x1FF)

    def test_region_is_view(self):
        fb = Framebuffer(8, 8)
        fb.region(Rect(1, 1, 2, 2))[...] = 7
        assert fb.pixels[1, 1] == 7

    def test_check_rect_bounds(self):
        fb = Framebuffer(8, 8)
        with pytest.raises(BoundsError):
            fb.check_rect(Rect(4, 4, 8, 8))

    def test_first_difference(self):
        a, b = Framebuffer(4, 4), Framebuffer(4, 4)
        assert a.first_difference(b) is None
        b.pixels[2, 3] = 9
        assert a.first_difference(b) == (3, 2)


class TestRegionNormalize:
    def test_empty_input(self):
        assert region_normalize([]).empty

    def test_single_rect_passthrough(self):
        r = Rect(3, 4, 5, 6)
        assert region_normalize([r]).rects == (r,)

    def test_two_overlapping_rects_cover_24_pixels(self):
        # two 4x4 rects offset by (2, 0): union is a 6x4 block = 24 pixels
        rects = [Rect(0, 0, 4, 4), Rect(2, 0, 4, 4)]
        region = region_normalize(rects)
        expected = coverage_bitmap(rects, 8, 8)
        assert int(expected.sum()) == 24
        assert np.array_equal(coverage_bitmap(region.rects, 8, 8), expected)
        for i, a in enumerate(region.rects):
            for b in region.rects[i + 1 :]:
                assert not a.intersects(b)

    def test_out_of_bounds_rect_rejected(self):
        with pytest.raises(BoundsError):
            region_normalize([Rect(60, 60, 10, 10)], bounds=Rect(0, 0, 64, 64))

    @given(data=st.data())
    @settings(max_examples=200)
    def test_matches_bruteforce_union(self, data):
        rect_strategy = st.builds(
            lambda x, y, w, h: Rect(x, y, min(w, 64 - x), min(h, 64 - y)),
            st.integers(0, 62),
            st.integers(0, 62),
            st.integers(1, 32),
            st.integers(1, 32),
        )
        rects = data.draw(st.lists(rect_strategy, max_size=12))
        region = region_normalize(rects)
        assert np.array_equal(coverage_bitmap(region.rects, 64, 64), coverage_bitmap(rects, 64, 64))
        for i, a in enumerate(region.rects):
            for b in region.rects[i + 1 :]:
                assert not a.intersects(b)

    def test_output_order_is_scan_order(self):
        region = region_normalize([Rect(20, 20, 4, 4), Rect(0, 0, 4, 4), Rect(10, 0, 4, 4)])
        keys = [r.scan_key for r in region.rects]
        assert keys == sorted(keys)


class TestDamageRegion:
    def test_subtract_rect_leaves_frame(self):
        region = DamageRegion((Rect(0, 0, 10, 10),))
        remainder = region.subtract_rect(Rect(2, 2, 6, 6))
        bitmap = coverage_bitmap(remainder.rects, 10, 10)
        assert int(bitmap.sum()) == 100 - 36
        assert not bitmap[2:8, 2:8].any()

    def test_union(self):
        a = DamageRegion((Rect(0, 0, 2, 2),))
        merged = a.union([Rect(0, 0, 4, 4)])
        assert merged.area == 16


class TestComputeDamage:
    def test_identical_framebuffers(self):
        fb = Framebuffer(32, 32)
        assert compute_damage(fb, fb.copy()).empty

    def test_single_pixel_damage_is_one_clipped_tile(self):
        old = Framebuffer(40, 24)
        new = old.copy()
        new.pixels[5, 20] = 1  # inside tile column 1, row 0
        region = compute_damage(old, new)
        assert region.rects == (Rect(16, 0, 16, 16),)

    def test_pixel_in_edge_tile_clips_to_bounds(self):
        old = Framebuffer(40, 24)
        new = old.copy()
        new.pixels[20, 38] = 1
        region = compute_damage(old, new)
        assert region.rects == (Rect(32, 16, 8, 8),)

    def test_whole_screen(self):
        old = Framebuffer(48, 32)
        new = Framebuffer(48, 32, fill=1)
        region = compute_damage(old, new)
        assert region.rects == (Rect(0, 0, 48, 32),)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compute_damage(Framebuffer(4, 4), Framebuffer(5, 4))

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=60)
    def test_covers_every_changed_pixel(self, seed):
        rng = np.random.RandomState(seed)
        old = Framebuffer(50, 34, pixels=rng.randint(0, 4, size=(34, 50)).astype(np.uint32))
        new = Framebuffer(50, 34, pixels=rng.randint(0, 4, size=(34, 50)).astype(np.uint32))
        region = compute_damage(old, new)
        covered = coverage_bitmap(region.rects, 50, 34)
        changed = old.pixels != new.pixels
        assert bool(np.all(covered | ~changed))  # no changed pixel left uncovered


class TestSessionMetrics:
    def test_identities_hold_from_counters(self):
        m = SessionMetrics.from_counters(20, 24.4, 22, 26_530_000, 5_640_000)
        m.check()
        assert m.updates_per_second == pytest.approx(20 / 24.4, rel=1e-12)
        assert m.compression_ratio == pytest.approx(26_530_000 / 5_640_000, rel=1e-12)

    def test_check_rejects_inconsistent_rate(self):
        m = SessionMetrics(10, 10.0, 2.0, 10, 100, 100, 1.0)
        with pytest.raises(ValueError):
            m.check()

    def test_zero_compressed_bytes(self):
        m = SessionMetrics.from_counters(0, 1.0, 0, 0, 0)
        m.check()
        assert m.compression_ratio == 0.0
