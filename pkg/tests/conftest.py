import numpy as np
import pytest

from rfbkit.model import Framebuffer, PixelFormat, Rect

RGB332 = PixelFormat(8, 8, False, True, 7, 7, 3, 5, 2, 0)
RGB565 = PixelFormat(16, 16, False, True, 31, 63, 31, 11, 5, 0)
RGB888_BE = PixelFormat(32, 24, True, True, 255, 255, 255, 16, 8, 0)

ALL_FORMATS = [PixelFormat(), RGB888_BE, RGB565, RGB332]


def random_fb(rng: np.random.RandomState, width, height, fmt=None, palette=None) -> Framebuffer:
    """Seeded framebuffer; palette limits distinct colours (None = full noise)."""
    fmt = fmt or PixelFormat()
    if palette is None:
        pixels = rng.randint(0, fmt.max_value + 1, size=(height, width), dtype=np.uint64)
    else:
        colors = rng.randint(0, fmt.max_value + 1, size=palette, dtype=np.uint64)
        pixels = colors[rng.randint(0, palette, size=(height, width))]
    return Framebuffer(width, height, fmt, pixels.astype(np.uint32))


def random_rect(rng: np.random.RandomState, width, height) -> Rect:
    w = int(rng.randint(1, width + 1))
    h = int(rng.randint(1, height + 1))
    x = int(rng.randint(0, width - w + 1))
    y = int(rng.randint(0, height - h + 1))
    return Rect(x, y, w, h)


def coverage_bitmap(rects, width, height) -> np.ndarray:
    """Brute-force per-pixel union of a rect list."""
    grid = np.zeros((height, width), dtype=bool)
    for r in rects:
        grid[r.y : r.bottom, r.x : r.right] = True
    return grid


@pytest.fixture
def rng():
    return np.random.RandomState(0xC0FFEE)
