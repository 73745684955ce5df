"""Deterministic synthetic desktop: scripted scenarios, seeded content
rendering, damage accounting per client, and input handling.

All scene time is integer ticks of 100 ms; every pixel is a pure function of
(scenario, seed, tick) plus the cursor position, so identical inputs replay
identical sessions bit for bit.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .model import DamageRegion, Framebuffer, PixelFormat, Rect, compute_damage, region_normalize

TICK_SECONDS = 0.1
FRAMES_PER_SECOND = 10
NEXT_STEP_KEYSYM = ord("n")

APPS = ("browser", "music_player")
STEP_KINDS = ("home", "open_app", "wait", "scroll", "end")

_SCENARIO_DIR = Path(__file__).parent / "scenarios"


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate."""


@dataclass(frozen=True)
class ScenarioStep:
    kind: str
    app: Optional[str] = None
    seconds: float = 0.0
    dy: int = 0

    @property
    def ticks(self) -> int:
        return round(self.seconds * FRAMES_PER_SECOND)


@dataclass(frozen=True)
class Scenario:
    seed: int
    width: int
    height: int
    steps: tuple[ScenarioStep, ...]

    @property
    def total_ticks(self) -> int:
        return sum(s.ticks for s in self.steps)

    @property
    def duration_seconds(self) -> float:
        return self.total_ticks * TICK_SECONDS


def _step_from_dict(index: int, raw: dict) -> ScenarioStep:
    where = f"steps[{index}]"
    kind = raw.get("kind")
    if kind not in STEP_KINDS:
        raise ScenarioError(f"{where}: unknown step kind {kind!r} (expected one of {STEP_KINDS})")
    app = raw.get("app")
    if kind == "open_app":
        if app not in APPS:
            raise ScenarioError(f"{where}: open_app needs app in {APPS}, got {app!r}")
    elif app is not None:
        raise ScenarioError(f"{where}: only open_app steps take an app")
    seconds = raw.get("seconds")
    if kind in ("home", "open_app"):
        seconds = 1.0 if seconds is None else float(seconds)
    elif kind in ("wait", "scroll"):
        if seconds is None:
            raise ScenarioError(f"{where}: {kind} needs a seconds field")
        seconds = float(seconds)
        if seconds <= 0:
            raise ScenarioError(f"{where}: {kind} duration must be positive, got {seconds}")
    else:  # end
        if seconds is not None:
            raise ScenarioError(f"{where}: end takes no duration")
        seconds = 0.0
    dy = raw.get("dy", 0)
    if kind == "scroll":
        dy = int(dy)
        if dy == 0:
            raise ScenarioError(f"{where}: scroll needs dy != 0")
    elif raw.get("dy") is not None:
        raise ScenarioError(f"{where}: only scroll steps take dy")
    return ScenarioStep(kind=kind, app=app, seconds=seconds, dy=dy)


def scenario_from_dict(data: dict, origin: str = "<scenario>") -> Scenario:
    try:
        seed = int(data.get("seed", 0))
        width = int(data["width"])
        height = int(data["height"])
        raw_steps = data["steps"]
    except KeyError as exc:
        raise ScenarioError(f"{origin}: missing field {exc}") from None
    if width < 48 or height < 48:
        raise ScenarioError(f"{origin}: screen must be at least 48x48, got {width}x{height}")
    if width > 4096 or height > 4096:
        raise ScenarioError(f"{origin}: screen larger than 4096x4096")
    if not isinstance(raw_steps, list) or not raw_steps:
        raise ScenarioError(f"{origin}: steps must be a non-empty list")
    steps = tuple(_step_from_dict(i, s) for i, s in enumerate(raw_steps))
    for i, step in enumerate(steps[:-1]):
        if step.kind == "end":
            raise ScenarioError(f"steps[{i}]: end must be the final step")
    if steps[-1].kind != "end":
        raise ScenarioError("the final step must be end")
    # a scroll step only makes sense while the browser is on screen
    app = None
    for i, step in enumerate(steps):
        if step.kind == "home":
            app = None
        elif step.kind == "open_app":
            app = step.app
        elif step.kind == "scroll" and app != "browser":
            raise ScenarioError(f"steps[{i}]: scroll requires the browser to be open")
    scenario = Scenario(seed=seed, width=width, height=height, steps=steps)
    if scenario.total_ticks <= 0:
        raise ScenarioError(f"{origin}: total duration must be positive")
    return scenario


def load_scenario(source: str | Path) -> Scenario:
    """Load a scenario from a JSON file, or by bundled name (e.g. 'reference')."""
    path = Path(source)
    if not path.suffix and not path.exists():
        bundled = _SCENARIO_DIR / f"{source}.json"
        if bundled.exists():
            path = bundled
    if not path.exists():
        raise ScenarioError(f"scenario {source!r} not found (not a file or bundled name)")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(data, origin=str(path))


def _rng(*parts: int) -> np.random.RandomState:
    mixed = 0x9E3779B9
    for p in parts:
        mixed = (mixed * 1_000_003 + int(p)) & 0xFFFFFFFF
    return np.random.RandomState(mixed)


@dataclass(frozen=True)
class _Timeline:
    starts: tuple[int, ...]        # start tick of each step
    apps: tuple[Optional[str], ...]  # app on screen during each step


class SceneRenderer:
    """Pure content generator: tick -> pixel array, no cursor, no clients."""

    LINE_HEIGHT = 16

    def __init__(self, scenario: Scenario, seed: Optional[int] = None,
                 format: PixelFormat = PixelFormat()):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.format = format
        self.width = scenario.width
        self.height = scenario.height
        self._compile_timeline()
        self._compute_layout()
        self._build_static_assets()
        self._line_cache: dict[int, np.ndarray] = {}

    # -- timeline ----------------------------------------------------------

    def _compile_timeline(self) -> None:
        starts = []
        apps = []
        tick = 0
        app: Optional[str] = None
        for step in self.scenario.steps:
            starts.append(tick)
            if step.kind == "home":
                app = None
            elif step.kind == "open_app":
                app = step.app
            apps.append(app)
            tick += step.ticks
        self.total_ticks = tick
        self._timeline = _Timeline(tuple(starts), tuple(apps))

    def _step_index_at(self, tick: int) -> int:
        starts = self._timeline.starts
        idx = 0
        for i, start in enumerate(starts):
            if tick >= start:
                idx = i
        return idx

    def next_step_start(self, tick: int) -> int:
        for start in self._timeline.starts:
            if start > tick:
                return start
        return self.total_ticks

    def app_at(self, tick: int) -> Optional[str]:
        return self._timeline.apps[self._step_index_at(tick)]

    def scroll_offset(self, tick: int) -> int:
        offset = 0
        for step, start in zip(self.scenario.steps, self._timeline.starts):
            if step.kind != "scroll" or tick < start:
                continue
            frames = min(tick, start + step.ticks - 1) - start + 1
            offset += step.dy * frames
        return offset

    def scroll_shift(self, tick: int) -> Optional[tuple[Rect, int]]:
        """If the transition (tick-1 -> tick) is a pure upward shift of the
        browser page region, return (page_rect, dy)."""
        if tick < 1:
            return None
        idx = self._step_index_at(tick)
        step = self.scenario.steps[idx]
        if step.kind != "scroll" or self._step_index_at(tick - 1) != idx:
            return None
        if step.dy <= 0 or step.dy >= self.page_rect.h:
            return None  # only downward page movement maps to a copy
        return self.page_rect, step.dy

    # -- layout ------------------------------------------------------------

    def _compute_layout(self) -> None:
        w, h = self.width, self.height
        ix, iy = max(2, w // 40), max(2, h // 30)
        self.window_rect = Rect(ix, iy, w - 2 * ix, h - 2 * iy)
        win = self.window_rect
        title_h = max(4, h // 24)
        toolbar_h = max(6, h // 24)
        self.title_rect = Rect(win.x, win.y, win.w, title_h)
        self.toolbar_rect = Rect(win.x, win.y + title_h, win.w, toolbar_h)
        page_y = win.y + title_h + toolbar_h
        self.page_rect = Rect(win.x, page_y, win.w, win.bottom - page_y)
        # bars cover ~30% of the screen: pick the width, derive the height
        bw = min(win.w - 4, max(16, (w * 3) // 5))
        bh = min(win.h - 4, max(8, (3 * w * h) // (10 * bw)))
        bx = win.x + (win.w - bw) // 2
        by = min(win.bottom - bh - 2, win.y + title_h + (win.h - title_h - bh) * 2 // 3)
        by = max(win.y + title_h + 2, by)
        self.bars_rect = Rect(bx, by, bw, min(bh, win.bottom - by - 2))
        art = min(64, win.w // 4, win.h // 4)
        self.art_rect = Rect(win.x + 4, win.y + title_h + 4, max(8, art), max(8, art))
        banner_w = max(16, min(self.toolbar_rect.w - 8, w // 3))
        self.banner_rect = Rect(
            self.toolbar_rect.x + 4,
            self.toolbar_rect.y + 1,
            banner_w,
            max(4, self.toolbar_rect.h - 2),
        )

    # -- static assets -----------------------------------------------------

    def _build_static_assets(self) -> None:
        fmt = self.format
        rng = _rng(self.seed, 1)
        self.col_desktop = fmt.rgb(28, 60, 80)
        self.col_taskbar = fmt.rgb(16, 24, 32)
        self.col_window = fmt.rgb(236, 236, 232)
        self.col_title = fmt.rgb(40, 90, 160)
        self.col_toolbar = fmt.rgb(210, 210, 205)
        self.col_text = fmt.rgb(30, 30, 34)
        self.col_player = fmt.rgb(34, 34, 44)
        self.col_player_trim = fmt.rgb(60, 60, 78)

        home = np.full((self.height, self.width), self.col_desktop, dtype=np.uint32)
        task_h = max(4, self.height // 20)
        home[self.height - task_h :, :] = self.col_taskbar
        icon = max(8, min(48, self.width // 13))
        pitch = icon * 2
        for row in range(3):
            for col in range(4):
                x = pitch // 2 + col * pitch
                y = pitch // 2 + row * pitch
                if x + icon >= self.width or y + icon >= self.height - task_h:
                    continue
                color = fmt.rgb(*(int(v) for v in rng.randint(40, 256, size=3)))
                home[y : y + icon, x : x + icon] = color
                home[y + icon - max(2, icon // 8) : y + icon, x : x + icon] = self.col_taskbar
        self._home = home

        art_rng = _rng(self.seed, 2)
        self._album_art = art_rng.randint(
            0, 1 << 24, size=(self.art_rect.h, self.art_rect.w)
        ).astype(np.uint32)

        bar_rng = _rng(self.seed, 3)
        self.n_bars = max(4, min(24, self.bars_rect.w // 16))
        self._bar_colors = [
            fmt.rgb(int(c[0]), int(c[1]), int(c[2]))
            for c in bar_rng.randint(90, 256, size=(self.n_bars, 3))
        ]
        banner_rng = _rng(self.seed, 4)
        self._banner_palette = banner_rng.randint(0, 1 << 24, size=16).astype(np.uint32)

    def _line_template(self, band: int) -> np.ndarray:
        row = self._line_cache.get(band)
        if row is not None:
            return row
        w = self.page_rect.w
        row = np.full(w, self.col_window, dtype=np.uint32)
        rng = _rng(self.seed, 5, band)
        x = int(rng.randint(2, 14))
        while x < w - 4:
            run = int(rng.randint(6, 40))
            gap = int(rng.randint(3, 12))
            row[x : min(w, x + run)] = self.col_text
            x += run + gap
        self._line_cache[band] = row
        return row

    # -- per-frame drawing ---------------------------------------------------

    def _draw_browser(self, canvas: np.ndarray, tick: int) -> None:
        win, fmt = self.window_rect, self.format
        canvas[win.y : win.bottom, win.x : win.right] = self.col_window
        t = self.title_rect
        canvas[t.y : t.bottom, t.x : t.right] = self.col_title
        tb = self.toolbar_rect
        canvas[tb.y : tb.bottom, tb.x : tb.right] = self.col_toolbar
        # toolbar activity indicator: palette noise refreshed every frame
        b = self.banner_rect
        noise = _rng(self.seed, 6, tick).randint(0, len(self._banner_palette), size=(b.h, b.w))
        canvas[b.y : b.bottom, b.x : b.right] = self._banner_palette[noise]
        # scrollable text page
        offset = self.scroll_offset(tick)
        page = self.page_rect
        lh = self.LINE_HEIGHT
        for r in range(page.h):
            gy = r + offset
            within = gy % lh
            if 4 <= within < 13:
                canvas[page.y + r, page.x : page.right] = self._line_template(gy // lh)

    def _draw_player(self, canvas: np.ndarray, tick: int) -> None:
        win = self.window_rect
        canvas[win.y : win.bottom, win.x : win.right] = self.col_player
        t = self.title_rect
        canvas[t.y : t.bottom, t.x : t.right] = self.col_player_trim
        canvas[win.bottom - max(4, t.h) : win.bottom, win.x : win.right] = self.col_player_trim
        a = self.art_rect
        canvas[a.y : a.bottom, a.x : a.right] = self._album_art
        bars = self.bars_rect
        canvas[bars.y : bars.bottom, bars.x : bars.right] = self.col_player_trim
        heights = _rng(self.seed, 7, tick).randint(bars.h // 8 + 1, bars.h + 1, size=self.n_bars)
        slot = bars.w // self.n_bars
        for i in range(self.n_bars):
            bh = int(heights[i])
            x0 = bars.x + i * slot + 1
            x1 = min(x0 + slot - 2, bars.right)
            canvas[bars.bottom - bh : bars.bottom, x0:x1] = self._bar_colors[i]

    def render(self, tick: int) -> np.ndarray:
        """Content at a tick (cursor not included); frozen at the final frame."""
        eff = min(max(tick, 0), self.total_ticks - 1)
        canvas = self._home.copy()
        app = self.app_at(eff)
        if app == "browser":
            self._draw_browser(canvas, eff)
        elif app == "music_player":
            self._draw_player(canvas, eff)
        return canvas


# cursor glyph: a small solid pointer, row-aligned left
_CURSOR_ROWS = [1, 2, 3, 4, 5, 6, 7, 8, 7, 5, 3, 2]
CURSOR_W = 8
CURSOR_H = len(_CURSOR_ROWS)


def _cursor_mask() -> np.ndarray:
    mask = np.zeros((CURSOR_H, CURSOR_W), dtype=bool)
    for y, span in enumerate(_CURSOR_ROWS):
        mask[y, : min(span, CURSOR_W)] = True
    return mask


_CURSOR = _cursor_mask()


@dataclass
class _ClientView:
    pending: DamageRegion
    version: int


@dataclass(frozen=True)
class ScrollHint:
    """A single tick whose change was a pure page shift (CopyRect eligible)."""

    region: Rect
    dy: int
    base_version: int
    version: int


class SceneState:
    """Mutable scene shared by all sessions of one server.

    Guarded by .lock: advancement, input and snapshot-for-send are mutually
    exclusive; encoding always runs on snapshots outside the lock.
    """

    def __init__(self, scenario: Scenario, seed: Optional[int] = None,
                 format: PixelFormat = PixelFormat()):
        self.renderer = SceneRenderer(scenario, seed=seed, format=format)
        self.scenario = scenario
        self.width = scenario.width
        self.height = scenario.height
        self.format = format
        self.lock = threading.RLock()
        self.changed = threading.Condition(self.lock)
        self.tick = 0
        self.wall_offset_ticks = 0
        self.version = 0
        self.cursor = (0, 0)  # top-left: clear of the page, bars and banner regions
        self.cursor_color = format.rgb(250, 250, 250)
        self._base = self.renderer.render(0)
        self._screen = self._compose(self._base)
        self._clients: dict[int, _ClientView] = {}
        self._next_client = 1
        self.last_scroll: Optional[ScrollHint] = None

    # -- composition -------------------------------------------------------

    def _cursor_rect(self, pos: Optional[tuple[int, int]] = None) -> Rect:
        x, y = pos or self.cursor
        w = min(CURSOR_W, self.width - x)
        h = min(CURSOR_H, self.height - y)
        return Rect(x, y, max(w, 1), max(h, 1))

    def _compose(self, base: np.ndarray) -> np.ndarray:
        screen = base.copy()
        r = self._cursor_rect()
        patch = screen[r.y : r.bottom, r.x : r.right]
        patch[_CURSOR[: r.h, : r.w]] = self.cursor_color
        return screen

    # -- client registry ----------------------------------------------------

    def register_client(self) -> int:
        with self.lock:
            cid = self._next_client
            self._next_client += 1
            self._clients[cid] = _ClientView(DamageRegion(), self.version)
            return cid

    def drop_client(self, cid: int) -> None:
        with self.lock:
            self._clients.pop(cid, None)

    # -- time ----------------------------------------------------------------

    @property
    def ended(self) -> bool:
        return self.tick >= self.renderer.total_ticks

    @property
    def clock_seconds(self) -> float:
        return self.tick * TICK_SECONDS

    def advance_to_tick(self, target: int) -> DamageRegion:
        """Move the scene forward; returns the damage of the whole transition."""
        with self.lock:
            if target <= self.tick:
                return DamageRegion()
            single = target == self.tick + 1
            hint = self.renderer.scroll_shift(target) if single else None
            new_base = self.renderer.render(target)
            old_screen = self._screen
            prev_version = self.version
            self.tick = target
            self._base = new_base
            self._screen = self._compose(new_base)
            damage = compute_damage(
                Framebuffer(self.width, self.height, self.format, old_screen),
                Framebuffer(self.width, self.height, self.format, self._screen),
            )
            if damage.empty:
                self.changed.notify_all()
                return damage
            self.version += 1
            if hint is not None and not self._cursor_rect().intersects(hint[0]):
                self.last_scroll = ScrollHint(hint[0], hint[1], prev_version, self.version)
            else:
                self.last_scroll = None
            for view in self._clients.values():
                view.pending = view.pending.union(damage)
            self.changed.notify_all()
            return damage

    def advance_ticks(self, n: int = 1) -> DamageRegion:
        return self.advance_to_tick(self.tick + n)

    def advance_wall(self, elapsed_seconds: float) -> DamageRegion:
        target = self.wall_offset_ticks + int(elapsed_seconds * FRAMES_PER_SECOND)
        return self.advance_to_tick(target)

    def jump_to_next_step(self) -> DamageRegion:
        with self.lock:
            target = self.renderer.next_step_start(self.tick)
            self.wall_offset_ticks += target - self.tick
            return self.advance_to_tick(target)

    # -- input ---------------------------------------------------------------

    def apply_pointer(self, x: int, y: int, buttons: int = 0) -> DamageRegion:
        with self.lock:
            x = min(max(x, 0), self.width - 1)
            y = min(max(y, 0), self.height - 1)
            if (x, y) == self.cursor:
                return DamageRegion()
            old_rect = self._cursor_rect()
            self.cursor = (x, y)
            self._screen = self._compose(self._base)
            damage = region_normalize([old_rect, self._cursor_rect()])
            self.version += 1
            self.last_scroll = None
            for view in self._clients.values():
                view.pending = view.pending.union(damage)
            self.changed.notify_all()
            return damage

    def apply_key(self, down: bool, keysym: int) -> DamageRegion:
        if not down:
            return DamageRegion()
        if keysym == NEXT_STEP_KEYSYM:
            return self.jump_to_next_step()
        return DamageRegion()

    # -- serving helpers -------------------------------------------------------

    def snapshot(self) -> Framebuffer:
        with self.lock:
            return Framebuffer(self.width, self.height, self.format, self._screen.copy())

    def claim_update(self, cid: int) -> tuple[Framebuffer, DamageRegion, Optional[ScrollHint]]:
        """Snapshot + this client's pending damage; clears the pending set.

        The scroll hint is returned only when this client saw every frame up to
        the hinted one, so a CopyRect against its framebuffer is valid.
        """
        with self.lock:
            view = self._clients[cid]
            damage = view.pending
            hint = self.last_scroll
            usable = (
                hint is not None
                and view.version == hint.base_version
                and self.version == hint.version
            )
            view.pending = DamageRegion()
            view.version = self.version
            return self.snapshot(), damage, hint if usable else None

    def has_pending(self, cid: int) -> bool:
        with self.lock:
            return not self._clients[cid].pending.empty

    def mark_synced(self, cid: int) -> None:
        with self.lock:
            view = self._clients[cid]
            view.pending = DamageRegion()
            view.version = self.version
