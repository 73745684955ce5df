import json

import numpy as np
import pytest

from rfbkit.model import DamageRegion, Framebuffer, Rect
from rfbkit.scene import (
    NEXT_STEP_KEYSYM,
    ScenarioError,
    SceneRenderer,
    SceneState,
    load_scenario,
    scenario_from_dict,
)

from conftest import coverage_bitmap


def small_scenario(**overrides):
    data = {
        "seed": 5,
        "width": 96,
        "height": 80,
        "steps": [
            {"kind": "home", "seconds": 0.3},
            {"kind": "open_app", "app": "browser", "seconds": 0.4},
            {"kind": "wait", "seconds": 0.5},
            {"kind": "open_app", "app": "music_player", "seconds": 0.4},
            {"kind": "home", "seconds": 0.2},
            {"kind": "end"},
        ],
    }
    data.update(overrides)
    return scenario_from_dict(data)


def damage_is_sound(old: Framebuffer, new: Framebuffer, damage: DamageRegion) -> bool:
    """Oracle: outside the claimed damage, old and new must agree."""
    covered = coverage_bitmap(damage.rects, old.width, old.height)
    return bool(np.all((old.pixels == new.pixels) | covered))


class TestScenarioLoading:
    def test_reference_scenario_shape(self):
        ref = load_scenario("reference")
        assert len(ref.steps) == 7
        assert ref.duration_seconds == pytest.approx(10.0)
        assert ref.seed == 42 and (ref.width, ref.height) == (640, 480)
        waits = [s for s in ref.steps if s.kind == "wait"]
        assert [w.seconds for w in waits] == [3.0, 3.0]

    def test_identical_file_identical_scenario(self, tmp_path):
        src = (tmp_path / "s.json")
        src.write_text(json.dumps({
            "seed": 1, "width": 64, "height": 64,
            "steps": [{"kind": "home"}, {"kind": "end"}],
        }))
        assert load_scenario(src) == load_scenario(src)

    def test_empty_steps_rejected(self):
        with pytest.raises(ScenarioError, match="non-empty"):
            scenario_from_dict({"seed": 0, "width": 64, "height": 64, "steps": []})

    def test_unknown_step_kind_named_in_error(self):
        with pytest.raises(ScenarioError, match="teleport"):
            scenario_from_dict({
                "seed": 0, "width": 64, "height": 64,
                "steps": [{"kind": "teleport"}, {"kind": "end"}],
            })

    def test_wait_needs_positive_seconds(self):
        with pytest.raises(ScenarioError, match="positive"):
            small_scenario(steps=[{"kind": "wait", "seconds": 0}, {"kind": "end"}])

    def test_scroll_needs_nonzero_dy(self):
        with pytest.raises(ScenarioError, match="dy"):
            small_scenario(steps=[
                {"kind": "open_app", "app": "browser"},
                {"kind": "scroll", "dy": 0, "seconds": 1},
                {"kind": "end"},
            ])

    def test_scroll_requires_browser(self):
        with pytest.raises(ScenarioError, match="browser"):
            small_scenario(steps=[
                {"kind": "home"},
                {"kind": "scroll", "dy": 4, "seconds": 1},
                {"kind": "end"},
            ])

    def test_end_must_be_final(self):
        with pytest.raises(ScenarioError, match="final"):
            small_scenario(steps=[{"kind": "end"}, {"kind": "home"}, {"kind": "end"}])

    def test_missing_file(self):
        with pytest.raises(ScenarioError, match="not found"):
            load_scenario("no_such_scenario")

    def test_bad_json_reports_line(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\n  broken\n}")
        with pytest.raises(ScenarioError, match="line 2"):
            load_scenario(bad)


class TestRendererDeterminism:
    def test_identical_seed_identical_pixels_at_every_tick(self):
        scenario = small_scenario()
        a, b = SceneRenderer(scenario), SceneRenderer(scenario)
        for tick in range(scenario.total_ticks + 3):
            assert np.array_equal(a.render(tick), b.render(tick)), f"tick {tick}"

    def test_different_seed_changes_content(self):
        scenario = small_scenario()
        other = small_scenario(seed=6)
        assert not np.array_equal(SceneRenderer(scenario).render(0), SceneRenderer(other).render(0))

    def test_past_end_is_frozen(self):
        scenario = small_scenario()
        r = SceneRenderer(scenario)
        last = r.render(scenario.total_ticks - 1)
        assert np.array_equal(r.render(scenario.total_ticks + 50), last)


class TestStepScene:
    def test_same_clock_empty_damage(self):
        scene = SceneState(small_scenario())
        scene.advance_to_tick(2)
        assert scene.advance_to_tick(2).empty

    def test_damage_is_sound_for_every_tick(self):
        scene = SceneState(small_scenario())
        for _ in range(scene.renderer.total_ticks + 2):
            old = scene.snapshot()
            damage = scene.advance_ticks(1)
            assert damage_is_sound(old, scene.snapshot(), damage)

    def test_opening_browser_damages_the_window_region(self):
        scenario = small_scenario()
        scene = SceneState(scenario)
        open_tick = scene.renderer.next_step_start(0)
        scene.advance_to_tick(open_tick - 1)
        old = scene.snapshot()
        damage = scene.advance_ticks(1)
        assert damage_is_sound(old, scene.snapshot(), damage)
        win = scene.renderer.window_rect
        covered = coverage_bitmap(damage.rects, scenario.width, scenario.height)
        assert covered[win.y : win.bottom, win.x : win.right].all()

    def test_wait_in_player_damages_only_the_bars(self):
        scenario = small_scenario(steps=[
            {"kind": "open_app", "app": "music_player", "seconds": 0.3},
            {"kind": "wait", "seconds": 1.0},
            {"kind": "end"},
        ])
        scene = SceneState(scenario)
        scene.advance_to_tick(5)  # mid-wait
        damage = scene.advance_ticks(1)
        assert not damage.empty
        bars = scene.renderer.bars_rect
        tile_cover = Rect(
            bars.x // 16 * 16,
            bars.y // 16 * 16,
            ((bars.right + 15) // 16 * 16) - bars.x // 16 * 16,
            ((bars.bottom + 15) // 16 * 16) - bars.y // 16 * 16,
        )
        for r in damage.rects:
            assert tile_cover.contains(r), f"{r} outside animated-bars cover {tile_cover}"

    def test_clock_past_end_static(self):
        scene = SceneState(small_scenario())
        scene.advance_to_tick(scene.renderer.total_ticks)
        assert scene.ended
        assert scene.advance_ticks(5).empty


class TestSceneDeterminism:
    def test_two_scenes_same_seed_identical_bytes(self):
        scenario = small_scenario()
        a, b = SceneState(scenario), SceneState(scenario)
        for tick in (1, 3, 4, 9, 14, 30):
            a.advance_to_tick(tick)
            b.advance_to_tick(tick)
            assert a.snapshot().same_content(b.snapshot()), f"tick {tick}"


class TestInput:
    def test_pointer_move_damages_two_glyph_rects(self):
        scene = SceneState(small_scenario())
        scene.apply_pointer(0, 0)
        old = scene.snapshot()
        damage = scene.apply_pointer(10, 10)
        assert len(damage.rects) == 2
        assert all(r.w <= 16 and r.h <= 16 for r in damage.rects)
        assert damage_is_sound(old, scene.snapshot(), damage)

    def test_key_release_is_inert(self):
        scene = SceneState(small_scenario())
        assert scene.apply_key(False, NEXT_STEP_KEYSYM).empty

    def test_next_step_key_matches_step_transition_damage(self):
        scenario = small_scenario()
        steered = SceneState(scenario)
        steered.advance_to_tick(1)
        damage = steered.apply_key(True, NEXT_STEP_KEYSYM)
        stepped = SceneState(scenario)
        stepped.advance_to_tick(1)
        expected = stepped.advance_to_tick(stepped.renderer.next_step_start(1))
        assert damage.rects == expected.rects
        assert steered.snapshot().same_content(stepped.snapshot())

    def test_out_of_range_pointer_clamped(self):
        scene = SceneState(small_scenario())
        scene.apply_pointer(10_000, 10_000)
        assert scene.cursor == (scene.width - 1, scene.height - 1)

    def test_other_keys_ignored(self):
        scene = SceneState(small_scenario())
        assert scene.apply_key(True, ord("q")).empty


class TestMultiClientDamage:
    def test_each_client_accumulates_independently(self):
        scene = SceneState(small_scenario())
        fast = scene.register_client()
        slow = scene.register_client()
        scene.advance_ticks(3)
        _, fast_damage, _ = scene.claim_update(fast)
        scene.advance_ticks(4)
        _, slow_damage, _ = scene.claim_update(slow)
        _, fast_tail, _ = scene.claim_update(fast)
        # slow client's one region must cover everything fast saw in two
        combined = fast_damage.union(fast_tail)
        bitmap_slow = coverage_bitmap(slow_damage.rects, scene.width, scene.height)
        bitmap_fast = coverage_bitmap(combined.rects, scene.width, scene.height)
        assert bool(np.all(bitmap_slow >= bitmap_fast))


class TestScrollHints:
    def test_scroll_tick_yields_usable_hint(self):
        scenario = scenario_from_dict({
            "seed": 3, "width": 96, "height": 96,
            "steps": [
                {"kind": "open_app", "app": "browser", "seconds": 0.3},
                {"kind": "scroll", "dy": 4, "seconds": 0.5},
                {"kind": "end"},
            ],
        })
        scene = SceneState(scenario)
        cid = scene.register_client()
        scene.advance_to_tick(4)
        scene.claim_update(cid)  # sync the client
        scene.advance_ticks(1)   # one pure scroll tick
        _, damage, hint = scene.claim_update(cid)
        assert hint is not None
        assert hint.region == scene.renderer.page_rect
        assert hint.dy == 4

    def test_hint_withheld_when_client_lags(self):
        scenario = scenario_from_dict({
            "seed": 3, "width": 96, "height": 96,
            "steps": [
                {"kind": "open_app", "app": "browser", "seconds": 0.3},
                {"kind": "scroll", "dy": 4, "seconds": 0.5},
                {"kind": "end"},
            ],
        })
        scene = SceneState(scenario)
        cid = scene.register_client()
        scene.advance_to_tick(4)
        scene.advance_ticks(1)  # client never synced: two pending frames
        _, _, hint = scene.claim_update(cid)
        assert hint is None

    def test_scroll_shift_is_exact(self):
        # oracle: the renderer's claimed shift really is a pure copy
        scenario = scenario_from_dict({
            "seed": 3, "width": 96, "height": 96,
            "steps": [
                {"kind": "open_app", "app": "browser", "seconds": 0.3},
                {"kind": "scroll", "dy": 4, "seconds": 0.5},
                {"kind": "end"},
            ],
        })
        r = SceneRenderer(scenario)
        tick = 5
        shift = r.scroll_shift(tick)
        assert shift is not None
        page, dy = shift
        before, after = r.render(tick - 1), r.render(tick)
        assert np.array_equal(
            after[page.y : page.bottom - dy, page.x : page.right],
            before[page.y + dy : page.bottom, page.x : page.right],
        )
