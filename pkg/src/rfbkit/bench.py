"""Experiment driver: replay the scenario once per encoding through the
server -> relay -> headless client pipeline, collect session metrics, and
render the comparison table.

Virtual clock (default) makes runs deterministic: scene time advances only
with client requests, the link is left unthrottled, and duration is the
scenario's scripted length. Realtime mode uses the wall clock and applies the
configured link throttle, which is what makes updates-per-second meaningful.
"""

from __future__ import annotations

import io
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import wire
from .client import HeadlessClient
from .codecs import EncodingChoice, encoding_id
from .errors import RfbError
from .model import SessionMetrics
from .relay import LinkConfig, RelaySession, format_metrics_row, tap_metrics, METRICS_CSV_HEADER
from .scene import Scenario, SceneState, load_scenario
from .server import DisplayServer

DEFAULT_ENCODINGS = ("raw", "rre", "hextile", "zlib")

METRIC_ROWS = (
    "Updates",
    "Updates/second",
    "Rectangles received",
    "Data captured (MB)",
    "Data compressed (MB)",
    "Compression ratio",
)


@dataclass(frozen=True)
class BenchmarkPlan:
    scenario: str | Path
    seed: Optional[int] = None
    encodings: tuple[str, ...] = DEFAULT_ENCODINGS
    link: LinkConfig = field(default_factory=LinkConfig)
    repetitions: int = 1
    out_path: Optional[str] = None
    realtime: bool = False

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.encodings:
            raise ValueError("at least one encoding to test")
        for name in self.encodings:
            encoding_id(name)  # raises on unknown names


@dataclass
class RunResult:
    encoding: str
    repetition: int
    metrics: Optional[SessionMetrics]
    fidelity_ok: bool
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.fidelity_ok and self.error is None and self.metrics is not None


@dataclass
class Verdict:
    name: str
    passed: bool
    detail: str


@dataclass
class BenchmarkReport:
    plan: BenchmarkPlan
    scenario: Scenario
    rows: list[RunResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def results_for(self, encoding: str) -> list[RunResult]:
        return [r for r in self.rows if r.encoding == encoding and r.ok]

    def mean_metric(self, encoding: str, attr: str) -> Optional[float]:
        rows = self.results_for(encoding)
        if not rows:
            return None
        return sum(getattr(r.metrics, attr) for r in rows) / len(rows)


def _run_single(scenario: Scenario, seed: Optional[int], encoding: str, plan: BenchmarkPlan) -> RunResult:
    enc_id = encoding_id(encoding)
    scene = SceneState(scenario, seed=seed)
    server = DisplayServer(scene, clock="real" if plan.realtime else "virtual")
    up_server, up_relay = wire.duplex_pipe(timeout=60.0)
    down_relay, down_client = wire.duplex_pipe(timeout=60.0)
    link = plan.link if plan.realtime else LinkConfig()
    session = RelaySession(up_relay, down_relay, target=EncodingChoice(enc_id, strict=True), link=link)
    threads = [
        threading.Thread(target=server.serve_connection, args=(up_server,), daemon=True),
        threading.Thread(target=session.run, daemon=True),
    ]
    for t in threads:
        t.start()
    client = HeadlessClient(down_client, encodings=(enc_id,))
    try:
        client.connect()
        client.run_until_end()
    except RfbError as exc:
        client.close()
        return RunResult(encoding, 0, None, fidelity_ok=False, error=f"transport: {exc}")

    final = scene.snapshot()
    assert client.fb is not None
    diff = client.fb.first_difference(final)
    client.close()
    if diff is not None:
        return RunResult(
            encoding, 0, None, fidelity_ok=False,
            error=f"fidelity: first differing pixel at {diff}",
        )
    duration = scenario.duration_seconds if not plan.realtime else None
    metrics = tap_metrics(session.counters, duration=duration)
    metrics.check()
    return RunResult(encoding, 0, metrics, fidelity_ok=True)


def run_benchmark(plan: BenchmarkPlan) -> BenchmarkReport:
    scenario = load_scenario(plan.scenario)
    rows: list[RunResult] = []
    for encoding in plan.encodings:
        for rep in range(1, plan.repetitions + 1):
            result = _run_single(scenario, plan.seed, encoding, plan)
            result.repetition = rep
            rows.append(result)
    report = BenchmarkReport(plan, scenario, rows)
    if plan.out_path and report.ok:
        Path(plan.out_path).write_text(render_report(report, "csv"))
    return report


def render_report(report: BenchmarkReport, format: str = "text") -> str:
    if format == "csv":
        out = io.StringIO()
        out.write(METRICS_CSV_HEADER + "\n")
        for row in report.rows:
            if row.ok:
                out.write(format_metrics_row(row.encoding, row.metrics) + "\n")
        return out.getvalue()
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")

    encodings = list(dict.fromkeys(r.encoding for r in report.rows))
    cells: dict[str, dict[str, str]] = {}
    for enc in encodings:
        rows = report.results_for(enc)
        if not rows:
            cells[enc] = {label: "failed" for label in METRIC_ROWS}
            continue

        def mean(attr: str) -> float:
            return sum(getattr(r.metrics, attr) for r in rows) / len(rows)

        captured = mean("data_captured_bytes")
        compressed = mean("data_compressed_bytes")
        ratio = mean("compression_ratio")
        if compressed > 0 and abs(ratio - captured / compressed) > 0.005:
            raise ValueError(
                f"{enc}: stored ratio {ratio:.3f} inconsistent with "
                f"captured/compressed {captured / compressed:.3f}"
            )
        values = {
            "Updates": f"{mean('updates'):.0f}",
            "Updates/second": f"{mean('updates_per_second'):.2f}",
            "Rectangles received": f"{mean('rectangles_received'):.0f}",
            "Data captured (MB)": f"{captured / 1e6:.2f}",
            "Data compressed (MB)": f"{compressed / 1e6:.2f}",
            "Compression ratio": f"{ratio:.2f}",
        }
        cells[enc] = values

    label_w = max(len(label) for label in METRIC_ROWS)
    col_w = max(10, *(len(e) for e in encodings)) + 2
    lines = [" " * label_w + "".join(e.rjust(col_w) for e in encodings)]
    for label in METRIC_ROWS:
        lines.append(label.ljust(label_w) + "".join(cells[e][label].rjust(col_w) for e in encodings))
    failures = [r for r in report.rows if not r.ok]
    for r in failures:
        lines.append(f"FAILED {r.encoding} rep {r.repetition}: {r.error}")
    return "\n".join(lines) + "\n"


def compare_encodings(report: BenchmarkReport) -> list[Verdict]:
    """Pass/fail verdicts for the expected orderings."""
    encodings = list(dict.fromkeys(r.encoding for r in report.rows))
    if len(encodings) < 2:
        raise ValueError("need at least two encodings to compare")
    verdicts: list[Verdict] = []

    ratios = {e: report.mean_metric(e, "compression_ratio") for e in encodings}
    rates = {e: report.mean_metric(e, "updates_per_second") for e in encodings}

    if "raw" in ratios and ratios["raw"] is not None:
        passed = ratios["raw"] == 1.0
        verdicts.append(Verdict("raw ratio == 1.0", passed, f"raw ratio {ratios['raw']!r}"))

    ladder = [e for e in ("raw", "hextile", "zlib") if ratios.get(e) is not None]
    if len(ladder) >= 2:
        ordered = all(ratios[a] < ratios[b] for a, b in zip(ladder, ladder[1:]))
        detail = " < ".join(f"{e}={ratios[e]:.2f}" for e in ladder)
        verdicts.append(Verdict("ratio ordering " + " < ".join(ladder), ordered, detail))
        monotone = all(rates[a] <= rates[b] + 1e-9 for a, b in zip(ladder, ladder[1:]))
        rate_detail = " <= ".join(f"{e}={rates[e]:.2f}/s" for e in ladder)
        verdicts.append(Verdict("updates/s non-decreasing with ratio", monotone, rate_detail))

    return verdicts
