"""Command-line entry points: server, accel, bench, client, fixtures."""

from __future__ import annotations

import argparse
import hashlib
import json
import socket
import sys

from . import wire, ws
from .bench import BenchmarkPlan, compare_encodings, render_report, run_benchmark
from .client import HeadlessClient, ScheduledEvent
from .codecs import ENC_COPYRECT, ENC_RAW, EncodingChoice, encoding_id
from .fixtures import write_fixtures
from .relay import LinkConfig, RelayConfig, RelayServer
from .scene import SceneState, load_scenario
from .server import DisplayServer, TcpServer


def _parse_addr(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {value!r}")
    return host, int(port)


def _cmd_server(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    scene = SceneState(scenario, seed=args.seed)
    server = DisplayServer(scene, clock=args.clock, desktop_name=args.name)
    tcp = TcpServer(server, *args.listen)
    print(f"listening on {tcp.address[0]}:{tcp.address[1]}", flush=True)
    tcp.serve_forever()
    return 0


def _cmd_accel(args: argparse.Namespace) -> int:
    cfg = RelayConfig(
        upstream=args.upstream,
        listen=args.listen,
        ws_listen=args.ws_listen,
        target=EncodingChoice(encoding_id(args.encoding), strict=args.strict),
        link=LinkConfig(rate_bps=args.rate, burst_bytes=args.burst, latency_s=args.latency / 1000.0),
        metrics_path=args.metrics,
    )
    relay = RelayServer(cfg)
    relay.start()
    for kind, addr in relay.addresses.items():
        print(f"listening {kind} on {addr[0]}:{addr[1]}", flush=True)
    try:
        relay.serve_forever()
    finally:
        relay.close()
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    plan = BenchmarkPlan(
        scenario=args.scenario,
        seed=args.seed,
        encodings=tuple(e.strip() for e in args.encodings.split(",") if e.strip()),
        link=LinkConfig(rate_bps=args.rate, burst_bytes=args.burst, latency_s=args.latency / 1000.0),
        repetitions=args.reps,
        out_path=args.out,
        realtime=args.realtime,
    )
    report = run_benchmark(plan)
    print(render_report(report, "text"))
    ok = report.ok
    if len(set(plan.encodings)) >= 2:
        for verdict in compare_encodings(report):
            status = "PASS" if verdict.passed else "FAIL"
            print(f"{status} {verdict.name}: {verdict.detail}")
            ok = ok and verdict.passed
    if args.out and report.ok:
        print(f"wrote {args.out}")
    return 0 if ok else 1


def _load_events(path: str) -> list[ScheduledEvent]:
    events = []
    for entry in json.loads(open(path).read()):
        after = int(entry["after_update"])
        kind = entry["type"]
        if kind in ("key", "key_up"):
            keysym = entry["keysym"]
            if isinstance(keysym, str):
                keysym = ord(keysym)
            msg = wire.KeyEvent(kind == "key", int(keysym))
        elif kind == "pointer":
            msg = wire.PointerEvent(int(entry.get("buttons", 0)), int(entry["x"]), int(entry["y"]))
        else:
            raise ValueError(f"unknown event type {kind!r}")
        events.append(ScheduledEvent(after, msg))
    return events


def _cmd_client(args: argparse.Namespace) -> int:
    sock = socket.create_connection(args.connect, timeout=30)
    conn: wire.Connection = wire.SocketConnection(sock)
    if args.ws:
        conn = ws.connect_websocket(conn, host=args.connect[0])
    prefs = [encoding_id(args.encoding)]
    if ENC_COPYRECT not in prefs and args.copyrect:
        prefs.insert(0, ENC_COPYRECT)
    if ENC_RAW not in prefs:
        prefs.append(ENC_RAW)
    client = HeadlessClient(conn, encodings=prefs)
    client.connect()
    events = _load_events(args.events) if args.events else []
    updates = client.run_until_end(events=events, max_updates=args.max_updates)
    fb = client.fb
    assert fb is not None
    data = fb.to_bytes()
    if args.dump_fb:
        with open(args.dump_fb, "wb") as fh:
            fh.write(data)
    print(json.dumps({
        "updates": updates,
        "width": fb.width,
        "height": fb.height,
        "bytes": len(data),
        "sha256": hashlib.sha256(data).hexdigest(),
        "rects": client.counters.rectangles,
        "payload_bytes": client.counters.payload_bytes,
    }), flush=True)
    client.close()
    return 0


def _cmd_fixtures(args: argparse.Namespace) -> int:
    data = write_fixtures(args.out, seed=args.seed, cases_per_encoding=args.cases)
    sizes = {k: len(v) for k, v in data.items() if isinstance(v, list)}
    print(f"wrote {args.out}: {sizes}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfbkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("server", help="serve the synthetic desktop over RFB")
    p.add_argument("--listen", type=_parse_addr, default=("127.0.0.1", 5900))
    p.add_argument("--scenario", default="reference")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--clock", choices=("real", "virtual"), default="real")
    p.add_argument("--name", default="rfbkit")
    p.set_defaults(func=_cmd_server)

    p = sub.add_parser("accel", help="relay, re-encode and throttle a server")
    p.add_argument("--upstream", type=_parse_addr, required=True)
    p.add_argument("--listen", type=_parse_addr, default=None)
    p.add_argument("--ws-listen", type=_parse_addr, default=None, dest="ws_listen")
    p.add_argument("--encoding", choices=("raw", "rre", "hextile", "zlib"), default="zlib")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--rate", type=float, default=0.0, help="bits/second, 0 = unlimited")
    p.add_argument("--burst", type=int, default=65536, help="bytes")
    p.add_argument("--latency", type=float, default=0.0, help="milliseconds one-way")
    p.add_argument("--metrics", default=None, help="CSV path, one row per session")
    p.set_defaults(func=_cmd_accel)

    p = sub.add_parser("bench", help="run the scenario per encoding and compare")
    p.add_argument("--scenario", default="reference")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--encodings", default="raw,rre,hextile,zlib")
    p.add_argument("--rate", type=float, default=8_000_000.0, help="bits/second (realtime mode)")
    p.add_argument("--burst", type=int, default=65536)
    p.add_argument("--latency", type=float, default=40.0, help="milliseconds one-way")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV path")
    p.add_argument("--realtime", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("client", help="headless viewer: replay events, dump the framebuffer")
    p.add_argument("--connect", type=_parse_addr, required=True)
    p.add_argument("--ws", action="store_true", help="connect through a WebSocket bridge")
    p.add_argument("--encoding", default="raw")
    p.add_argument("--no-copyrect", dest="copyrect", action="store_false")
    p.add_argument("--events", default=None, help="JSON event schedule")
    p.add_argument("--dump-fb", default=None, dest="dump_fb")
    p.add_argument("--max-updates", type=int, default=100_000, dest="max_updates")
    p.set_defaults(func=_cmd_client)

    p = sub.add_parser("fixtures", help="export golden codec byte-vectors as JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0x5EED)
    p.add_argument("--cases", type=int, default=24)
    p.set_defaults(func=_cmd_fixtures)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
