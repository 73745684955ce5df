import threading

import pytest

from rfbkit import wire, ws
from rfbkit.client import HeadlessClient
from rfbkit.codecs import ENC_HEXTILE, ENC_RAW, EncodingChoice
from rfbkit.errors import HandshakeError, TransportError
from rfbkit.relay import RelaySession
from rfbkit.scene import SceneState, scenario_from_dict
from rfbkit.server import DisplayServer


def ws_pair():
    """Upgraded server and client endpoints over an in-memory pipe."""
    a, b = wire.duplex_pipe(timeout=5.0)
    result = {}

    def accept():
        result["server"] = ws.accept_websocket(a)

    t = threading.Thread(target=accept, daemon=True)
    t.start()
    client = ws.connect_websocket(b, host="test")
    t.join(timeout=5)
    return result["server"], client


class TestFrames:
    def test_binary_roundtrip_both_directions(self):
        server, client = ws_pair()
        client.write(b"ping-bytes")
        assert server.read_exact(10) == b"ping-bytes"
        server.write(b"\x00\x01\x02")
        assert client.read_exact(3) == b"\x00\x01\x02"

    def test_reads_span_message_boundaries(self):
        server, client = ws_pair()
        client.write(b"abc")
        client.write(b"defgh")
        assert server.read_exact(8) == b"abcdefgh"

    def test_large_frame_uses_64bit_length(self):
        server, client = ws_pair()
        blob = bytes(range(256)) * 300  # 76 800 bytes -> 16-bit path
        big = blob * 2  # 153 600 bytes -> still 16-bit? no: > 65535 -> 64-bit
        client.write(big)
        assert server.read_exact(len(big)) == big

    def test_ping_answered_with_pong(self):
        server, client = ws_pair()
        # hand-craft a masked ping from the client side
        payload = b"hb"
        key = b"\x01\x02\x03\x04"
        masked = bytes(c ^ key[i % 4] for i, c in enumerate(payload))
        client._inner.write(bytes([0x89, 0x80 | len(payload)]) + key + masked)
        client.write(b"after-ping")
        assert server.read_exact(10) == b"after-ping"  # ping consumed transparently
        frame = client._inner.read_exact(2)
        assert frame[0] == 0x8A and frame[1] == len(payload)
        assert client._inner.read_exact(len(payload)) == payload

    def test_fragmented_message_reassembles(self):
        server, client = ws_pair()
        key = bytes(4)
        client._inner.write(bytes([0x02, 0x80 | 3]) + key + b"abc")   # binary, no FIN
        client._inner.write(bytes([0x80, 0x80 | 2]) + key + b"de")    # continuation + FIN
        assert server.read_exact(5) == b"abcde"

    def test_close_frame_raises_transport_error(self):
        server, client = ws_pair()
        client.close()
        with pytest.raises(TransportError):
            server.read_exact(1)

    def test_bad_upgrade_request_rejected(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        b.write(b"POST / HTTP/1.1\r\nHost: x\r\n\r\n")
        with pytest.raises(HandshakeError):
            ws.accept_websocket(a)


class TestBridgedSession:
    def test_rfb_session_through_websocket_bridge(self):
        scenario = scenario_from_dict({
            "seed": 3, "width": 96, "height": 80,
            "steps": [
                {"kind": "home", "seconds": 0.2},
                {"kind": "open_app", "app": "music_player", "seconds": 0.4},
                {"kind": "end"},
            ],
        })
        scene = SceneState(scenario)
        server = DisplayServer(scene, clock="virtual")
        up_server, up_relay = wire.duplex_pipe(timeout=10.0)
        down_relay_raw, down_client_raw = wire.duplex_pipe(timeout=10.0)
        threading.Thread(target=server.serve_connection, args=(up_server,), daemon=True).start()

        bridge = {}

        def relay_run():
            bridge["down"] = ws.accept_websocket(down_relay_raw)
            RelaySession(
                up_relay, bridge["down"], target=EncodingChoice(ENC_HEXTILE, strict=True)
            ).run()

        threading.Thread(target=relay_run, daemon=True).start()
        client_ws = ws.connect_websocket(down_client_raw, host="bridge")
        client = HeadlessClient(client_ws, encodings=(ENC_HEXTILE, ENC_RAW))
        client.connect()
        client.run_until_end()
        assert client.fb.same_content(scene.snapshot())
        client.close()
