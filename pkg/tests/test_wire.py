import threading

import numpy as np
import pytest

from rfbkit import wire
from rfbkit.codecs import ENC_COPYRECT, ENC_RAW, ENC_ZLIB, ZlibStream, encode_copyrect, encode_raw, encode_zlib
from rfbkit.errors import HandshakeError, ProtocolError, TransportError
from rfbkit.model import Framebuffer, PixelFormat, Rect, RectUpdate

from conftest import random_fb


def handshake_pair(name="deskzero", width=1024, height=768, shared=True):
    a, b = wire.duplex_pipe(timeout=5.0)
    results = {}

    def server():
        results["server"] = wire.server_handshake(
            a, width=width, height=height, format=PixelFormat(), name=name
        )

    t = threading.Thread(target=server, daemon=True)
    t.start()
    results["client"] = wire.client_handshake(b, shared=shared)
    t.join(timeout=5)
    return a, b, results


class TestHandshake:
    def test_version_string_bytes(self):
        assert wire.PROTOCOL_VERSION == b"RFB 003.008\n"

    def test_loopback_agrees_on_all_fields(self):
        _, _, results = handshake_pair()
        server, client = results["server"], results["client"]
        assert server == client
        assert client.negotiated_version == "RFB 003.008"
        assert client.security == "None"
        assert (client.fb_width, client.fb_height) == (1024, 768)
        assert client.desktop_name == "deskzero"

    def test_rejects_old_client_version(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        b.write(b"RFB 003.003\n")
        with pytest.raises(HandshakeError):
            wire.server_handshake(a, width=4, height=4, format=PixelFormat(), name="x")

    def test_rejects_old_server_version(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        a.write(b"RFB 003.003\n")
        with pytest.raises(HandshakeError):
            wire.client_handshake(b)

    def test_server_init_is_24_bytes_plus_name(self):
        # width/height + 16-byte format + name length + 8-char name
        payload = wire._server_init_bytes(1024, 768, PixelFormat(), "deskzero")
        assert len(payload) == 24 + 8

    def test_shared_flag_encoded_as_single_byte(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        captured = wire.LoggingConnection(b)

        def server():
            wire.server_handshake(a, width=4, height=4, format=PixelFormat(), name="x")

        t = threading.Thread(target=server, daemon=True)
        t.start()
        wire.client_handshake(captured, shared=True)
        t.join(timeout=5)
        # client writes: version (12) + security choice (1) + ClientInit shared flag
        assert captured.write_log[:12] == wire.PROTOCOL_VERSION
        assert captured.write_log[12] == wire.SECURITY_NONE
        assert captured.write_log[13] == 1

    def test_truncated_server_init(self):
        a, b = wire.duplex_pipe(timeout=0.2)
        a.write(wire.PROTOCOL_VERSION)
        a.write(bytes([1, 1]))

        def feed():
            a.read_exact(12)
            a.read_exact(1)
            a.write((0).to_bytes(4, "big"))
            a.read_exact(1)
            a.write(b"\x04\x00")  # ServerInit cut short
            a.close()

        t = threading.Thread(target=feed, daemon=True)
        t.start()
        with pytest.raises(TransportError):
            wire.client_handshake(b)
        t.join(timeout=5)


class TestClientMessages:
    def roundtrip(self, msg):
        a, b = wire.duplex_pipe(timeout=2.0)
        wire.write_client_message(a, msg)
        return wire.read_client_message(b)

    def test_key_event_layout(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        a.write(bytes.fromhex("040100000000FF0D"))
        msg = wire.read_client_message(b)
        assert msg == wire.KeyEvent(down=True, keysym=0xFF0D)

    def test_pointer_event_layout(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        a.write(bytes.fromhex("050100100020"))
        msg = wire.read_client_message(b)
        assert msg == wire.PointerEvent(buttons=1, x=16, y=32)

    def test_update_request_layout(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        a.write(bytes.fromhex("03010000000004000300"))
        msg = wire.read_client_message(b)
        assert msg == wire.FramebufferUpdateRequest(True, Rect(0, 0, 1024, 768))

    def test_all_message_kinds_roundtrip(self):
        messages = [
            wire.SetPixelFormat(PixelFormat(16, 16, True, True, 31, 63, 31, 11, 5, 0)),
            wire.SetEncodings((6, 5, 1, 0, -239)),
            wire.FramebufferUpdateRequest(False, Rect(1, 2, 30, 40)),
            wire.KeyEvent(False, ord("n")),
            wire.PointerEvent(0, 630, 470),
            wire.ClientCutText("hello"),
        ]
        for msg in messages:
            assert self.roundtrip(msg) == msg

    def test_unknown_type_consumes_only_type_byte(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        a.write(bytes([9]) + bytes.fromhex("050100100020"))
        with pytest.raises(ProtocolError):
            wire.read_client_message(b)
        # the following message is still intact on the stream
        assert wire.read_client_message(b) == wire.PointerEvent(buttons=1, x=16, y=32)


class TestUpdates:
    def test_empty_update_is_four_bytes(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        assert wire.write_update(a, []) == 4
        fb = Framebuffer(4, 4)
        assert wire.read_update(b, fb, None) == []

    def test_single_raw_1x1_update_is_20_bytes(self, rng):
        a, b = wire.duplex_pipe(timeout=2.0)
        src = random_fb(rng, 1, 1)
        update = RectUpdate(Rect(0, 0, 1, 1), ENC_RAW, encode_raw(src, Rect(0, 0, 1, 1)))
        assert wire.write_update(a, [update]) == 4 + 12 + 4

    def test_two_rects_concatenate_in_order(self, rng):
        a, b = wire.duplex_pipe(timeout=2.0)
        src = random_fb(rng, 8, 4)
        updates = [
            RectUpdate(Rect(0, 0, 4, 4), ENC_RAW, encode_raw(src, Rect(0, 0, 4, 4))),
            RectUpdate(Rect(4, 0, 4, 4), ENC_RAW, encode_raw(src, Rect(4, 0, 4, 4))),
        ]
        wire.write_update(a, updates)
        dst = Framebuffer(8, 4)
        received = wire.read_update(b, dst, None)
        assert [u.rect for u in received] == [u.rect for u in updates]
        assert np.array_equal(dst.pixels, src.pixels)

    def test_raw_plus_copyrect_apply_in_order(self, rng):
        a, b = wire.duplex_pipe(timeout=2.0)
        src = random_fb(rng, 16, 8)
        updates = [
            RectUpdate(Rect(0, 0, 8, 8), ENC_RAW, encode_raw(src, Rect(0, 0, 8, 8))),
            RectUpdate(Rect(8, 0, 8, 8), ENC_COPYRECT, encode_copyrect(0, 0)),
        ]
        wire.write_update(a, updates)
        dst = Framebuffer(16, 8)
        wire.read_update(b, dst, None)
        assert np.array_equal(dst.pixels[:, 8:], src.pixels[:, :8])

    def test_zlib_rect_decodes_with_connection_stream(self, rng):
        a, b = wire.duplex_pipe(timeout=2.0)
        src = random_fb(rng, 24, 16, palette=5)
        enc = ZlibStream()
        rect = Rect(2, 2, 20, 12)
        wire.write_update(a, [RectUpdate(rect, ENC_ZLIB, encode_zlib(src, rect, enc))])
        dst = Framebuffer(24, 16)
        received = wire.read_update(b, dst, ZlibStream())
        assert np.array_equal(dst.region(rect), src.region(rect))
        assert received[0].encoding_id == ENC_ZLIB

    def test_unknown_encoding_id_is_protocol_error(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        a.write(bytes.fromhex("000000010000000000010001") + (7).to_bytes(4, "big", signed=True))
        with pytest.raises(ProtocolError):
            wire.read_update(b, Framebuffer(4, 4), None)

    def test_bell_and_cut_text_are_skipped(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        wire.write_bell(a)
        a.write(bytes([3, 0, 0, 0]) + (2).to_bytes(4, "big") + b"hi")
        wire.write_update(a, [])
        assert wire.read_update(b, Framebuffer(4, 4), None) == []


class TestPrefixSafety:
    def build_client_stream(self):
        a, b = wire.duplex_pipe(timeout=2.0)
        log = wire.LoggingConnection(a)
        messages = [
            wire.SetEncodings((6, 0)),
            wire.FramebufferUpdateRequest(False, Rect(0, 0, 64, 48)),
            wire.KeyEvent(True, 0x20),
            wire.PointerEvent(1, 5, 6),
            wire.FramebufferUpdateRequest(True, Rect(0, 0, 64, 48)),
            wire.ClientCutText("zz"),
        ]
        for m in messages:
            wire.write_client_message(log, m)
        return bytes(log.write_log), messages

    def test_truncations_never_misparse(self):
        stream, messages = self.build_client_stream()
        for cut in range(len(stream)):
            a, b = wire.duplex_pipe(timeout=0.05)
            a.write(stream[:cut])
            a.close()
            parsed = []
            try:
                while True:
                    parsed.append(wire.read_client_message(b))
            except TransportError:
                pass
            assert parsed == messages[: len(parsed)]  # always a strict prefix, never wrong
