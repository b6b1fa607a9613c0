from __future__ import annotations

import json
import socket
import threading

import pytest

from banditnav import (
    BridgeClient,
    BridgeProtocolError,
    BridgeTransportError,
    Pose,
    ScoreCountError,
    ScoreRangeError,
    ScoreSample,
    TcpLineTransport,
    TraceExhaustedError,
    TraceParseError,
    TraceReplay,
    observe_bridge,
    write_trace,
)
from banditnav.sources import LineTransport


class TestTraceReplay:
    def test_roundtrip_identity(self, tmp_path):
        samples = [
            ScoreSample(scores=(0.1, 0.2)),
            ScoreSample(scores=(-0.5, 1.0)),
            ScoreSample(scores=(0.0, 0.0)),
        ]
        path = tmp_path / "run.trace"
        write_trace(path, samples)
        replay = TraceReplay(path)
        assert [replay.next_sample() for _ in range(3)] == samples

    def test_exhaustion_after_recorded_length(self, tmp_path):
        path = tmp_path / "run.trace"
        write_trace(path, [ScoreSample(scores=(0.1,))] * 3)
        replay = TraceReplay(path)
        assert len(replay) == 3
        for _ in range(3):
            replay.next_sample()
        with pytest.raises(TraceExhaustedError):
            replay.next_sample()

    def test_corrupted_line_names_line_number(self, tmp_path):
        path = tmp_path / "bad.trace"
        path.write_text(
            '{"step": 0, "scores": [0.1]}\nnot json at all\n{"step": 2, "scores": [0.3]}\n'
        )
        with pytest.raises(TraceParseError) as err:
            TraceReplay(path)
        assert err.value.line_number == 2
        assert "line 2" in str(err.value)

    def test_score_out_of_range_is_a_parse_error(self, tmp_path):
        path = tmp_path / "bad.trace"
        path.write_text('{"step": 0, "scores": [2.0]}\n')
        with pytest.raises(TraceParseError):
            TraceReplay(path)


class FakeTransport(LineTransport):
    """In-process endpoint: captures requests, serves scripted responses."""

    def __init__(self, responses):
        self.requests: list[dict] = []
        self._responses = list(responses)

    def send_line(self, line: str) -> None:
        self.requests.append(json.loads(line))

    def recv_line(self) -> str:
        if not self._responses:
            raise BridgeTransportError("connection closed by endpoint")
        reply = self._responses.pop(0)
        if callable(reply):
            reply = reply(self.requests[-1])
        return reply if isinstance(reply, str) else json.dumps(reply)

    def close(self) -> None:
        pass


def echo_scores(scores):
    return lambda request: {"id": request["id"], "scores": scores}


PROMPTS = ["a cup", "the cup", "cup nearby"]
POSE = Pose((1.0, 2.0), 0.5)


class TestBridgeClient:
    def test_echo_fixture_roundtrip(self):
        transport = FakeTransport([echo_scores([0.1, 0.2, 0.3])])
        client = BridgeClient(transport)
        sample = observe_bridge(client, "cup", PROMPTS, POSE, episode=4, step=9)
        assert sample == ScoreSample(scores=(0.1, 0.2, 0.3))
        request = transport.requests[0]
        assert request["target"] == "cup"
        assert request["prompts"] == PROMPTS
        assert request["view"]["pose"] == [1.0, 2.0, 0.5]
        assert request["view"]["episode"] == 4
        assert request["view"]["step"] == 9

    def test_count_violation(self):
        client = BridgeClient(FakeTransport([echo_scores([0.1, 0.2])]))
        with pytest.raises(ScoreCountError):
            client.score_view("cup", PROMPTS, POSE, 0, 0)

    def test_range_violation(self):
        client = BridgeClient(FakeTransport([echo_scores([0.1, 0.2, 1.5])]))
        with pytest.raises(ScoreRangeError):
            client.score_view("cup", PROMPTS, POSE, 0, 0)

    def test_malformed_response(self):
        client = BridgeClient(FakeTransport(["this is not json"]))
        with pytest.raises(BridgeProtocolError):
            client.score_view("cup", PROMPTS, POSE, 0, 0)

    def test_id_mismatch(self):
        client = BridgeClient(FakeTransport([{"id": 999, "scores": [0.1, 0.2, 0.3]}]))
        with pytest.raises(BridgeProtocolError):
            client.score_view("cup", PROMPTS, POSE, 0, 0)

    def test_error_record_from_endpoint(self):
        client = BridgeClient(
            FakeTransport([lambda req: {"id": req["id"], "error": "image unreadable"}])
        )
        with pytest.raises(BridgeProtocolError, match="image unreadable"):
            client.score_view("cup", PROMPTS, POSE, 0, 0)

    def test_transport_failure(self):
        client = BridgeClient(FakeTransport([]))
        with pytest.raises(BridgeTransportError):
            client.score_view("cup", PROMPTS, POSE, 0, 0)

    def test_ids_increment_per_request(self):
        transport = FakeTransport(
            [echo_scores([0.0, 0.0, 0.0]), echo_scores([0.0, 0.0, 0.0])]
        )
        client = BridgeClient(transport)
        client.score_view("cup", PROMPTS, POSE, 0, 0)
        client.score_view("cup", PROMPTS, POSE, 0, 1)
        assert [r["id"] for r in transport.requests] == [0, 1]

    def test_no_prompts_is_an_error(self):
        client = BridgeClient(FakeTransport([]))
        with pytest.raises(ValueError):
            client.score_view("cup", [], POSE, 0, 0)


def _loopback_echo_server() -> tuple[socket.socket, int]:
    """Tiny TCP endpoint echoing fixed scores, for transport-level coverage."""
    server = socket.create_server(("127.0.0.1", 0))
    port = server.getsockname()[1]

    def serve():
        conn, _ = server.accept()
        with conn, conn.makefile("r") as reader, conn.makefile("w") as writer:
            for line in reader:
                request = json.loads(line)
                response = {"id": request["id"], "scores": [0.25] * len(request["prompts"])}
                writer.write(json.dumps(response) + "\n")
                writer.flush()

    threading.Thread(target=serve, daemon=True).start()
    return server, port


class TestTcpTransport:
    def test_roundtrip_over_loopback(self):
        server, port = _loopback_echo_server()
        try:
            client = BridgeClient(TcpLineTransport(f"127.0.0.1:{port}"))
            sample = client.score_view("cup", PROMPTS, POSE, 0, 0)
            assert sample == ScoreSample(scores=(0.25, 0.25, 0.25))
            client.close()
        finally:
            server.close()

    def test_unreachable_endpoint(self):
        with pytest.raises(BridgeTransportError):
            TcpLineTransport("127.0.0.1:1", timeout=0.2)

    def test_bad_address_format(self):
        with pytest.raises(ValueError):
            TcpLineTransport("nonsense")
