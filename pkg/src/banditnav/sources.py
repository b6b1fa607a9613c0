"""Interchangeable score sources: synthetic field, recorded trace replay, live bridge.

Every source produces one ScoreSample per sensing step; the episode harness
turns samples into fused observations. Bridge and replay failures surface as
distinct exception types so an episode can report a sensor failure precisely.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass

import numpy as np

from .grid import FovSpec, Pose, VisibleCell
from .sensor import ScoreSample, SemanticField, sample_scores, view_relevance


@dataclass(frozen=True)
class ViewQuery:
    """Everything a score source may need about the current sensing step."""

    visible: list[VisibleCell]
    fov: FovSpec
    pose: Pose
    step: int
    episode: int = 0


class SensorFailure(Exception):
    """A score source could not produce a sample; the episode must abort."""


class BridgeTransportError(SensorFailure):
    """The bridge endpoint is unreachable or the connection dropped."""


class BridgeProtocolError(SensorFailure):
    """The bridge endpoint answered with something other than a valid response."""


class ScoreCountError(SensorFailure):
    """The bridge returned a different number of scores than prompts sent."""


class ScoreRangeError(SensorFailure):
    """The bridge returned a score outside [-1, 1]."""


class TraceParseError(SensorFailure):
    """A trace line could not be decoded; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"trace line {line_number}: {message}")
        self.line_number = line_number


class TraceExhaustedError(SensorFailure):
    """The trace has no more recorded samples."""


@dataclass
class SyntheticSource:
    """Scores a view against a ground-truth relevance field under Gaussian noise."""

    field: SemanticField
    ensemble_size: int
    noise_sigma: float
    rng: np.random.Generator
    prompt_biases: tuple[float, ...] | None = None
    convention: str = "vlfm"

    def sample(self, view: ViewQuery) -> ScoreSample:
        relevance = view_relevance(self.field, view.visible, view.fov, self.convention)
        return sample_scores(
            relevance, self.ensemble_size, self.noise_sigma, self.rng, self.prompt_biases
        )


def write_trace(path, samples) -> None:
    """Record score samples as one JSON line per step for later replay."""
    with open(path, "w", encoding="utf-8") as fh:
        for step, sample in enumerate(samples):
            fh.write(json.dumps({"step": step, "scores": list(sample.scores)}) + "\n")


class TraceReplay:
    """Replays recorded score samples in order.

    The whole trace is validated on open; malformed lines raise
    TraceParseError naming the offending line. Reading past the end raises
    TraceExhaustedError.
    """

    def __init__(self, path):
        self._samples: list[ScoreSample] = []
        self._cursor = 0
        with open(path, "r", encoding="utf-8") as fh:
            for line_number, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise TraceParseError(line_number, f"invalid JSON ({exc.msg})") from exc
                if not isinstance(record, dict) or "scores" not in record:
                    raise TraceParseError(line_number, "record has no 'scores' field")
                scores = record["scores"]
                if not isinstance(scores, list) or not all(
                    isinstance(s, (int, float)) for s in scores
                ):
                    raise TraceParseError(line_number, "'scores' is not a list of numbers")
                try:
                    self._samples.append(ScoreSample(scores=tuple(float(s) for s in scores)))
                except ValueError as exc:
                    raise TraceParseError(line_number, str(exc)) from exc

    def __len__(self) -> int:
        return len(self._samples)

    @property
    def remaining(self) -> int:
        return len(self._samples) - self._cursor

    def next_sample(self) -> ScoreSample:
        if self._cursor >= len(self._samples):
            raise TraceExhaustedError(
                f"trace exhausted after {len(self._samples)} recorded samples"
            )
        sample = self._samples[self._cursor]
        self._cursor += 1
        return sample

    def sample(self, view: ViewQuery) -> ScoreSample:
        return self.next_sample()


class LineTransport:
    """Newline-delimited UTF-8 record exchange over a reader/writer pair."""

    def __init__(self, reader, writer):
        self._reader = reader
        self._writer = writer

    def send_line(self, line: str) -> None:
        try:
            self._writer.write(line + "\n")
            self._writer.flush()
        except OSError as exc:
            raise BridgeTransportError(f"send failed: {exc}") from exc

    def recv_line(self) -> str:
        try:
            line = self._reader.readline()
        except OSError as exc:
            raise BridgeTransportError(f"receive failed: {exc}") from exc
        if not line:
            raise BridgeTransportError("connection closed by endpoint")
        return line.rstrip("\n")

    def close(self) -> None:
        for stream in (self._reader, self._writer):
            try:
                stream.close()
            except OSError:
                pass


class TcpLineTransport(LineTransport):
    """Line transport over a TCP connection to ``host:port``."""

    def __init__(self, address: str, timeout: float = 30.0):
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bridge address must be host:port, got {address!r}")
        try:
            sock = socket.create_connection((host, int(port)), timeout=timeout)
        except OSError as exc:
            raise BridgeTransportError(f"cannot connect to {address}: {exc}") from exc
        self._sock = sock
        super().__init__(
            sock.makefile("r", encoding="utf-8", newline="\n"),
            sock.makefile("w", encoding="utf-8", newline="\n"),
        )

    def close(self) -> None:
        super().close()
        try:
            self._sock.close()
        except OSError:
            pass


class BridgeClient:
    """Client side of the bridge wire protocol; one request in flight at a time.

    Request:  ``{"id": n, "target": str, "prompts": [...],
    "view": {"pose": [x, y, heading], "episode": n, "step": n,
    "image_path": str?}}``
    Response: ``{"id": n, "scores": [...]}`` with the same id.
    """

    def __init__(self, transport: LineTransport):
        self._transport = transport
        self._next_id = 0

    def score_view(
        self,
        target: str,
        prompts: list[str],
        pose: Pose,
        episode: int,
        step: int,
        image_path: str | None = None,
    ) -> ScoreSample:
        if not prompts:
            raise ValueError("cannot score a view with no prompts")
        request_id = self._next_id
        self._next_id += 1
        view: dict = {
            "pose": [pose.position[0], pose.position[1], pose.heading],
            "episode": episode,
            "step": step,
        }
        if image_path is not None:
            view["image_path"] = image_path
        request = {"id": request_id, "target": target, "prompts": prompts, "view": view}
        self._transport.send_line(json.dumps(request))
        reply = self._transport.recv_line()

        try:
            response = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise BridgeProtocolError(f"response is not valid JSON: {reply!r}") from exc
        if not isinstance(response, dict):
            raise BridgeProtocolError(f"response is not an object: {reply!r}")
        if response.get("id") != request_id:
            raise BridgeProtocolError(
                f"response id {response.get('id')} does not match request id {request_id}"
            )
        if "error" in response:
            raise BridgeProtocolError(f"endpoint error: {response['error']}")
        scores = response.get("scores")
        if not isinstance(scores, list) or not all(isinstance(s, (int, float)) for s in scores):
            raise BridgeProtocolError("response has no numeric 'scores' list")
        if len(scores) != len(prompts):
            raise ScoreCountError(
                f"endpoint returned {len(scores)} scores for {len(prompts)} prompts"
            )
        for s in scores:
            if not -1.0 <= s <= 1.0:
                raise ScoreRangeError(f"endpoint score {s} outside [-1, 1]")
        return ScoreSample(scores=tuple(float(s) for s in scores))

    def close(self) -> None:
        self._transport.close()


def observe_bridge(
    client: BridgeClient,
    target: str,
    prompts: list[str],
    pose: Pose,
    episode: int = 0,
    step: int = 0,
    image_path: str | None = None,
) -> ScoreSample:
    """Request one scored view from a live endpoint; validates count and range."""
    return client.score_view(target, prompts, pose, episode, step, image_path)


@dataclass
class BridgeSource:
    """Adapts a BridgeClient to the per-step sampling interface."""

    client: BridgeClient
    target: str
    prompts: list[str]

    def sample(self, view: ViewQuery) -> ScoreSample:
        return self.client.score_view(
            self.target, self.prompts, view.pose, view.episode, view.step
        )
