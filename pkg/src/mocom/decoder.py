"""Streaming decoder: filter events, buffer frames, segment, classify,
assemble the symbol sequence, and extract the message.

Frames accumulate in a decoder state; once more than `trigger_frames`
unconsumed frames are buffered, the whole buffer is re-segmented and each
newly completed segment is classified. Segments ending too close to the
buffer's trailing edge are deferred (they may still be growing); a final
flush classifies them once the stream ends. Non-background labels append
to the code sequence; an `end` label completes it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import codec
from .codec import CodecError, Message, Symbol
from .events import DEFAULT_WINDOW_MS, EventStream, FrameSeries, frame_by_count, frame_by_time
from .segmentation import MotionSegment, SegConfig, segment as segment_frames
from .snn.network import Network
from .snn.train import normalize_batch

TRIGGER_FRAMES = 100


@dataclass(frozen=True)
class NoiseFilterConfig:
    neighborhood: int = 1  # pixels each side, 1 -> 3x3
    time_window_us: int = 5000
    min_support: int = 1

    def __post_init__(self):
        if self.neighborhood < 0:
            raise ValueError("neighborhood must be >= 0")
        if self.time_window_us <= 0:
            raise ValueError("time_window_us must be positive")
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")


def noise_filter(stream: EventStream, cfg: NoiseFilterConfig = NoiseFilterConfig()) -> EventStream:
    """Keep events with enough neighbours inside a space-time window.

    Support is symmetric in time (|t - t'| <= window, the event itself
    excluded), which makes the filter idempotent at min_support=1:
    support is mutual, so every supporter survives as well.
    """
    n = len(stream)
    if n == 0:
        return stream
    width, height = stream.resolution
    t = stream.t
    x = stream.x.astype(np.int64)
    y = stream.y.astype(np.int64)
    # composite key (pixel, time) so one sorted array serves every pixel
    t_span = int(t[-1]) + 1
    key = (y * width + x) * t_span + t
    order = np.argsort(key, kind="stable")
    sorted_keys = key[order]

    support = np.zeros(n, dtype=np.int64)
    w = cfg.time_window_us
    r = cfg.neighborhood
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            nx = x + dx
            ny = y + dy
            valid = (nx >= 0) & (nx < width) & (ny >= 0) & (ny < height)
            base = (ny * width + nx) * t_span
            lo = np.searchsorted(sorted_keys, base + np.maximum(t - w, 0), side="left")
            hi = np.searchsorted(sorted_keys, base + np.minimum(t + w, t_span - 1),
                                 side="right")
            counts = hi - lo
            if dx == 0 and dy == 0:
                counts = counts - 1  # exclude the event itself
            support += np.where(valid, counts, 0)
    keep = support >= cfg.min_support
    return EventStream(
        stream.resolution, t[keep], stream.x[keep], stream.y[keep], stream.p[keep],
        _sorted=True,
    )


class DecoderStatus(Enum):
    COLLECTING = "collecting"
    DECODED = "decoded"
    FAILED = "failed"


@dataclass
class DecoderState:
    frames: FrameSeries
    consumed_until: int = -1  # last frame index already classified
    c_seq: list[Symbol] = field(default_factory=list)
    segments: list[MotionSegment] = field(default_factory=list)
    status: DecoderStatus = DecoderStatus.COLLECTING

    @classmethod
    def fresh(cls, window_ms: float = DEFAULT_WINDOW_MS) -> "DecoderState":
        return cls(frames=FrameSeries(window_ms, [], []))


class SegmentClassifier:
    """Classifies a frame interval of the filtered stream with the network."""

    def __init__(self, network: Network, stream: EventStream, window_ms: float):
        self.network = network
        self.stream = stream
        self.window_us = window_ms * 1000.0
        self.t0 = int(stream.t[0]) if len(stream) else 0
        spec = network.spec
        self.class_names = _default_class_names(spec.classes)

    def classify(self, seg: MotionSegment) -> Symbol:
        t_lo = self.t0 + int(seg.start_frame * self.window_us)
        t_hi = self.t0 + int((seg.end_frame + 1) * self.window_us)
        events = self.stream.slice_time(t_lo, t_hi)
        spec = self.network.spec
        tensor = frame_by_count(events, spec.time_steps, *spec.input_hw)
        x = normalize_batch(tensor[None], dtype=self.network.dtype)
        scores = self.network.forward(x, train=False)
        return Symbol(self.class_names[int(scores.argmax())])


def _default_class_names(n_classes: int) -> tuple[str, ...]:
    names = ("start", "end", "one", "zero", "background")
    if n_classes != len(names):
        raise ValueError(f"expected {len(names)} classes, got {n_classes}")
    return names


CLASS_NAMES = _default_class_names(5)


def step(
    state: DecoderState,
    new_frames: FrameSeries,
    seg_cfg: SegConfig,
    classifier: SegmentClassifier,
    flush: bool = False,
) -> DecoderState:
    """Buffer frames; segment and classify once enough context is pending.

    A segment already fully consumed, or (unless flushing) ending within
    min_valid frames of the buffer's trailing edge, is skipped; the latter
    may still be growing and will be classified by a later step or flush.
    """
    frames = state.frames.extend(new_frames) if len(new_frames) else state.frames
    state = replace(state, frames=frames)
    if state.status is DecoderStatus.DECODED:
        return state
    pending = len(frames) - 1 - state.consumed_until
    if not flush and pending <= TRIGGER_FRAMES:
        return state
    c_seq = list(state.c_seq)
    segments = list(state.segments)
    consumed = state.consumed_until
    status = state.status
    for seg in segment_frames(frames, seg_cfg):
        if seg.start_frame <= consumed:
            continue
        if not flush and seg.end_frame >= len(frames) - seg_cfg.min_valid:
            continue
        label = classifier.classify(seg)
        segments.append(replace(seg, label=label.value))
        consumed = seg.end_frame
        if label is not Symbol.BACKGROUND:
            c_seq.append(label)
            if label is Symbol.END:
                status = DecoderStatus.DECODED
                break
    return replace(
        state, c_seq=c_seq, segments=segments, consumed_until=consumed, status=status
    )


def finalize(state: DecoderState) -> tuple[DecoderState, Message | None]:
    """Extract the message; any framing defect marks the state failed."""
    if state.status is not DecoderStatus.DECODED:
        return replace(state, status=DecoderStatus.FAILED), None
    try:
        msg = codec.decode_payload(state.c_seq)
    except CodecError:
        return replace(state, status=DecoderStatus.FAILED), None
    return state, msg


@dataclass
class DecodeReport:
    c_seq: list[Symbol]
    message: Message | None
    status: DecoderStatus
    segments: list[MotionSegment]

    def to_json(self) -> str:
        return json.dumps(
            {
                "c_seq": codec.render_symbols(self.c_seq),
                "message": None if self.message is None else json.loads(self.message.to_json()),
                "status": self.status.value,
                "segments": [
                    {"start_frame": s.start_frame, "end_frame": s.end_frame, "label": s.label}
                    for s in self.segments
                ],
            },
            sort_keys=True,
        )


def decode_stream(
    events: EventStream,
    network: Network,
    seg_cfg: SegConfig = SegConfig(),
    filter_cfg: NoiseFilterConfig = NoiseFilterConfig(),
    window_ms: float = DEFAULT_WINDOW_MS,
    batch_frames: int | None = None,
) -> DecodeReport:
    """Filter -> frame -> stepwise segment/classify -> finalize.

    batch_frames=None feeds the whole stream in one step (offline mode);
    a positive value replays it in fixed-size frame batches (streaming
    mode). Both modes produce the same code sequence.
    """
    filtered = noise_filter(events, filter_cfg)
    frames = frame_by_time(filtered, window_ms)
    classifier = SegmentClassifier(network, filtered, window_ms)
    state = DecoderState.fresh(window_ms)
    if batch_frames is None:
        state = step(state, frames, seg_cfg, classifier)
    else:
        if batch_frames < 1:
            raise ValueError("batch_frames must be >= 1")
        for lo in range(0, len(frames), batch_frames):
            chunk = FrameSeries(
                frames.window_ms,
                frames.pos[lo:lo + batch_frames],
                frames.neg[lo:lo + batch_frames],
            )
            state = step(state, chunk, seg_cfg, classifier)
            if state.status is DecoderStatus.DECODED:
                break
    if state.status is not DecoderStatus.DECODED:
        state = step(state, FrameSeries(window_ms, [], []), seg_cfg, classifier, flush=True)
    state, msg = finalize(state)
    return DecodeReport(
        c_seq=state.c_seq, message=msg, status=state.status, segments=state.segments
    )
