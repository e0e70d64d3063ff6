"""Event data model, framing strategies, and on-disk formats.

Streams are array-backed (one int64/int16 column per field) so framing and
filtering stay vectorised; `Event` objects exist only as a convenience view.

Two framings feed the two halves of the pipeline:

* fixed-time windows (default 33 ms) -> per-frame P/N/Q statistics for
  segmentation;
* equal-event-count blocks -> [F, 2, H, W] count tensors for recognition.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

POSITIVE = 1
NEGATIVE = 0

DEFAULT_WINDOW_MS = 33.0
DEFAULT_RESOLUTION = (128, 128)

SAMPLE_MAGIC = b"MOCOMTEN"


class EventFormatError(ValueError):
    """Malformed event file; message carries the offending line number."""


@dataclass(frozen=True)
class Event:
    t: int  # microseconds
    x: int
    y: int
    polarity: int  # POSITIVE or NEGATIVE


class EventStream:
    """Events sorted by timestamp (ties keep construction order)."""

    __slots__ = ("resolution", "t", "x", "y", "p")

    def __init__(self, resolution, t, x, y, p, _sorted: bool = False):
        width, height = int(resolution[0]), int(resolution[1])
        t = np.asarray(t, dtype=np.int64)
        x = np.asarray(x, dtype=np.int16)
        y = np.asarray(y, dtype=np.int16)
        p = np.asarray(p, dtype=np.int8)
        if not (len(t) == len(x) == len(y) == len(p)):
            raise ValueError("field arrays must have equal length")
        if len(t):
            if t.min() < 0:
                raise ValueError("timestamps must be non-negative")
            if x.min() < 0 or x.max() >= width or y.min() < 0 or y.max() >= height:
                raise ValueError(
                    f"coordinates out of declared resolution {width}x{height}"
                )
            bad = (p != POSITIVE) & (p != NEGATIVE)
            if bad.any():
                raise ValueError("polarity values must be 0 or 1")
        if not _sorted and len(t) and np.any(np.diff(t) < 0):
            order = np.argsort(t, kind="stable")
            t, x, y, p = t[order], x[order], y[order], p[order]
        self.resolution = (width, height)
        self.t = t
        self.x = x
        self.y = y
        self.p = p

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self):
        for i in range(len(self.t)):
            yield Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    @classmethod
    def empty(cls, resolution=DEFAULT_RESOLUTION) -> "EventStream":
        return cls(resolution, [], [], [], [], _sorted=True)

    def slice_time(self, t_lo: int, t_hi: int) -> "EventStream":
        """Events with t in [t_lo, t_hi), preserving order."""
        lo = np.searchsorted(self.t, t_lo, side="left")
        hi = np.searchsorted(self.t, t_hi, side="left")
        return EventStream(
            self.resolution,
            self.t[lo:hi], self.x[lo:hi], self.y[lo:hi], self.p[lo:hi],
            _sorted=True,
        )


def merge_streams(a: EventStream, b: EventStream) -> EventStream:
    """Interleave two streams by timestamp (a's events first on ties)."""
    if a.resolution != b.resolution:
        raise ValueError("cannot merge streams of different resolutions")
    t = np.concatenate([a.t, b.t])
    x = np.concatenate([a.x, b.x])
    y = np.concatenate([a.y, b.y])
    p = np.concatenate([a.p, b.p])
    return EventStream(a.resolution, t, x, y, p)


@dataclass(frozen=True)
class FrameStats:
    frame_index: int
    pos_count: int
    neg_count: int

    @property
    def total(self) -> int:
        return self.pos_count + self.neg_count


class FrameSeries:
    """Per-frame P/N counts over contiguous frame indices 0..L-1."""

    __slots__ = ("window_ms", "pos", "neg")

    def __init__(self, window_ms: float, pos, neg):
        pos = np.asarray(pos, dtype=np.int64)
        neg = np.asarray(neg, dtype=np.int64)
        if pos.shape != neg.shape or pos.ndim != 1:
            raise ValueError("pos/neg must be 1-d arrays of equal length")
        if len(pos) and (pos.min() < 0 or neg.min() < 0):
            raise ValueError("counts must be non-negative")
        self.window_ms = float(window_ms)
        self.pos = pos
        self.neg = neg

    @property
    def total(self) -> np.ndarray:
        return self.pos + self.neg

    def __len__(self) -> int:
        return len(self.pos)

    def __iter__(self):
        for i in range(len(self.pos)):
            yield FrameStats(i, int(self.pos[i]), int(self.neg[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameSeries):
            return NotImplemented
        return (
            self.window_ms == other.window_ms
            and np.array_equal(self.pos, other.pos)
            and np.array_equal(self.neg, other.neg)
        )

    def extend(self, other: "FrameSeries") -> "FrameSeries":
        if other.window_ms != self.window_ms:
            raise ValueError("window size mismatch")
        return FrameSeries(
            self.window_ms,
            np.concatenate([self.pos, other.pos]),
            np.concatenate([self.neg, other.neg]),
        )


@dataclass
class RecognitionSample:
    """Equal-count frame tensor [F, 2, H, W] plus its symbol label."""

    tensor: np.ndarray
    label: str = "background"

    def __post_init__(self):
        if self.tensor.ndim != 4 or self.tensor.shape[1] != 2:
            raise ValueError(f"tensor must be [F, 2, H, W], got {self.tensor.shape}")


def frame_by_time(stream: EventStream, window_ms: float = DEFAULT_WINDOW_MS) -> FrameSeries:
    """Count events per fixed window anchored at the first timestamp.

    Frame n covers [n*w, (n+1)*w) relative to the first event; the trailing
    partial window is kept. Empty stream -> empty series.
    """
    if window_ms <= 0:
        raise ValueError("window_ms must be positive")
    if len(stream) == 0:
        return FrameSeries(window_ms, [], [])
    w_us = window_ms * 1000.0
    rel = stream.t - stream.t[0]
    idx = np.floor(rel / w_us).astype(np.int64)
    n_frames = int(idx[-1]) + 1
    pos = np.bincount(idx[stream.p == POSITIVE], minlength=n_frames)
    neg = np.bincount(idx[stream.p == NEGATIVE], minlength=n_frames)
    return FrameSeries(window_ms, pos, neg)


def map_coordinates(x, y, src_resolution, dst_hw):
    """Floor-scale (x, y) from src (width, height) into a dst (H, W) grid."""
    src_w, src_h = src_resolution
    dst_h, dst_w = dst_hw
    x = np.asarray(x)
    y = np.asarray(y)
    xm = (x.astype(np.int64) * dst_w) // src_w
    ym = (y.astype(np.int64) * dst_h) // src_h
    return xm, ym


def block_sizes(n_events: int, n_blocks: int) -> list[int]:
    """Split n events into blocks differing by at most one (remainder first)."""
    base, rem = divmod(n_events, n_blocks)
    return [base + 1] * rem + [base] * (n_blocks - rem)


def frame_by_count(segment: EventStream, f_blocks: int, h: int, w: int) -> np.ndarray:
    """Accumulate F equal-event-count blocks into a [F, 2, H, W] tensor.

    Blocks may be empty when the segment holds fewer than F events; the
    tensor shape stays fixed and its sum always equals len(segment).
    """
    if f_blocks < 1:
        raise ValueError("block count must be >= 1")
    tensor = np.zeros((f_blocks, 2, h, w), dtype=np.float32)
    n = len(segment)
    if n == 0:
        return tensor
    xm, ym = map_coordinates(segment.x, segment.y, segment.resolution, (h, w))
    # channel 0 = positive, channel 1 = negative
    chan = np.where(segment.p == POSITIVE, 0, 1).astype(np.int64)
    sizes = block_sizes(n, f_blocks)
    bounds = np.cumsum([0] + sizes)
    block = np.searchsorted(bounds, np.arange(n), side="right") - 1
    flat = ((block * 2 + chan) * h + ym) * w + xm
    counts = np.bincount(flat, minlength=tensor.size)
    return (tensor.reshape(-1) + counts).reshape(tensor.shape).astype(np.float32)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

EVENT_CSV_HEADER = "t_us,x,y,p"
FRAMES_CSV_HEADER = "frame_index,pos,neg,total"


def save_events(stream: EventStream, path) -> None:
    arr = np.column_stack(
        [stream.t, stream.x.astype(np.int64), stream.y.astype(np.int64),
         stream.p.astype(np.int64)]
    )
    np.savetxt(path, arr, fmt="%d", delimiter=",", header=EVENT_CSV_HEADER, comments="")


def load_events(path, resolution=DEFAULT_RESOLUTION) -> EventStream:
    """Parse the event CSV; re-sorts if rows are out of time order."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != EVENT_CSV_HEADER:
            raise EventFormatError(f"{path}:1: expected header {EVENT_CSV_HEADER!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise EventFormatError(f"{path}:{lineno}: expected 4 fields")
            try:
                rows.append([int(v) for v in parts])
            except ValueError:
                raise EventFormatError(f"{path}:{lineno}: non-integer field") from None
    if not rows:
        return EventStream.empty(resolution)
    arr = np.asarray(rows, dtype=np.int64)
    width, height = resolution
    bad_xy = (arr[:, 1] < 0) | (arr[:, 1] >= width) | (arr[:, 2] < 0) | (arr[:, 2] >= height)
    if bad_xy.any():
        lineno = int(np.flatnonzero(bad_xy)[0]) + 2
        raise EventFormatError(
            f"{path}:{lineno}: coordinates out of resolution {width}x{height}"
        )
    bad_p = (arr[:, 3] != 0) & (arr[:, 3] != 1)
    if bad_p.any():
        lineno = int(np.flatnonzero(bad_p)[0]) + 2
        raise EventFormatError(f"{path}:{lineno}: polarity must be 0 or 1")
    if arr[:, 0].min() < 0:
        lineno = int(np.flatnonzero(arr[:, 0] < 0)[0]) + 2
        raise EventFormatError(f"{path}:{lineno}: negative timestamp")
    return EventStream(resolution, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def save_frames(frames: FrameSeries, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(FRAMES_CSV_HEADER + "\n")
        total = frames.total
        for i in range(len(frames)):
            fh.write(f"{i},{frames.pos[i]},{frames.neg[i]},{total[i]}\n")


def load_frames(path, window_ms: float = DEFAULT_WINDOW_MS) -> FrameSeries:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != FRAMES_CSV_HEADER:
            raise EventFormatError(f"{path}:1: expected header {FRAMES_CSV_HEADER!r}")
        pos, neg = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise EventFormatError(f"{path}:{lineno}: expected 4 fields")
            try:
                idx, p, n, q = (int(v) for v in parts)
            except ValueError:
                raise EventFormatError(f"{path}:{lineno}: non-integer field") from None
            if idx != lineno - 2:
                raise EventFormatError(f"{path}:{lineno}: non-contiguous frame index")
            if q != p + n:
                raise EventFormatError(f"{path}:{lineno}: total != pos + neg")
            pos.append(p)
            neg.append(n)
    return FrameSeries(window_ms, pos, neg)


def save_sample(path, sample: RecognitionSample) -> None:
    """Binary tensor container: magic, dims as int32 LE, float32 LE payload."""
    path = Path(path)
    tensor = np.ascontiguousarray(sample.tensor, dtype="<f4")
    with path.open("wb") as fh:
        fh.write(SAMPLE_MAGIC)
        fh.write(struct.pack("<4i", *tensor.shape))
        fh.write(tensor.tobytes())
    path.with_suffix(path.suffix + ".label").write_text(sample.label + "\n")


def load_sample(path) -> RecognitionSample:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(SAMPLE_MAGIC))
        if magic != SAMPLE_MAGIC:
            raise EventFormatError(f"{path}: bad magic {magic!r}")
        dims = struct.unpack("<4i", fh.read(16))
        count = dims[0] * dims[1] * dims[2] * dims[3]
        payload = np.frombuffer(fh.read(4 * count), dtype="<f4", count=count)
    label_path = path.with_suffix(path.suffix + ".label")
    label = label_path.read_text().strip() if label_path.exists() else "background"
    return RecognitionSample(tensor=payload.reshape(dims).copy(), label=label)


def save_sample_dir(directory, samples: list[RecognitionSample]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, sample in enumerate(samples):
        save_sample(directory / f"sample_{i:05d}.bin", sample)


def load_sample_dir(directory) -> list[RecognitionSample]:
    directory = Path(directory)
    return [load_sample(p) for p in sorted(directory.glob("sample_*.bin"))]
