"""Statistical motion segmentation over per-frame event counts.

Two per-frame features drive a threshold labeller: the positive-event
ratio R = P/Q and the local variance V of total counts over a sliding
window. Smoothed R and V label each frame static or moving; boundary
transitions delimit candidate segments, which a refinement pass filters
and merges into final motion intervals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .events import FrameSeries


@dataclass(frozen=True)
class SegConfig:
    variance_window: int = 10  # frames, centred (half-window each side)
    smoothing_window: int = 5  # frames, moving average
    theta_r: float = 0.5  # positive-ratio threshold
    theta_v_fraction: float = 0.5  # of the median smoothed variance
    min_segment: int = 10  # frames, candidate run floor
    min_action: int = 30  # frames, refinement stage 1
    merge_gap: int = 10  # frames, refinement stage 2
    min_valid: int = 91  # frames (~3 s), refinement stage 3

    def __post_init__(self):
        for name in ("variance_window", "smoothing_window", "min_segment",
                     "min_action", "merge_gap", "min_valid"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 < self.theta_r < 1.0:
            raise ValueError("theta_r must lie in (0, 1)")
        if self.theta_v_fraction <= 0.0:
            raise ValueError("theta_v_fraction must be positive")


@dataclass
class FeatureSeries:
    r: np.ndarray  # positive ratio per frame, in [0, 1]
    v: np.ndarray  # windowed count variance per frame, >= 0
    r_smooth: np.ndarray
    v_smooth: np.ndarray
    g: np.ndarray  # 1 = static frame, 0 = motion frame


@dataclass(frozen=True)
class MotionSegment:
    start_frame: int
    end_frame: int  # inclusive
    label: Optional[str] = None

    def __post_init__(self):
        if self.start_frame > self.end_frame:
            raise ValueError("start_frame must not exceed end_frame")

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1

    @property
    def center(self) -> float:
        return (self.start_frame + self.end_frame) / 2.0


@dataclass
class SegMetrics:
    center_error: float  # mean |mid(pred) - mid(gt)| over matched pairs
    center_variance: float
    frame_count_error: float  # mean |len(pred) - len(gt)|
    iou: float  # mean inclusive-interval IoU
    matched: int = 0
    pred_unmatched: int = 0
    gt_unmatched: int = 0


def compute_pner(frames: FrameSeries) -> np.ndarray:
    """Positive-event ratio P/Q per frame; empty frames count as 0.5."""
    pos = frames.pos.astype(np.float64)
    total = frames.total.astype(np.float64)
    out = np.full(len(frames), 0.5)
    nz = total > 0
    out[nz] = pos[nz] / total[nz]
    return out


def _window_bounds(n: int, half: int):
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, n - 1)
    return lo, hi


def _windowed_sum(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    prefix = np.concatenate([[0.0], np.cumsum(values)])
    return prefix[hi + 1] - prefix[lo]


def compute_efv(frames: FrameSeries, variance_window: int = 10) -> np.ndarray:
    """Variance of total counts over a centred, boundary-truncated window.

    Half-window is floor(W/2) each side; both the mean and the variance
    divide by the actual number of in-range frames.
    """
    if variance_window < 1:
        raise ValueError("variance_window must be >= 1")
    n = len(frames)
    if n == 0:
        return np.empty(0)
    half = variance_window // 2
    totals = frames.total.astype(np.float64)
    lo, hi = _window_bounds(n, half)
    count = (hi - lo + 1).astype(np.float64)
    mean = _windowed_sum(totals, lo, hi) / count
    mean_sq = _windowed_sum(totals * totals, lo, hi) / count
    return np.maximum(mean_sq - mean * mean, 0.0)


def smooth(series, k: int = 5) -> np.ndarray:
    """Centred k-frame moving average with boundary truncation."""
    if k < 1:
        raise ValueError("k must be >= 1")
    series = np.asarray(series, dtype=np.float64)
    n = len(series)
    if n == 0:
        return series
    half = k // 2
    lo, hi = _window_bounds(n, half)
    return _windowed_sum(series, lo, hi) / (hi - lo + 1)


def lower_median(values: np.ndarray) -> float:
    """Median for odd lengths, lower of the two middles for even lengths."""
    if len(values) == 0:
        raise ValueError("cannot take the median of an empty series")
    return float(np.sort(values)[(len(values) - 1) // 2])


def label_frames(r_smooth: np.ndarray, v_smooth: np.ndarray, cfg: SegConfig) -> np.ndarray:
    """1 = static iff R < theta_R and V < theta_V (both strict)."""
    if len(v_smooth) == 0:
        return np.empty(0, dtype=np.int8)
    theta_v = cfg.theta_v_fraction * lower_median(v_smooth)
    static = (r_smooth < cfg.theta_r) & (v_smooth < theta_v)
    return static.astype(np.int8)


def detect_boundaries(g: np.ndarray) -> np.ndarray:
    """Frame indices n where the label flips between n and n+1."""
    if len(g) < 2:
        return np.empty(0, dtype=np.int64)
    return np.flatnonzero(np.diff(g.astype(np.int64)) != 0)


def candidate_segments(g: np.ndarray, min_segment: int = 10) -> list[MotionSegment]:
    """Maximal motion (G=0) runs of inclusive length >= min_segment.

    A series with no label transitions carries no boundary evidence of any
    action and yields no candidates, even if every frame is labelled
    motion; with at least one transition, runs touching the series edges
    count as truncated but valid candidates.
    """
    boundaries = detect_boundaries(g)
    if len(boundaries) == 0:
        return []
    padded = np.concatenate([[1], g.astype(np.int64), [1]])
    deltas = np.diff(padded)
    starts = np.flatnonzero(deltas == -1)
    ends = np.flatnonzero(deltas == 1) - 1
    return [
        MotionSegment(int(s), int(e))
        for s, e in zip(starts, ends)
        if e - s + 1 >= min_segment
    ]


def refine(candidates: list[MotionSegment], cfg: SegConfig) -> list[MotionSegment]:
    """Drop short segments, merge across small gaps, drop short survivors.

    Stages (in order): drop length < min_action; merge neighbours whose
    gap is <= merge_gap; drop merged length < min_valid. Idempotent.
    """
    kept = [s for s in candidates if s.length >= cfg.min_action]
    merged: list[MotionSegment] = []
    for seg in kept:
        if merged and seg.start_frame - merged[-1].end_frame - 1 <= cfg.merge_gap:
            last = merged.pop()
            merged.append(MotionSegment(last.start_frame, seg.end_frame))
        else:
            merged.append(seg)
    return [s for s in merged if s.length >= cfg.min_valid]


def compute_features(frames: FrameSeries, cfg: SegConfig = SegConfig()) -> FeatureSeries:
    r = compute_pner(frames)
    v = compute_efv(frames, cfg.variance_window)
    r_s = smooth(r, cfg.smoothing_window)
    v_s = smooth(v, cfg.smoothing_window)
    g = label_frames(r_s, v_s, cfg)
    return FeatureSeries(r=r, v=v, r_smooth=r_s, v_smooth=v_s, g=g)


def segment(frames: FrameSeries, cfg: SegConfig = SegConfig()) -> list[MotionSegment]:
    """Full pipeline: features -> labels -> candidates -> refinement."""
    if len(frames) == 0:
        return []
    features = compute_features(frames, cfg)
    candidates = candidate_segments(features.g, cfg.min_segment)
    return refine(candidates, cfg)


def interval_iou(a: MotionSegment, b: MotionSegment) -> float:
    """IoU of inclusive frame intervals."""
    inter = min(a.end_frame, b.end_frame) - max(a.start_frame, b.start_frame) + 1
    if inter <= 0:
        return 0.0
    union = a.length + b.length - inter
    return inter / union


def _overlap(a: MotionSegment, b: MotionSegment) -> int:
    return min(a.end_frame, b.end_frame) - max(a.start_frame, b.start_frame) + 1


def eval_segments(pred: list[MotionSegment], gt: list[MotionSegment]) -> SegMetrics:
    """Greedy max-overlap matching, then per-pair errors and interval IoU."""
    pairs = []
    free_pred = set(range(len(pred)))
    free_gt = set(range(len(gt)))
    overlaps = sorted(
        (
            (-_overlap(pred[i], gt[j]), i, j)
            for i in free_pred
            for j in free_gt
            if _overlap(pred[i], gt[j]) > 0
        ),
    )
    for neg_ov, i, j in overlaps:
        if i in free_pred and j in free_gt:
            pairs.append((i, j))
            free_pred.remove(i)
            free_gt.remove(j)
    if not pairs:
        return SegMetrics(
            center_error=float("inf") if (pred or gt) else 0.0,
            center_variance=0.0,
            frame_count_error=float("inf") if (pred or gt) else 0.0,
            iou=0.0 if (pred or gt) else 1.0,
            matched=0,
            pred_unmatched=len(pred),
            gt_unmatched=len(gt),
        )
    centers = np.array([abs(pred[i].center - gt[j].center) for i, j in pairs])
    lengths = np.array([abs(pred[i].length - gt[j].length) for i, j in pairs], dtype=float)
    ious = np.array([interval_iou(pred[i], gt[j]) for i, j in pairs])
    return SegMetrics(
        center_error=float(centers.mean()),
        center_variance=float(centers.var()),
        frame_count_error=float(lengths.mean()),
        iou=float(ious.mean()),
        matched=len(pairs),
        pred_unmatched=len(pred) - len(pairs),
        gt_unmatched=len(gt) - len(pairs),
    )


def segments_to_json(segments: list[MotionSegment]) -> str:
    return json.dumps(
        [
            {"start_frame": s.start_frame, "end_frame": s.end_frame, "label": s.label}
            for s in segments
        ]
    )


def segments_from_json(text: str) -> list[MotionSegment]:
    return [
        MotionSegment(int(o["start_frame"]), int(o["end_frame"]), o.get("label"))
        for o in json.loads(text)
    ]
