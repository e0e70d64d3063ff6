"""Deterministic synthetic event generator for flight-motion signals.

A filled disc ("the vehicle") glides along one closed constant-speed
trajectory per motion primitive, starting and ending at the hover position.
Pixels entering the disc emit positive events, pixels leaving it emit
negative events, so polarity balances over a full primitive. Pauses leave
the disc parked and emit only background noise.

Per-crossing event multiplicity is modulated at MOD_HZ so that motion
windows carry a stable count-variance signature (a stand-in for the
vibration and texture of a real vehicle); the modulation period equals the
default 10-frame variance window of the segmentation stage.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .codec import MotionPrimitive, Symbol, symbol_to_primitive
from .events import DEFAULT_RESOLUTION, DEFAULT_WINDOW_MS, EventStream, merge_streams

DEFAULT_ACTION_S = 3.5
DEFAULT_PAUSE_S = 3.0
MIN_ACTION_S = 3.0

TICK_US = 100  # micro-tick grid for timestamps
MOD_HZ = 3.0  # event-rate modulation frequency
MOD_DEPTH = 0.5
JITTER_TICKS = 3  # events land within this many ticks after their crossing

#: Ambient background activity leans negative, as DVS bias settings make one
#: polarity dominate at rest; the static-frame labelling rule (positive ratio
#: below one half) presumes exactly this asymmetry.
NOISE_POS_FRACTION = 0.45

DISTANCE_SCALE_FACTORS = {"short": 1.0, "medium": 0.75, "long": 0.6}

_ARC_HEIGHT_RATIO = 0.75  # arc apex height relative to half-span
_ARC_PIECES = 48  # polyline resolution for curved trajectories
_EDGE_MARGIN = 3.0  # pixels kept between trajectory extremes and the border


@dataclass(frozen=True)
class ScriptStep:
    kind: MotionPrimitive
    seconds: float


@dataclass(frozen=True)
class MotionScript:
    steps: tuple[ScriptStep, ...]
    resolution: tuple[int, int] = DEFAULT_RESOLUTION
    min_action_s: float = MIN_ACTION_S

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("script must contain at least one step")
        for step in self.steps:
            if step.seconds <= 0:
                raise ValueError("step durations must be positive")
            if step.kind is not MotionPrimitive.PAUSE and step.seconds < self.min_action_s:
                raise ValueError(
                    f"{step.kind.value} lasts {step.seconds}s, below the "
                    f"minimum action length {self.min_action_s}s"
                )

    @property
    def total_seconds(self) -> float:
        return sum(s.seconds for s in self.steps)

    def to_json(self) -> str:
        return json.dumps([{"kind": s.kind.value, "seconds": s.seconds} for s in self.steps])

    @classmethod
    def from_json(cls, text: str, resolution=DEFAULT_RESOLUTION, **kwargs) -> "MotionScript":
        steps = tuple(
            ScriptStep(MotionPrimitive(o["kind"]), float(o["seconds"]))
            for o in json.loads(text)
        )
        return cls(steps=steps, resolution=resolution, **kwargs)


@dataclass(frozen=True)
class GenConfig:
    blob_radius: float = 13.0
    speed: float = 55.0  # pixels/second along the trajectory
    event_rate: float = 3.0  # mean events per pixel boundary crossing
    noise_rate: float = 2000.0  # background events/second over the full frame
    seed: int = 0
    distance_scale: str = "short"

    def __post_init__(self):
        if self.blob_radius <= 0:
            raise ValueError("blob_radius must be positive")
        if min(self.speed, self.event_rate, self.noise_rate) < 0:
            raise ValueError("rates must be non-negative")
        if self.distance_scale not in DISTANCE_SCALE_FACTORS:
            raise ValueError(f"unknown distance_scale {self.distance_scale!r}")

    @property
    def effective_radius(self) -> float:
        return self.blob_radius * DISTANCE_SCALE_FACTORS[self.distance_scale]

    def to_json(self) -> str:
        return json.dumps(
            {
                "blob_radius": self.blob_radius,
                "speed": self.speed,
                "event_rate": self.event_rate,
                "noise_rate": self.noise_rate,
                "seed": self.seed,
                "distance_scale": self.distance_scale,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GenConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class StepLog:
    index: int
    kind: MotionPrimitive
    t0_us: int
    t1_us: int
    n_events: int


@dataclass
class GenResult:
    stream: EventStream
    log: list[StepLog]


def script_from_symbols(
    symbols,
    action_s: float = DEFAULT_ACTION_S,
    pause_s: float = DEFAULT_PAUSE_S,
    resolution=DEFAULT_RESOLUTION,
) -> MotionScript:
    """Alternate one motion per symbol with pauses; no trailing pause."""
    symbols = list(symbols)
    if not symbols:
        raise ValueError("symbol sequence must be non-empty")
    steps = []
    for i, sym in enumerate(symbols):
        if sym is Symbol.BACKGROUND:
            raise ValueError("background is not a transmissible symbol")
        if i:
            steps.append(ScriptStep(MotionPrimitive.PAUSE, pause_s))
        steps.append(ScriptStep(symbol_to_primitive(sym), action_s))
    return MotionScript(steps=tuple(steps), resolution=resolution)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def _unit_waypoints(kind: MotionPrimitive) -> np.ndarray:
    """Closed waypoint polyline at unit half-span, centred on the origin."""
    if kind is MotionPrimitive.VERTICAL:
        # up from hover, down through centre, back up to hover
        return np.array([[0.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]])
    if kind is MotionPrimitive.HORIZONTAL:
        # left from hover, right through centre, back to hover
        return np.array([[0.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
    if kind in (MotionPrimitive.LEFT_UP_RIGHT, MotionPrimitive.LEFT_DOWN_RIGHT):
        sign = 1.0 if kind is MotionPrimitive.LEFT_UP_RIGHT else -1.0
        s = np.linspace(0.0, 1.0, _ARC_PIECES + 1)
        arc = np.column_stack([-1.0 + 2.0 * s, sign * _ARC_HEIGHT_RATIO * np.sin(np.pi * s)])
        return np.vstack([[0.0, 0.0], arc, [0.0, 0.0]])
    raise ValueError(f"{kind} has no trajectory")


def _polyline_length(points: np.ndarray) -> float:
    return float(np.sum(np.hypot(*np.diff(points, axis=0).T)))


def _step_offset(kind: MotionPrimitive, rng: np.random.Generator, limit: float) -> np.ndarray:
    """Per-step seeded placement jitter, restricted to the motion axis so
    the vertical primitive keeps its x on the column midline (and vice
    versa)."""
    if kind is MotionPrimitive.VERTICAL:
        return np.array([0.0, rng.uniform(-limit, limit)])
    if kind is MotionPrimitive.HORIZONTAL:
        return np.array([rng.uniform(-limit, limit), 0.0])
    return rng.uniform(-limit * 0.75, limit * 0.75, size=2)


def _trajectory_pieces(script: MotionScript, cfg: GenConfig, rng: np.random.Generator):
    """Yield (t0_s, t1_s, c0, c1) linear centre-path pieces for each step.

    The amplitude of each primitive is speed*duration/unit_path_length,
    capped so the disc stays _EDGE_MARGIN pixels inside the frame.
    """
    width, height = script.resolution
    centre = np.array([(width - 1) / 2.0, (height - 1) / 2.0])
    radius = cfg.effective_radius
    max_amp = min(width, height) / 2.0 - radius - _EDGE_MARGIN
    if max_amp <= 0:
        raise ValueError("blob radius too large for the resolution")
    per_step = []
    t = 0.0
    for i, step in enumerate(script.steps):
        pieces = []
        if step.kind is not MotionPrimitive.PAUSE:
            unit = _unit_waypoints(step.kind)
            unit_len = _polyline_length(unit)
            amp = min(cfg.speed * step.seconds / unit_len, max_amp)
            offset = _step_offset(step.kind, rng, limit=max(0.0, max_amp - amp))
            points = centre + offset + amp * unit
            seg_len = np.hypot(*np.diff(points, axis=0).T)
            total = seg_len.sum()
            t_knots = t + step.seconds * np.concatenate([[0.0], np.cumsum(seg_len) / total])
            for j in range(len(points) - 1):
                pieces.append((t_knots[j], t_knots[j + 1], points[j], points[j + 1]))
        per_step.append((i, step, t, t + step.seconds, pieces))
        t += step.seconds
    return per_step


def _piece_crossings(t0, t1, c0, c1, radius, width, height):
    """Pixel boundary-crossing times for one linear piece of the path.

    Solves |p - c(t)|^2 = r^2 per candidate pixel; entries (outside ->
    inside) are positive events, exits negative. Half-open (t0, t1] piece
    intervals keep crossings unique across consecutive pieces.
    """
    dt = t1 - t0
    v = (c1 - c0) / dt
    speed2 = float(v @ v)
    if speed2 == 0.0 or dt <= 0.0:
        return np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int8)
    lo = np.floor(np.minimum(c0, c1) - radius - 1.0).astype(int)
    hi = np.ceil(np.maximum(c0, c1) + radius + 1.0).astype(int)
    xs = np.arange(max(lo[0], 0), min(hi[0], width - 1) + 1)
    ys = np.arange(max(lo[1], 0), min(hi[1], height - 1) + 1)
    px, py = np.meshgrid(xs, ys, indexing="ij")
    dx = px.ravel() - c0[0]
    dy = py.ravel() - c0[1]
    b = -2.0 * (dx * v[0] + dy * v[1])
    c = dx * dx + dy * dy - radius * radius
    disc = b * b - 4.0 * speed2 * c
    valid = disc > 1e-12
    if not valid.any():
        return np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int8)
    sq = np.sqrt(disc[valid])
    bv = b[valid]
    tau_in = (-bv - sq) / (2.0 * speed2)
    tau_out = (-bv + sq) / (2.0 * speed2)
    pxv = px.ravel()[valid]
    pyv = py.ravel()[valid]

    times, exs, eys, pols = [], [], [], []
    m_in = (tau_in > 0.0) & (tau_in <= dt)
    m_out = (tau_out > 0.0) & (tau_out <= dt)
    for mask, pol in ((m_in, 1), (m_out, 0)):
        if mask.any():
            tau = tau_in[mask] if pol == 1 else tau_out[mask]
            times.append(t0 + tau)
            exs.append(pxv[mask].astype(np.int64))
            eys.append(pyv[mask].astype(np.int64))
            pols.append(np.full(mask.sum(), pol, dtype=np.int8))
    if not times:
        return np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int8)
    return (
        np.concatenate(times),
        np.concatenate(exs),
        np.concatenate(eys),
        np.concatenate(pols),
    )


def _emit_events(times_s, xs, ys, pols, rate, phase, rng):
    """Expand crossings into timestamped events with modulated multiplicity."""
    lam = rate * (1.0 + MOD_DEPTH * np.sin(2.0 * np.pi * MOD_HZ * times_s + phase))
    lam = np.maximum(lam, 0.0)
    base = np.floor(lam).astype(np.int64)
    counts = base + (rng.random(len(lam)) < (lam - base))
    reps = counts
    t_rep = np.repeat(times_s, reps)
    x_rep = np.repeat(xs, reps)
    y_rep = np.repeat(ys, reps)
    p_rep = np.repeat(pols, reps)
    jitter = rng.integers(0, JITTER_TICKS, size=len(t_rep))
    ticks = np.floor(t_rep * 1e6 / TICK_US).astype(np.int64) + jitter
    return ticks * TICK_US, x_rep, y_rep, p_rep


def generate_with_log(script: MotionScript, cfg: GenConfig) -> GenResult:
    """Generate the stream plus a per-step emission log (ground truth)."""
    rng = np.random.default_rng(cfg.seed)
    width, height = script.resolution
    radius = cfg.effective_radius
    phase = rng.uniform(0.0, 2.0 * np.pi)
    per_step = _trajectory_pieces(script, cfg, rng)

    all_t, all_x, all_y, all_p = [], [], [], []
    log = []
    for index, step, t_start, t_end, pieces in per_step:
        n_step = 0
        for t0, t1, c0, c1 in pieces:
            times, xs, ys, pols = _piece_crossings(t0, t1, c0, c1, radius, width, height)
            if len(times) == 0:
                continue
            t_us, x, y, p = _emit_events(times, xs, ys, pols, cfg.event_rate, phase, rng)
            all_t.append(t_us)
            all_x.append(x)
            all_y.append(y)
            all_p.append(p)
            n_step += len(t_us)
        log.append(
            StepLog(index, step.kind, int(t_start * 1e6), int(t_end * 1e6), n_step)
        )

    # uniform background noise over the whole script duration
    duration = script.total_seconds
    if cfg.noise_rate > 0:
        n_noise = rng.poisson(cfg.noise_rate * duration)
        if n_noise:
            nt = rng.integers(0, max(int(duration * 1e6 / TICK_US), 1), size=n_noise) * TICK_US
            all_t.append(nt.astype(np.int64))
            all_x.append(rng.integers(0, width, size=n_noise))
            all_y.append(rng.integers(0, height, size=n_noise))
            all_p.append((rng.random(n_noise) < NOISE_POS_FRACTION).astype(np.int8))

    if not all_t:
        stream = EventStream.empty(script.resolution)
    else:
        stream = EventStream(
            script.resolution,
            np.concatenate(all_t),
            np.concatenate(all_x),
            np.concatenate(all_y),
            np.concatenate(all_p),
        )
    return GenResult(stream=stream, log=log)


def generate(script: MotionScript, cfg: GenConfig) -> EventStream:
    """Deterministic event stream for a motion script (seed-reproducible)."""
    return generate_with_log(script, cfg).stream


def noise_burst(
    seconds: float,
    rate: float,
    pos_fraction: float = 0.5,
    resolution=DEFAULT_RESOLUTION,
    seed: int = 0,
    t_offset_us: int = 0,
) -> EventStream:
    """Uniform speckle with a chosen polarity mix (interference stand-in)."""
    rng = np.random.default_rng(seed)
    width, height = resolution
    n = rng.poisson(rate * seconds)
    if n == 0:
        return EventStream.empty(resolution)
    t = rng.integers(0, max(int(seconds * 1e6 / TICK_US), 1), size=n) * TICK_US + t_offset_us
    x = rng.integers(0, width, size=n)
    y = rng.integers(0, height, size=n)
    p = (rng.random(n) < pos_fraction).astype(np.int8)
    return EventStream(resolution, t, x, y, p)


def ground_truth_segments(script: MotionScript, stream: EventStream,
                          window_ms: float = DEFAULT_WINDOW_MS):
    """Motion-step intervals as inclusive frame ranges of the framed stream.

    Frames are anchored at the stream's first event, matching frame_by_time.
    Returns a list of (start_frame, end_frame, MotionPrimitive).
    """
    if len(stream) == 0:
        return []
    t0 = int(stream.t[0])
    w_us = window_ms * 1000.0
    out = []
    t = 0.0
    for step in script.steps:
        t_start, t_end = t * 1e6, (t + step.seconds) * 1e6
        t += step.seconds
        if step.kind is MotionPrimitive.PAUSE:
            continue
        first = int((t_start - t0) // w_us)
        last = int((t_end - t0 - 1) // w_us)
        out.append((max(first, 0), last, step.kind))
    return out
