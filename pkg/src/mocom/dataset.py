"""Synthetic recognition datasets for training and evaluation.

Samples are generated per (class, index) from spawned seed sequences, so
the set is fully reproducible and any block count F can be rebuilt over
the identical underlying event segments. Streams pass through the same
noise filter used at decode time before framing, keeping the training
distribution aligned with what the decoder's classifier actually sees.
"""

from __future__ import annotations

import numpy as np

from .codec import MotionPrimitive, Symbol, symbol_to_primitive
from .decoder import CLASS_NAMES, NoiseFilterConfig, noise_filter
from .events import EventStream, RecognitionSample, frame_by_count
from .generator import GenConfig, MotionScript, ScriptStep, generate, noise_burst
from .snn.train import SampleSet

DISTANCE_SCALES = ("short", "medium", "long")


def _rng_for(seed: int, class_idx: int, index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(class_idx, index))
    )


def _motion_segment(sym: Symbol, rng: np.random.Generator,
                    resolution: tuple[int, int]) -> EventStream:
    duration = float(rng.uniform(3.2, 3.8))
    cfg = GenConfig(
        blob_radius=float(rng.uniform(11.0, 15.0)),
        speed=float(rng.uniform(45.0, 65.0)),
        event_rate=float(rng.uniform(2.5, 3.5)),
        noise_rate=float(rng.uniform(1000.0, 3000.0)),
        seed=int(rng.integers(0, 2**31)),
        distance_scale=DISTANCE_SCALES[int(rng.integers(0, len(DISTANCE_SCALES)))],
    )
    script = MotionScript(
        steps=(ScriptStep(symbol_to_primitive(sym), duration),),
        resolution=resolution,
    )
    return generate(script, cfg)


def _background_segment(rng: np.random.Generator, variant: int,
                        resolution: tuple[int, int]) -> EventStream:
    duration = float(rng.uniform(3.2, 3.8))
    seed = int(rng.integers(0, 2**31))
    if variant == 0:
        rate = float(rng.uniform(2000.0, 8000.0))
        pos_fraction = float(rng.uniform(0.4, 0.6))
    elif variant == 1:
        rate = float(rng.uniform(3000.0, 9000.0))
        pos_fraction = float(rng.uniform(0.55, 0.85))
    else:
        rate = float(rng.uniform(3000.0, 9000.0))
        pos_fraction = float(rng.uniform(0.15, 0.45))
    return noise_burst(duration, rate, pos_fraction, resolution, seed)


def build_event_segment(label: str, seed: int, index: int,
                        resolution=(128, 128)) -> EventStream:
    """One reproducible labelled event segment (pre-filtering)."""
    class_idx = CLASS_NAMES.index(label)
    rng = _rng_for(seed, class_idx, index)
    if label == Symbol.BACKGROUND.value:
        return _background_segment(rng, index % 3, resolution)
    return _motion_segment(Symbol(label), rng, resolution)


def build_recognition_dataset(
    n_per_class: int,
    seed: int = 0,
    f_blocks: int = 16,
    resolution=(128, 128),
    dst_hw=(128, 128),
    filter_cfg: NoiseFilterConfig = NoiseFilterConfig(),
) -> SampleSet:
    """n_per_class samples for each of the five classes, framed at F blocks."""
    tensors = np.zeros(
        (n_per_class * len(CLASS_NAMES), f_blocks, 2, dst_hw[0], dst_hw[1]),
        dtype=np.uint8,
    )
    labels = np.zeros(len(tensors), dtype=np.int64)
    i = 0
    for class_idx, name in enumerate(CLASS_NAMES):
        for index in range(n_per_class):
            stream = build_event_segment(name, seed, index, resolution)
            filtered = noise_filter(stream, filter_cfg)
            tensor = frame_by_count(filtered, f_blocks, *dst_hw)
            tensors[i] = np.minimum(tensor, 255).astype(np.uint8)
            labels[i] = class_idx
            i += 1
    return SampleSet(tensors=tensors, labels=labels, class_names=CLASS_NAMES)


def sample_set_to_samples(dataset: SampleSet) -> list[RecognitionSample]:
    return [
        RecognitionSample(
            tensor=dataset.tensors[i].astype(np.float32),
            label=dataset.class_names[int(dataset.labels[i])],
        )
        for i in range(len(dataset))
    ]


def samples_to_sample_set(samples: list[RecognitionSample]) -> SampleSet:
    if not samples:
        raise ValueError("no samples")
    tensors = np.stack([np.minimum(s.tensor, 255).astype(np.uint8) for s in samples])
    labels = np.array([CLASS_NAMES.index(s.label) for s in samples], dtype=np.int64)
    return SampleSet(tensors=tensors, labels=labels, class_names=CLASS_NAMES)
