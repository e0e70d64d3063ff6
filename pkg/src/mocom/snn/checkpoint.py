"""Binary checkpoint container.

Layout: magic `MOCOMNET1`, then records of
    u32 name length | UTF-8 name | u32 rank | rank * u32 dims | f32 payload
all little-endian. Architecture metadata rides along as scalar records
under `meta.*` names so a checkpoint is self-describing.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .network import LIFParams, Network, NetworkSpec

CHECKPOINT_MAGIC = b"MOCOMNET1"

_META_FIELDS = (
    "input_h", "input_w", "in_channels", "conv_channels", "hidden_dim",
    "classes", "neurons_per_class", "time_steps", "dropout",
    "tau_m", "threshold", "resistance", "surrogate_alpha",
)


def _spec_meta(spec: NetworkSpec) -> dict[str, float]:
    return {
        "meta.input_h": spec.input_hw[0],
        "meta.input_w": spec.input_hw[1],
        "meta.in_channels": spec.in_channels,
        "meta.conv_channels": spec.conv_channels,
        "meta.hidden_dim": spec.hidden_dim,
        "meta.classes": spec.classes,
        "meta.neurons_per_class": spec.neurons_per_class,
        "meta.time_steps": spec.time_steps,
        "meta.dropout": spec.dropout,
        "meta.tau_m": spec.lif.tau_m,
        "meta.threshold": spec.lif.threshold,
        "meta.resistance": spec.lif.resistance,
        "meta.surrogate_alpha": spec.surrogate_alpha,
    }


def _spec_from_meta(meta: dict[str, float]) -> NetworkSpec:
    return NetworkSpec(
        input_hw=(int(meta["meta.input_h"]), int(meta["meta.input_w"])),
        in_channels=int(meta["meta.in_channels"]),
        conv_channels=int(meta["meta.conv_channels"]),
        hidden_dim=int(meta["meta.hidden_dim"]),
        classes=int(meta["meta.classes"]),
        neurons_per_class=int(meta["meta.neurons_per_class"]),
        time_steps=int(meta["meta.time_steps"]),
        dropout=float(meta["meta.dropout"]),
        lif=LIFParams(
            tau_m=float(meta["meta.tau_m"]),
            threshold=float(meta["meta.threshold"]),
            resistance=float(meta["meta.resistance"]),
        ),
        surrogate_alpha=float(meta["meta.surrogate_alpha"]),
    )


def _write_record(fh, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)
    fh.write(struct.pack("<I", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(arr.tobytes())


def save_checkpoint(path, network: Network) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        for name, value in _spec_meta(network.spec).items():
            _write_record(fh, name, np.array([value], dtype="<f4"))
        for name, arr in network.named_params().items():
            _write_record(fh, name, arr)
        for name, arr in network.named_buffers().items():
            _write_record(fh, name, arr)


def _read_records(path) -> dict[str, np.ndarray]:
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: bad checkpoint magic")
    pos = len(CHECKPOINT_MAGIC)
    records = {}
    while pos < len(data):
        (name_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<I", data, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(dims)
        pos += 4 * count
        records[name] = arr.copy()
    return records


def load_checkpoint(path, dtype=np.float32) -> Network:
    records = _read_records(path)
    meta = {k: float(v[0]) for k, v in records.items() if k.startswith("meta.")}
    spec = _spec_from_meta(meta)
    network = Network(spec, rng=np.random.default_rng(0), dtype=dtype)
    for name, arr in network.named_params().items():
        if name not in records:
            raise ValueError(f"checkpoint missing parameter {name}")
        arr[...] = records[name].astype(dtype)
    for name, arr in network.named_buffers().items():
        if name not in records:
            raise ValueError(f"checkpoint missing buffer {name}")
        arr[...] = records[name].astype(dtype)
    return network
