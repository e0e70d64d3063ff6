"""Deterministic SGD training over recognition sample sets.

A fixed seed pins weight init, the stratified 3:1 split, batch order and
dropout masks, so repeated runs produce byte-identical checkpoints and
curves. Optimiser: SGD with momentum and a cosine-decayed learning rate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import Network, NetworkSpec, loss_mse, loss_mse_grad


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 8
    learning_rate: float = 0.1
    momentum: float = 0.9
    seed: int = 0
    target_acc: float | None = None  # early stop once test accuracy reaches this

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class SampleSet:
    """Labelled equal-count tensors, stored compactly as uint8 counts."""

    tensors: np.ndarray  # [N, F, 2, H, W] uint8
    labels: np.ndarray  # [N] int64
    class_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.tensors) != len(self.labels):
            raise ValueError("tensors and labels must align")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def time_steps(self) -> int:
        return self.tensors.shape[1]


@dataclass
class CurveRow:
    epoch: int
    train_acc: float
    test_acc: float
    train_loss: float
    test_loss: float


@dataclass
class TrainResult:
    network: Network
    curves: list[CurveRow]
    train_idx: np.ndarray
    test_idx: np.ndarray
    final_test_acc: float
    epochs_run: int


def normalize_batch(tensors: np.ndarray, dtype=np.float32) -> np.ndarray:
    """[B, F, 2, H, W] counts -> [T, B, 2, H, W] scaled by per-sample max."""
    x = tensors.astype(dtype)
    peak = x.max(axis=(1, 2, 3, 4), keepdims=True)
    np.maximum(peak, 1.0, out=peak)
    x /= peak
    return np.ascontiguousarray(x.transpose(1, 0, 2, 3, 4))


def stratified_split(labels: np.ndarray, rng: np.random.Generator,
                     train_fraction: float = 0.75):
    """Per-class shuffle then split, so no class is absent from training."""
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        cut = max(1, int(round(len(idx) * train_fraction)))
        train_idx.append(idx[:cut])
        test_idx.append(idx[cut:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def evaluate(network: Network, dataset: SampleSet, idx: np.ndarray,
             batch_size: int = 16) -> tuple[float, float]:
    """(accuracy, mean loss) over the given sample indices, eval mode."""
    classes = network.spec.classes
    correct = 0
    loss_total = 0.0
    for lo in range(0, len(idx), batch_size):
        sel = idx[lo:lo + batch_size]
        x = normalize_batch(dataset.tensors[sel], dtype=network.dtype)
        scores = network.forward(x, train=False)
        labels = dataset.labels[sel]
        onehot = np.eye(classes, dtype=scores.dtype)[labels]
        loss_total += loss_mse(scores, onehot) * len(sel)
        correct += int((scores.argmax(axis=1) == labels).sum())
    return correct / len(idx), loss_total / len(idx)


def cosine_lr(base: float, epoch: int, total_epochs: int) -> float:
    return 0.5 * base * (1.0 + np.cos(np.pi * epoch / total_epochs))


def train(dataset: SampleSet, spec: NetworkSpec, cfg: TrainConfig) -> TrainResult:
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if dataset.time_steps != spec.time_steps:
        raise ValueError(
            f"dataset has {dataset.time_steps} blocks but the network expects "
            f"{spec.time_steps} time steps"
        )
    if len(np.unique(dataset.labels)) < spec.classes:
        raise ValueError("dataset does not cover every class")
    rng = np.random.default_rng(cfg.seed)
    network = Network(spec, rng)
    network.set_rng(rng)
    train_idx, test_idx = stratified_split(dataset.labels, rng)

    params = network.named_params()
    velocity = {name: np.zeros_like(p) for name, p in params.items()}
    classes = spec.classes
    eye = np.eye(classes, dtype=network.dtype)

    curves: list[CurveRow] = []
    epochs_run = 0
    test_acc = 0.0
    for epoch in range(cfg.epochs):
        lr = cosine_lr(cfg.learning_rate, epoch, cfg.epochs)
        order = train_idx[rng.permutation(len(train_idx))]
        seen = correct = 0
        loss_sum = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            sel = order[lo:lo + cfg.batch_size]
            x = normalize_batch(dataset.tensors[sel], dtype=network.dtype)
            labels = dataset.labels[sel]
            onehot = eye[labels]
            network.zero_grads()
            scores = network.forward(x, train=True)
            loss_sum += loss_mse(scores, onehot) * len(sel)
            correct += int((scores.argmax(axis=1) == labels).sum())
            seen += len(sel)
            network.backward(loss_mse_grad(scores, onehot))
            grads = network.named_grads()
            for name, p in params.items():
                v = velocity[name]
                v *= cfg.momentum
                v -= lr * grads[name]
                p += v
        test_acc, test_loss = evaluate(network, dataset, test_idx,
                                       batch_size=max(cfg.batch_size, 8))
        curves.append(
            CurveRow(
                epoch=epoch,
                train_acc=correct / seen,
                test_acc=test_acc,
                train_loss=loss_sum / seen,
                test_loss=test_loss,
            )
        )
        epochs_run = epoch + 1
        if cfg.target_acc is not None and test_acc >= cfg.target_acc:
            break
    return TrainResult(
        network=network,
        curves=curves,
        train_idx=train_idx,
        test_idx=test_idx,
        final_test_acc=test_acc,
        epochs_run=epochs_run,
    )


def save_curves(path, curves: list[CurveRow]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_acc", "test_acc", "train_loss", "test_loss"])
        for row in curves:
            writer.writerow(
                [row.epoch, f"{row.train_acc:.6f}", f"{row.test_acc:.6f}",
                 f"{row.train_loss:.6f}", f"{row.test_loss:.6f}"]
            )
