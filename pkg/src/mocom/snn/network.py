"""The motion-recognition network: architecture plus explicit backprop.

Two spiking 3x3/128 conv blocks (batchnorm, LIF, 4x4 maxpool), a dense
spiking encoder, and a 50-neuron spiking head voted 10-per-class into 5
class rates. No layer carries a bias; batchnorm shift starts at zero, so
an all-zero input yields all-zero scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import (
    BatchNorm,
    Conv3x3,
    Dropout,
    Flatten,
    Layer,
    LIF,
    Linear,
    MaxPool,
    VotingHead,
)


@dataclass(frozen=True)
class LIFParams:
    tau_m: float = 2.0
    threshold: float = 1.0
    resistance: float = 1.0

    def __post_init__(self):
        if self.tau_m <= 0 or self.threshold <= 0:
            raise ValueError("tau_m and threshold must be positive")


@dataclass(frozen=True)
class NetworkSpec:
    input_hw: tuple[int, int] = (128, 128)
    in_channels: int = 2
    conv_channels: int = 128
    hidden_dim: int = 128
    classes: int = 5
    neurons_per_class: int = 10
    time_steps: int = 16
    dropout: float = 0.5
    lif: LIFParams = field(default_factory=LIFParams)
    surrogate_alpha: float = 2.0

    def __post_init__(self):
        h, w = self.input_hw
        if h % 16 or w % 16:
            raise ValueError("input sides must be divisible by 16 (two 4x4 pools)")

    @property
    def fc_in(self) -> int:
        h, w = self.input_hw
        return self.conv_channels * (h // 16) * (w // 16)

    @property
    def head_dim(self) -> int:
        return self.classes * self.neurons_per_class


def lif_step(h, current, p: LIFParams = LIFParams()):
    """One integrate-and-fire step: decay, integrate, threshold, hard reset.

    Returns (next potential, spike). Works elementwise on arrays.
    """
    h_pre = np.asarray(h) * np.exp(-1.0 / p.tau_m) + p.resistance * np.asarray(current)
    spike = (h_pre >= p.threshold).astype(np.float64)
    return h_pre * (1.0 - spike), spike


def param_count(spec: NetworkSpec) -> int:
    """Exact trainable parameter count from layer shapes (no biases)."""
    c = spec.conv_channels
    return (
        9 * spec.in_channels * c
        + 9 * c * c
        + 2 * (2 * c)  # two batchnorms, gamma + beta each
        + spec.fc_in * spec.hidden_dim
        + spec.hidden_dim * spec.head_dim
    )


class Network:
    """Layer stack with persistent LIF state across the sample's time steps."""

    def __init__(self, spec: NetworkSpec, rng: np.random.Generator,
                 dtype=np.float32, smooth: bool = False, input_grad: bool = False):
        self.spec = spec
        self.dtype = dtype
        self.input_grad = input_grad
        t = spec.time_steps
        lif_kw = dict(
            time_steps=t,
            tau_m=spec.lif.tau_m,
            threshold=spec.lif.threshold,
            resistance=spec.lif.resistance,
            alpha=spec.surrogate_alpha,
            smooth=smooth,
        )
        c = spec.conv_channels
        self.layers: list[tuple[str, Layer]] = [
            ("conv1", Conv3x3(spec.in_channels, c, rng, dtype, first_layer=not input_grad)),
            ("bn1", BatchNorm(c, dtype)),
            ("lif1", LIF(**lif_kw)),
            ("pool1", MaxPool(4)),
            ("conv2", Conv3x3(c, c, rng, dtype, cache_cols=True)),
            ("bn2", BatchNorm(c, dtype)),
            ("lif2", LIF(**lif_kw)),
            ("pool2", MaxPool(4)),
            ("flatten", Flatten()),
            ("drop1", Dropout(spec.dropout, t)),
            ("fc1", Linear(spec.fc_in, spec.hidden_dim, rng, dtype)),
            ("lif3", LIF(**lif_kw)),
            ("drop2", Dropout(spec.dropout, t)),
            ("fc2", Linear(spec.hidden_dim, spec.head_dim, rng, dtype)),
            ("lif4", LIF(**lif_kw)),
            ("vote", VotingHead(spec.classes, spec.neurons_per_class, t)),
        ]

    def set_rng(self, rng: np.random.Generator) -> None:
        for _, layer in self.layers:
            if isinstance(layer, Dropout):
                layer.rng = rng

    def _to_channel_major(self, x: np.ndarray) -> np.ndarray:
        t, b, c, h, w = x.shape
        if t != self.spec.time_steps:
            raise ValueError(f"expected {self.spec.time_steps} time steps, got {t}")
        if (h, w) != self.spec.input_hw or c != self.spec.in_channels:
            raise ValueError(f"input shape {x.shape[2:]} does not match the spec")
        return np.ascontiguousarray(
            x.transpose(2, 0, 1, 3, 4).reshape(c, t * b, h, w), dtype=self.dtype
        )

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """x: [T, B, C, H, W] analog counts -> class scores [B, classes]."""
        h = self._to_channel_major(x)
        for _, layer in self.layers:
            h = layer.forward(h, train)
        return h

    def backward(self, gscores: np.ndarray) -> np.ndarray | None:
        g = gscores.astype(self.dtype)
        for _, layer in reversed(self.layers):
            g = layer.backward(g)
        if g is None:
            return None
        c, n, h, w = g.shape
        t = self.spec.time_steps
        return g.reshape(c, t, n // t, h, w).transpose(1, 2, 0, 3, 4)

    def named_params(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self.layers:
            for pname, arr in layer.params().items():
                out[f"{name}.{pname}"] = arr
        return out

    def named_grads(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self.layers:
            for pname, arr in layer.grads().items():
                out[f"{name}.{pname}"] = arr
        return out

    def named_buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self.layers:
            for bname, arr in layer.buffers().items():
                out[f"{name}.{bname}"] = arr
        return out

    def zero_grads(self) -> None:
        for g in self.named_grads().values():
            g[...] = 0.0

    def param_count(self) -> int:
        return sum(p.size for p in self.named_params().values())


def loss_mse(pred: np.ndarray, target: np.ndarray) -> float:
    """Sum of squared class errors per sample, averaged over the batch."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    return float((diff * diff).sum() / pred.shape[0])


def loss_mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 2.0 * (pred - target) / pred.shape[0]
