"""Network layers with explicit forward/backward passes.

Layout convention: spatial tensors are channel-major [C, N, H, W] with
N = T * B (time-major within N), so convolution GEMMs read and write
channel-major blocks without transposes and LIF layers recover the time
axis by a plain reshape. Flatten converts to [N, D] for the dense head.

Hot elementwise paths (LIF scans, batchnorm, pooling) go through the
fused kernels in `_kernels`; convolutions are im2col GEMMs whose column
matrices are rebuilt in backward from the cached layer input, trading a
little compute for several hundred MB of activation memory.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class Layer:
    """Base: stateless unless it declares parameters."""

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def buffers(self) -> dict[str, np.ndarray]:
        """Non-trained state saved in checkpoints (e.g. BN running stats)."""
        return {}

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, gy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _im2col(x: np.ndarray) -> np.ndarray:
    """[C, N, H, W] -> [C*9, N*H*W] patches of the 3x3 pad-1 neighbourhood."""
    c, n, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((c, 3, 3, n, h, w), dtype=x.dtype)
    for ky in range(3):
        for kx in range(3):
            cols[:, ky, kx] = xp[:, :, ky:ky + h, kx:kx + w]
    return cols.reshape(c * 9, n * h * w)


def _col2im(cols: np.ndarray, shape) -> np.ndarray:
    """Adjoint of _im2col: scatter-add patches back onto the padded grid."""
    c, n, h, w = shape
    cols = cols.reshape(c, 3, 3, n, h, w)
    xp = np.zeros((c, n, h + 2, w + 2), dtype=cols.dtype)
    for ky in range(3):
        for kx in range(3):
            xp[:, :, ky:ky + h, kx:kx + w] += cols[:, ky, kx]
    return xp[:, :, 1:h + 1, 1:w + 1]


class Conv3x3(Layer):
    """3x3 convolution, stride 1, pad 1, no bias.

    cache_cols trades ~N*H*W*C*36 bytes of memory for skipping the im2col
    rebuild in backward; worthwhile for the deep/compact conv, not for the
    wide first one.
    """

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator,
                 dtype=np.float32, first_layer: bool = False, cache_cols: bool = False):
        self.c_in = c_in
        self.c_out = c_out
        self.first_layer = first_layer  # skip the input gradient
        self.cache_cols = cache_cols
        std = np.sqrt(2.0 / (9 * c_in))
        self.weight = (rng.standard_normal((c_out, c_in, 3, 3)) * std).astype(dtype)
        self.gw = np.zeros_like(self.weight)
        self._cache = None

    def params(self):
        return {"weight": self.weight}

    def grads(self):
        return {"weight": self.gw}

    def forward(self, x, train):
        c, n, h, w = x.shape
        cols = _im2col(x)
        y = (self.weight.reshape(self.c_out, -1) @ cols).reshape(self.c_out, n, h, w)
        if train:
            self._cache = (x.shape, cols if self.cache_cols else x)
        return y

    def backward(self, gy):
        x_shape, cached = self._cache
        self._cache = None
        cols = cached if self.cache_cols else _im2col(cached)
        gy_mat = gy.reshape(self.c_out, -1)
        self.gw += (gy_mat @ cols.T).reshape(self.weight.shape)
        if self.first_layer:
            return None
        del cols, cached
        gcols = self.weight.reshape(self.c_out, -1).T @ gy_mat
        return _col2im(gcols, x_shape)

    # spike-driven cost probe: accumulates = nonzero patch entries * fan-out
    def count_synaptic_ops(self, x) -> int:
        return int(np.count_nonzero(_im2col(x))) * self.c_out


class BatchNorm(Layer):
    """Per-channel batchnorm over (N, H, W); stats span time and batch."""

    def __init__(self, channels: int, dtype=np.float32):
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.g_gamma = np.zeros_like(self.gamma)
        self.g_beta = np.zeros_like(self.beta)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.g_gamma, "beta": self.g_beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, train):
        c = x.shape[0]
        x2 = x.reshape(c, -1)
        if train:
            s1, s2 = _kernels.channel_stats(x2)
            m = x2.shape[1]
            mean = s1 / m
            var = np.maximum(s2 / m - mean * mean, 0.0)
            self.running_mean += BN_MOMENTUM * (
                mean.astype(self.running_mean.dtype) - self.running_mean
            )
            self.running_var += BN_MOMENTUM * (
                var.astype(self.running_var.dtype) - self.running_var
            )
        else:
            mean = self.running_mean.astype(np.float64)
            var = self.running_var.astype(np.float64)
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        gamma = self.gamma.astype(np.float64)
        scale = gamma * inv_std
        shift = self.beta.astype(np.float64) - scale * mean
        y = _kernels.channel_affine(x2, scale, shift).reshape(x.shape)
        if train:
            self._cache = (x, mean, inv_std)
        return y

    def backward(self, gy):
        x, mean, inv_std = self._cache
        self._cache = None
        c = gy.shape[0]
        x2 = x.reshape(c, -1)
        gy2 = np.ascontiguousarray(gy.reshape(c, -1))
        m = gy2.shape[1]
        sum_gy, sum_gy_x = _kernels.bn_reduce(gy2, x2)
        d_beta = sum_gy
        d_gamma = inv_std * (sum_gy_x - mean * sum_gy)  # sum gy * x_hat
        self.g_beta += d_beta.astype(self.g_beta.dtype)
        self.g_gamma += d_gamma.astype(self.g_gamma.dtype)
        # gx = A*gy + B*x + D with per-channel coefficients
        a = self.gamma.astype(np.float64) * inv_std
        b = -a * inv_std * (d_gamma / m)
        d = -a * (d_beta / m) - b * mean
        gx = _kernels.bn_gx(gy2, x2, a, b, d)
        return gx.reshape(gy.shape)


class LIF(Layer):
    """Leaky integrate-and-fire over the time axis hidden inside N.

    H_pre(t) = H(t-1) * exp(-1/tau_m) + R * I(t); a spike fires when H_pre
    reaches the threshold and the potential hard-resets to zero. In the
    spiking mode the reset branch is detached from the gradient and the
    spike derivative is the arctan surrogate; in smooth mode the step is
    replaced by the smooth surrogate everywhere and the backward pass is
    the exact derivative of that smooth forward (finite-difference
    checkable).
    """

    def __init__(self, time_steps: int, tau_m: float = 2.0, threshold: float = 1.0,
                 resistance: float = 1.0, alpha: float = 2.0, smooth: bool = False):
        if tau_m <= 0 or threshold <= 0:
            raise ValueError("tau_m and threshold must be positive")
        self.time_steps = time_steps
        self.decay = float(np.exp(-1.0 / tau_m))
        self.threshold = threshold
        self.resistance = resistance
        self.alpha = alpha
        self.smooth = smooth
        self._hpre = None

    def _as_ctk(self, x):
        # [C, T*B, H, W] -> [C, T, B*H*W]; [T*B, D] -> [1, T, B*D]
        t = self.time_steps
        if x.ndim == 4:
            c, n, h, w = x.shape
            return x.reshape(c, t, (n // t) * h * w)
        n, d = x.shape
        return x.reshape(1, t, (n // t) * d)

    def forward(self, x, train):
        # consumes x: the buffer is reused as the pre-reset potential cache
        x = np.ascontiguousarray(x)
        xv = self._as_ctk(x)
        spikes, hpre = _kernels.lif_forward(
            xv, self.decay, self.resistance, self.threshold, self.alpha,
            self.smooth, want_hpre=train,
        )
        if train:
            self._hpre = hpre
        return spikes.reshape(x.shape)

    def backward(self, gy):
        # consumes gy: overwritten with the input-current gradient
        hpre = self._hpre
        self._hpre = None
        gv = np.ascontiguousarray(gy).reshape(hpre.shape)
        gx = _kernels.lif_backward(
            gv, hpre, self.decay, self.resistance, self.threshold, self.alpha,
            self.smooth,
        )
        return gx.reshape(gy.shape)


class MaxPool(Layer):
    """Non-overlapping k x k max pooling.

    The gradient of each window splits equally among its tied maxima; with
    continuous activations that reduces to the ordinary max-pool gradient.
    """

    def __init__(self, k: int = 4):
        self.k = k
        self._cache = None

    def forward(self, x, train):
        x = np.ascontiguousarray(x)
        out = _kernels.pool_forward(x, self.k)
        if train:
            self._cache = (x, out)
        return out

    def backward(self, gy):
        x, out = self._cache
        self._cache = None
        return _kernels.pool_backward(np.ascontiguousarray(gy), x, out, self.k)


class Flatten(Layer):
    """[C, N, H, W] -> [N, C*H*W] (dense-head layout)."""

    def __init__(self):
        self._shape = None

    def forward(self, x, train):
        c, n, h, w = x.shape
        self._shape = x.shape
        return np.ascontiguousarray(x.transpose(1, 0, 2, 3)).reshape(n, c * h * w)

    def backward(self, gy):
        c, n, h, w = self._shape
        return np.ascontiguousarray(
            gy.reshape(n, c, h, w).transpose(1, 0, 2, 3)
        )


class Dropout(Layer):
    """Inverted dropout; one mask per forward pass, shared across time."""

    def __init__(self, p: float, time_steps: int):
        self.p = p
        self.time_steps = time_steps
        self.rng: np.random.Generator | None = None
        self._mask = None

    def forward(self, x, train):
        if not train or self.p == 0.0:
            return x
        if self.rng is None:
            raise RuntimeError("dropout needs an RNG bound before training")
        t = self.time_steps
        n, d = x.shape
        mask = (self.rng.random((n // t, d)) >= self.p) / (1.0 - self.p)
        mask = mask.astype(x.dtype)
        self._mask = mask
        return (x.reshape(t, n // t, d) * mask).reshape(n, d)

    def backward(self, gy):
        if self._mask is None:
            return gy
        t = self.time_steps
        n, d = gy.shape
        gx = (gy.reshape(t, n // t, d) * self._mask).reshape(n, d)
        self._mask = None
        return gx


class Linear(Layer):
    """Fully connected, no bias. x: [N, D_in] -> [N, D_out]."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dtype=np.float32):
        std = np.sqrt(2.0 / d_in)
        self.weight = (rng.standard_normal((d_out, d_in)) * std).astype(dtype)
        self.gw = np.zeros_like(self.weight)
        self._cache = None

    def params(self):
        return {"weight": self.weight}

    def grads(self):
        return {"weight": self.gw}

    def forward(self, x, train):
        if train:
            self._cache = x
        return x @ self.weight.T

    def backward(self, gy):
        x = self._cache
        self._cache = None
        self.gw += gy.T @ x
        return gy @ self.weight

    def count_synaptic_ops(self, x) -> int:
        return int(np.count_nonzero(x)) * self.weight.shape[0]


class VotingHead(Layer):
    """Average spike trains of fixed-size neuron groups into class rates.

    Input [T*B, classes*group]; output [B, classes] = firing rate per
    class, averaged over the group and over time.
    """

    def __init__(self, classes: int, group: int, time_steps: int):
        self.classes = classes
        self.group = group
        self.time_steps = time_steps
        self._n = None

    def forward(self, x, train):
        t = self.time_steps
        n = x.shape[0]
        self._n = n
        b = n // t
        return x.reshape(t, b, self.classes, self.group).mean(axis=(0, 3))

    def backward(self, gy):
        t = self.time_steps
        n = self._n
        b = n // t
        g = np.broadcast_to(
            gy[None, :, :, None] / (t * self.group),
            (t, b, self.classes, self.group),
        )
        return np.ascontiguousarray(g.reshape(n, self.classes * self.group), dtype=gy.dtype)
