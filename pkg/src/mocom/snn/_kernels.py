"""Elementwise inner loops of the training hot path, written as fused
numpy passes with explicit `out=` buffers.

Shapes: LIF kernels see [C, T, K] (K = everything per step), batchnorm
kernels see [C, M], pooling sees [C, N, H, W]. Ownership is explicit:
`lif_forward` may overwrite its input (the potentials cache reuses that
buffer) and the backward kernels overwrite the incoming gradient.
"""

from __future__ import annotations

import numpy as np

from .surrogate import smooth_step, surrogate_grad


# ---------------------------------------------------------------------------
# LIF scan
# ---------------------------------------------------------------------------

def lif_forward(x, decay, r, th, alpha, smooth, want_hpre):
    """x: [C, T, K] input currents -> (spikes, hpre or None).

    Overwrites x: after the call it holds the pre-reset potentials, which
    double as the backward cache. The returned spikes array is fresh.
    """
    c, t_steps, k = x.shape
    dt = x.dtype.type
    decay, r, th, alpha = dt(decay), dt(r), dt(th), dt(alpha)
    spikes = np.empty_like(x)
    h = np.zeros((c, k), dtype=x.dtype)
    fired = np.empty((c, k), dtype=bool)
    for t in range(t_steps):
        xt = x[:, t]
        st = spikes[:, t]
        np.multiply(h, decay, out=h)
        if r != 1.0:
            np.multiply(xt, r, out=xt)
        np.add(h, xt, out=xt)  # xt now holds h_pre (cached in place)
        if smooth:
            np.subtract(xt, th, out=st)
            st[...] = smooth_step(st, alpha)
            np.subtract(dt(1.0), st, out=h)
            np.multiply(h, xt, out=h)
        else:
            np.greater_equal(xt, th, out=fired)
            st[...] = fired
            h[...] = xt
            h[fired] = 0.0
    return spikes, (x if want_hpre else None)


def lif_backward(gs, hpre, decay, r, th, alpha, smooth):
    """gs, hpre: [C, T, K]. Overwrites gs with the input-current gradient.

    Spiking mode detaches the reset branch (dh/dh_pre = 1 - S with S held
    constant); smooth mode is the exact derivative of the smooth forward,
    including the reset product term.
    """
    if smooth:
        return _lif_backward_smooth(gs, hpre, decay, r, th, alpha)
    c, t_steps, k = gs.shape
    dt = gs.dtype.type
    decay, r, th = dt(decay), dt(r), dt(th)
    gh = np.zeros((c, k), dtype=gs.dtype)
    ds = np.empty((c, k), dtype=gs.dtype)
    fired = np.empty((c, k), dtype=bool)
    for t in reversed(range(t_steps)):
        hp = hpre[:, t]
        gt = gs[:, t]
        np.subtract(hp, th, out=ds)
        np.multiply(ds, dt(np.pi) * dt(alpha) / dt(2.0), out=ds)
        np.multiply(ds, ds, out=ds)
        np.add(ds, dt(1.0), out=ds)
        np.divide(dt(alpha) / dt(2.0), ds, out=ds)  # arctan surrogate slope
        np.greater_equal(hp, th, out=fired)
        gh[fired] = 0.0  # * (1 - S), reset detached
        np.multiply(gt, ds, out=gt)
        np.add(gt, gh, out=gt)  # ghp = gy*s' + gh*(1-S)
        np.multiply(gt, decay, out=gh)
        if r != 1.0:
            np.multiply(gt, r, out=gt)
    return gs


def _lif_backward_smooth(gs, hpre, decay, r, th, alpha):
    """Exact gradient of the smooth forward (reset path included)."""
    t_steps = gs.shape[1]
    dt = gs.dtype.type
    gh = np.zeros((gs.shape[0], gs.shape[2]), dtype=gs.dtype)
    for t in reversed(range(t_steps)):
        hp = hpre[:, t]
        gt = gs[:, t]
        u = hp - th
        ds = surrogate_grad(u, alpha)
        dh = (1.0 - smooth_step(u, alpha)) - hp * ds
        ghp = gt * ds + gh * dh
        np.multiply(ghp, dt(decay), out=gh)
        np.multiply(ghp, dt(r), out=gs[:, t])
    return gs


# ---------------------------------------------------------------------------
# Batchnorm pieces
# ---------------------------------------------------------------------------

def channel_stats(x):
    """x: [C, M] -> (sum, sum of squares) per channel."""
    s1 = x.sum(axis=1, dtype=np.float64)
    s2 = np.einsum("ij,ij->i", x, x, dtype=np.float64)
    return s1, s2


def channel_affine(x, scale, shift, out=None):
    """y[c, i] = x[c, i] * scale[c] + shift[c]."""
    scale = scale.astype(x.dtype)[:, None]
    shift = shift.astype(x.dtype)[:, None]
    if out is None:
        out = np.empty_like(x)
    np.multiply(x, scale, out=out)
    np.add(out, shift, out=out)
    return out


def bn_reduce(gy, x):
    """(sum gy, sum gy * x) per channel."""
    s1 = gy.sum(axis=1, dtype=np.float64)
    s2 = np.einsum("ij,ij->i", gy, x, dtype=np.float64)
    return s1, s2


def bn_gx(gy, x, a, b, d):
    """gx[c, i] = a[c]*gy[c, i] + b[c]*x[c, i] + d[c]; overwrites gy."""
    a = a.astype(gy.dtype)[:, None]
    b = b.astype(gy.dtype)[:, None]
    d = d.astype(gy.dtype)[:, None]
    np.multiply(gy, a, out=gy)
    tmp = np.multiply(x, b)
    np.add(gy, tmp, out=gy)
    np.add(gy, d, out=gy)
    return gy


# ---------------------------------------------------------------------------
# Max pooling (k x k, stride k)
# ---------------------------------------------------------------------------

def pool_forward(x, k):
    """x: [C, N, H, W] -> max over non-overlapping k x k windows."""
    c, n, h, w = x.shape
    win = x.reshape(c, n, h // k, k, w // k, k)
    return win.max(axis=(3, 5))


def pool_backward(gy, x, out, k):
    """Split each window's gradient equally among its tied maxima.

    With continuous activations ties have measure zero and this is the
    usual max-pool gradient; with binary spikes it spreads the gradient
    across every spike that attained the window maximum.
    """
    c, n, h, w = x.shape
    win = x.reshape(c, n, h // k, k, w // k, k)
    out_b = out[:, :, :, None, :, None]
    mask = (win == out_b)
    counts = mask.sum(axis=(3, 5))
    scale = (gy / counts).astype(gy.dtype)[:, :, :, None, :, None]
    gx = np.multiply(mask, scale, dtype=gy.dtype)
    return gx.reshape(c, n, h, w)
