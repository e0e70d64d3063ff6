"""Spike nonlinearity and its arctan surrogate.

The hard threshold fires when the membrane potential reaches it. For
training, its zero-a.e. derivative is replaced by the arctan surrogate

    sg(u) = alpha / (2 * (1 + (pi * alpha * u / 2)^2)),

the derivative of the smooth step (1/pi) * arctan(pi*alpha*u/2) + 1/2.
The smooth step itself is used as a drop-in forward replacement when
validating backprop against finite differences.
"""

from __future__ import annotations

import numpy as np

DEFAULT_ALPHA = 2.0


def heaviside(u: np.ndarray) -> np.ndarray:
    return (u >= 0.0).astype(u.dtype)


def smooth_step(u: np.ndarray, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    return np.arctan(np.pi * alpha * u / 2.0) / np.pi + 0.5


def surrogate_grad(u: np.ndarray, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    z = np.pi * alpha * u / 2.0
    return alpha / (2.0 * (1.0 + z * z))
