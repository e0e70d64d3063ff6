"""Operation counts and the energy model.

Energy uses the standard 45 nm CMOS costs: 0.9 pJ per accumulate (AC) and
4.6 pJ per multiply-accumulate (MAC). Attribution convention: the first
conv layer sees analog input and batchnorm applies a per-activation
multiply, so both count as MACs (structural, input-independent); every
synaptic operation triggered by a spike downstream (second conv and both
dense layers) counts as an AC, measured on a probe set because spike
counts are data-dependent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Network, NetworkSpec, param_count

AC_PICOJOULES = 0.9
MAC_PICOJOULES = 4.6

_SPIKE_DRIVEN = ("conv2", "fc1", "fc2")


@dataclass
class CostReport:
    params: int
    acs: float  # accumulates per inference (probe average)
    macs: float  # multiply-accumulates per inference (structural)
    energy_mj: float

    @property
    def acs_g(self) -> float:
        return self.acs / 1e9

    @property
    def macs_g(self) -> float:
        return self.macs / 1e9


def energy_mj(acs: float, macs: float) -> float:
    """Exact linear energy functional, in millijoules."""
    return (AC_PICOJOULES * 1e-12 * acs + MAC_PICOJOULES * 1e-12 * macs) * 1e3


def structural_macs(spec: NetworkSpec) -> int:
    """Analog-input conv plus the two batchnorm multiply paths, per inference."""
    h, w = spec.input_hw
    t = spec.time_steps
    c = spec.conv_channels
    conv1 = 9 * spec.in_channels * c * h * w * t
    bn1 = c * h * w * t
    bn2 = c * (h // 4) * (w // 4) * t
    return conv1 + bn1 + bn2


def count_cost(network: Network, probe: np.ndarray) -> CostReport:
    """Measure spike-driven ACs on probe samples [N, T, 2, H, W].

    Probe tensors should be normalised the same way as network inputs.
    """
    if len(probe) == 0:
        raise ValueError("probe must contain at least one sample")
    total_acs = 0
    for sample in probe:
        x = network._to_channel_major(sample[:, None])
        h = x
        for name, layer in network.layers:
            if name in _SPIKE_DRIVEN:
                total_acs += layer.count_synaptic_ops(h)
            h = layer.forward(h, train=False)
    acs = total_acs / len(probe)
    macs = structural_macs(network.spec)
    return CostReport(
        params=param_count(network.spec),
        acs=acs,
        macs=float(macs),
        energy_mj=energy_mj(acs, macs),
    )
