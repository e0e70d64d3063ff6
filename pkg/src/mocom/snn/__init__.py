from .network import (
    LIFParams,
    Network,
    NetworkSpec,
    lif_step,
    loss_mse,
    loss_mse_grad,
    param_count,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .cost import AC_PICOJOULES, MAC_PICOJOULES, CostReport, count_cost, energy_mj, structural_macs
from .surrogate import heaviside, smooth_step, surrogate_grad
from .train import (
    CurveRow,
    SampleSet,
    TrainConfig,
    TrainResult,
    evaluate,
    normalize_batch,
    save_curves,
    stratified_split,
    train,
)

__all__ = [
    "AC_PICOJOULES",
    "MAC_PICOJOULES",
    "CostReport",
    "CurveRow",
    "LIFParams",
    "Network",
    "NetworkSpec",
    "SampleSet",
    "TrainConfig",
    "TrainResult",
    "count_cost",
    "energy_mj",
    "evaluate",
    "heaviside",
    "lif_step",
    "load_checkpoint",
    "loss_mse",
    "loss_mse_grad",
    "normalize_batch",
    "param_count",
    "save_checkpoint",
    "save_curves",
    "smooth_step",
    "stratified_split",
    "structural_macs",
    "surrogate_grad",
    "train",
]
