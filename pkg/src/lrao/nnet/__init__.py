from .cost import (CostBatch, DegenerateOutputError, InputScaling, cost, cost_grad, evaluate,
                   prepare_batch, robust_normalize)
from .network import ConvNetParams, backward, forward, init_params
from .optim import AdamW, AdamWState, adamw_step
from .training import TrainConfig, TrainTrace, train, train_epochs

__all__ = [
    "AdamW", "AdamWState", "ConvNetParams", "CostBatch", "DegenerateOutputError",
    "InputScaling", "TrainConfig", "TrainTrace", "adamw_step", "backward", "cost",
    "cost_grad", "evaluate", "forward", "init_params", "prepare_batch", "robust_normalize",
    "train", "train_epochs",
]
