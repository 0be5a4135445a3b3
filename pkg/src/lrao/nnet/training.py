"""Full-batch training with validation early stopping."""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import network
from .cost import DegenerateOutputError, InputScaling, evaluate, prepare_batch
from .optim import AdamW

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    step_dtheta: float = 1e-2
    learning_rate: float = 1e-4
    weight_decay: float = 1e-5
    patience: int = 3
    max_epochs: int = 500
    seed: int = 0
    num_layers: int = 3
    channels: int = 20
    filter_width: int = 3
    margin: int = None
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    mu0: str = "zero"
    freeze_psd: bool = False
    input_scaling: str = "sequence"

    def __post_init__(self):
        for name in ("step_dtheta", "learning_rate", "max_epochs", "patience"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")

    @property
    def edge_margin(self):
        """Interior-shift margin; defaults to the receptive-field radius."""
        if self.margin is not None:
            return self.margin
        return self.num_layers * (self.filter_width - 1) // 2

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


@dataclass
class TrainTrace:
    """Per-epoch costs; index 0 is the initialization."""

    train_cost: list = field(default_factory=list)
    validation_cost: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_reason: str = ""

    @property
    def epochs(self):
        return len(self.validation_cost) - 1


def make_scaling(cfg, noise):
    if cfg.input_scaling == "fixed":
        return InputScaling.fitted(noise)
    return InputScaling(cfg.input_scaling)


def _evaluate(params, batch, cfg, grad=False):
    return evaluate(params, batch, grad=grad, mu0=cfg.mu0, freeze_psd=cfg.freeze_psd)


def train(noise_train, noise_val, hm, cfg=TrainConfig(), init=None, scaling=None):
    """Train with AdamW on the full training batch, early-stopping on validation cost.

    Returns the parameters of the best validation epoch and the trace.
    """
    scaling = scaling if scaling is not None else make_scaling(cfg, noise_train)
    params = init.copy() if init is not None else network.init_params(
        cfg.num_layers, cfg.channels, cfg.filter_width, seed=cfg.seed)
    tb = prepare_batch(noise_train, hm, cfg.step_dtheta, cfg.edge_margin, scaling)
    vb = prepare_batch(noise_val, hm, cfg.step_dtheta, cfg.edge_margin, scaling)
    opt = AdamW(cfg.learning_rate, cfg.weight_decay, tuple(cfg.betas), cfg.eps)
    trace = TrainTrace()
    best = params.copy()
    epoch = 0
    try:
        trace.validation_cost.append(_evaluate(params, vb, cfg).cost)
        best_val, wait = trace.validation_cost[0], 0
        res = _evaluate(params, tb, cfg, grad=True)
        trace.train_cost.append(res.cost)
        trace.stopped_reason = "max_epochs"
        for epoch in range(1, cfg.max_epochs + 1):
            params = network.ConvNetParams(opt.step(params.kernels, res.grads), gain=params.gain,
                                           seed=params.seed, meta=params.meta)
            val = _evaluate(params, vb, cfg).cost
            trace.validation_cost.append(val)
            if val < best_val:
                best_val, best, wait = val, params.copy(), 0
                trace.best_epoch = epoch
            else:
                wait += 1
            if wait >= cfg.patience:
                trace.stopped_reason = "patience"
                break
            if epoch < cfg.max_epochs:
                res = _evaluate(params, tb, cfg, grad=True)
                trace.train_cost.append(res.cost)
    except DegenerateOutputError as exc:
        raise DegenerateOutputError(f"epoch {epoch}: {exc}") from exc
    logger.debug("training stopped at epoch %d (%s), best epoch %d",
                 epoch, trace.stopped_reason, trace.best_epoch)
    best.meta.update(scaling=scaling)
    return best, trace


def train_epochs(noise, hm, epochs, cfg=TrainConfig(), init=None, scaling=None):
    """Train for a fixed number of epochs without validation (used after CV epoch selection)."""
    scaling = scaling if scaling is not None else make_scaling(cfg, noise)
    params = init.copy() if init is not None else network.init_params(
        cfg.num_layers, cfg.channels, cfg.filter_width, seed=cfg.seed)
    tb = prepare_batch(noise, hm, cfg.step_dtheta, cfg.edge_margin, scaling)
    opt = AdamW(cfg.learning_rate, cfg.weight_decay, tuple(cfg.betas), cfg.eps)
    costs = []
    for epoch in range(epochs):
        try:
            res = _evaluate(params, tb, cfg, grad=True)
        except DegenerateOutputError as exc:
            raise DegenerateOutputError(f"epoch {epoch}: {exc}") from exc
        costs.append(res.cost)
        params = network.ConvNetParams(opt.step(params.kernels, res.grads), gain=params.gain,
                                       seed=params.seed, meta=params.meta)
    params.meta.update(scaling=scaling)
    return params, costs
