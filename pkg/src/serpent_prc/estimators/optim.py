"""Adam and the mini-batch training loop shared by every gradient-trained readout."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..exceptions import TrainingDivergedError
from .nn import Params, mse

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 512
    initial_lr: float = 1e-3
    lr_decay: float = 0.1
    patience: int = 3
    stop_lr: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.lr_decay < 1:
            raise ValueError("lr_decay must lie in (0, 1)")
        if not self.stop_lr < self.initial_lr:
            raise ValueError("stop_lr must be below initial_lr")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience and max_epochs must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: Params, grads: Params, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> Params:
    """Bias-corrected Adam update. Updates ``params`` in place and returns it."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for k, g in grads.items():
        if params[k].shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {k} {params[k].shape}")
        m = state.m.get(k)
        if m is None:
            m = state.m[k] = np.zeros_like(g)
            state.v[k] = np.zeros_like(g)
        v = state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params[k] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params


class PlateauSchedule:
    """Decays the learning rate after ``patience`` consecutive validation increases.

    An increase is measured against the previous check, not the best one; any
    non-increase resets the counter, and so does a decay.
    """

    def __init__(self, lr: float, decay: float = 0.1, patience: int = 3, stop_lr: float = 1e-6):
        self.lr = lr
        self.decay = decay
        self.patience = patience
        self.stop_lr = stop_lr
        self.previous: float | None = None
        self.increases = 0

    def update(self, val_loss: float) -> bool:
        """Record one check; True if the learning rate was decayed."""
        if self.previous is not None and val_loss > self.previous:
            self.increases += 1
        else:
            self.increases = 0
        self.previous = val_loss
        if self.increases >= self.patience:
            self.lr *= self.decay
            self.increases = 0
            return True
        return False

    @property
    def finished(self) -> bool:
        # tolerance keeps 1e-3 * 0.1**3 from counting as "below 1e-6"
        return self.lr < self.stop_lr * (1.0 - 1e-9)


def predict_batched(net, params: Params, X, batch: int = 4096) -> np.ndarray:
    if len(X) <= batch:
        return net.predict(params, X)
    return np.concatenate([net.predict(params, X[i:i + batch]) for i in range(0, len(X), batch)])


def train(net, params: Params, X, y, X_val, y_val, cfg: TrainConfig | None = None):
    """Mini-batch Adam with the plateau schedule; returns the best-validation weights.

    Returns ``(params, curve)`` where ``curve`` lists one dict per epoch with
    ``epoch``, ``train_loss``, ``val_loss`` and ``lr``.
    """
    cfg = cfg or TrainConfig()
    if len(X) == 0 or len(X_val) == 0:
        raise ValueError("training and validation sets must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState()
    schedule = PlateauSchedule(cfg.initial_lr, cfg.lr_decay, cfg.patience, cfg.stop_lr)
    best_loss = np.inf
    best = {k: v.copy() for k, v in params.items()}
    curve = []
    n = len(X)
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = net.loss_and_grad(params, X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}")
            total += loss * len(idx)
            adam_step(params, grads, state, schedule.lr, cfg.beta1, cfg.beta2, cfg.eps)
        val_loss = mse(predict_batched(net, params, X_val), y_val)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        curve.append({"epoch": epoch, "train_loss": total / n, "val_loss": val_loss, "lr": schedule.lr})
        if val_loss < best_loss:
            best_loss = val_loss
            best = {k: v.copy() for k, v in params.items()}
        if schedule.update(val_loss):
            log.debug("epoch %d: learning rate -> %g", epoch, schedule.lr)
        if schedule.finished:
            break
    return best, curve
