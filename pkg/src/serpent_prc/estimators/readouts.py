"""Scikit-learn style readouts trained on delay-embedded reservoir states."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import ShapeError
from .nn import LSTMNet, MLPNet, Params
from .optim import TrainConfig, predict_batched, train
from .ridge import ridge_fit

_DTYPES = {"float32": np.float32, "float64": np.float64}


class _GradientReadout(RegressorMixin, BaseEstimator):
    """Shared fit/predict plumbing around :func:`train`.

    ``fit(X, y, eval_set=(X_val, y_val))`` uses the given validation data for the
    learning-rate schedule and best-weight selection; without it the last
    ``validation_fraction`` of the samples is held out.
    """

    _input_ndim = 2

    def _train_config(self) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size, initial_lr=self.learning_rate,
                           lr_decay=self.lr_decay, patience=self.patience, stop_lr=self.stop_lr,
                           max_epochs=self.max_epochs, seed=self.random_state)

    def _check_X(self, X, reset: bool = False):
        X = np.asarray(X, dtype=_DTYPES[self.dtype])
        if self._input_ndim == 2:
            X = check_array(X, dtype=_DTYPES[self.dtype])
        elif X.ndim != 3:
            raise ShapeError("expected (n_samples, seq_len, n_features) sequences")
        if reset:
            self.n_features_in_ = X.shape[-1]
        elif X.shape[-1] != self.n_features_in_:
            raise ShapeError(f"X has {X.shape[-1]} features, readout was fitted with {self.n_features_in_}")
        return X

    def _make_net(self, n_in: int, n_out: int):
        raise NotImplementedError

    def fit(self, X, y, eval_set=None):
        X = self._check_X(X, reset=True)
        y = check_array(y, dtype=X.dtype)
        if eval_set is None:
            n_val = max(1, int(round(len(X) * self.validation_fraction)))
            X, X_val, y, y_val = X[:-n_val], X[-n_val:], y[:-n_val], y[-n_val:]
        else:
            X_val = self._check_X(eval_set[0])
            y_val = check_array(eval_set[1], dtype=X.dtype)
        self.n_outputs_ = y.shape[1]
        self.net_ = self._make_net(X.shape[-1], y.shape[1])
        rng = np.random.default_rng(self.random_state)
        params = self.net_.init(rng, dtype=X.dtype)
        self.params_, self.curve_ = train(self.net_, params, X, y, X_val, y_val, self._train_config())
        self.best_val_loss_ = min(c["val_loss"] for c in self.curve_)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = self._check_X(X)
        return predict_batched(self.net_, self.params_, X)

    def restore(self, params: Params, n_features: int, n_outputs: int, curve=None):
        """Install trained weights (e.g. from a checkpoint) without fitting."""
        self.n_features_in_ = n_features
        self.n_outputs_ = n_outputs
        self.net_ = self._make_net(n_features, n_outputs)
        self.params_ = {k: np.asarray(v, dtype=_DTYPES[self.dtype]) for k, v in params.items()}
        self.curve_ = list(curve or [])
        self.best_val_loss_ = min((c["val_loss"] for c in self.curve_), default=float("nan"))
        return self


class MLPReadout(_GradientReadout):
    """Nonlinear readout: tanh hidden layers and a linear output layer."""

    def __init__(self, hidden_layer_sizes=(512, 512, 512), batch_size=512, learning_rate=1e-3,
                 lr_decay=0.1, patience=3, stop_lr=1e-6, max_epochs=1000, validation_fraction=0.1,
                 random_state=0, dtype="float64"):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.patience = patience
        self.stop_lr = stop_lr
        self.max_epochs = max_epochs
        self.validation_fraction = validation_fraction
        self.random_state = random_state
        self.dtype = dtype

    def _make_net(self, n_in, n_out):
        return MLPNet((n_in, *self.hidden_layer_sizes, n_out))


class LinearReadout(_GradientReadout):
    """Linear readout ``y = x W + b``.

    ``solver="adam"`` trains with the same loop as the nonlinear readouts;
    ``solver="ridge"`` solves the regularized normal equations directly and
    records no training curve.
    """

    def __init__(self, solver="adam", alpha=0.0, batch_size=512, learning_rate=1e-3, lr_decay=0.1,
                 patience=3, stop_lr=1e-6, max_epochs=1000, validation_fraction=0.1, random_state=0,
                 dtype="float64"):
        self.solver = solver
        self.alpha = alpha
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.patience = patience
        self.stop_lr = stop_lr
        self.max_epochs = max_epochs
        self.validation_fraction = validation_fraction
        self.random_state = random_state
        self.dtype = dtype

    def _make_net(self, n_in, n_out):
        return MLPNet((n_in, n_out))

    def fit(self, X, y, eval_set=None):
        if self.solver == "adam":
            return super().fit(X, y, eval_set)
        if self.solver != "ridge":
            raise ValueError(f"unknown solver {self.solver!r}; use 'adam' or 'ridge'")
        X = self._check_X(X, reset=True)
        y = check_array(y, dtype=X.dtype)
        W, b = ridge_fit(X, y, self.alpha)
        return self.restore({"W0": W, "b0": b}, X.shape[1], y.shape[1])

    @property
    def coef_(self) -> np.ndarray:
        check_is_fitted(self, "params_")
        return self.params_["W0"].T

    @property
    def intercept_(self) -> np.ndarray:
        check_is_fitted(self, "params_")
        return self.params_["b0"]


class LSTMReadout(_GradientReadout):
    """Single-layer LSTM over ``(N, H, 27)`` frame windows with a linear head."""

    _input_ndim = 3

    def __init__(self, hidden_size=512, batch_size=512, learning_rate=1e-3, lr_decay=0.1, patience=3,
                 stop_lr=1e-6, max_epochs=1000, validation_fraction=0.1, random_state=0, dtype="float64"):
        self.hidden_size = hidden_size
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.patience = patience
        self.stop_lr = stop_lr
        self.max_epochs = max_epochs
        self.validation_fraction = validation_fraction
        self.random_state = random_state
        self.dtype = dtype

    def _make_net(self, n_in, n_out):
        return LSTMNet(n_in, self.hidden_size, n_out)
