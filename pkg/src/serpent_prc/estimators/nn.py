"""Small numpy networks with hand-written backpropagation.

Parameters live in plain ``dict[str, ndarray]`` so the optimizer and the
checkpoint format can treat every model the same way. Losses are the mean of
the squared error over all samples and output coordinates.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..exceptions import ShapeError

Params = dict


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((pred - target) ** 2))


def _uniform(rng: np.random.Generator, fan_in: int, shape, dtype) -> np.ndarray:
    # U(-1/sqrt(fan_in), 1/sqrt(fan_in))
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# --------------------------------------------------------------------- MLP

def init_mlp(sizes: Sequence[int], rng: np.random.Generator, dtype=np.float64) -> Params:
    """Weights for layer widths ``sizes = (in, hidden..., out)``.

    ``len(sizes) - 1`` weight layers; ``sizes = (in, out)`` is a linear model.
    """
    params = {}
    for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        params[f"W{k}"] = _uniform(rng, a, (a, b), dtype)
        params[f"b{k}"] = _uniform(rng, a, (b,), dtype)
    return params


def n_layers(params: Params) -> int:
    return sum(1 for k in params if k.startswith("W"))


def mlp_forward(params: Params, X, return_cache: bool = False):
    """tanh hidden layers, linear output."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    L = n_layers(params)
    if X.shape[-1] != params["W0"].shape[0]:
        raise ShapeError(f"input has {X.shape[-1]} features, model expects {params['W0'].shape[0]}")
    acts = [X]
    h = X
    for k in range(L):
        z = h @ params[f"W{k}"] + params[f"b{k}"]
        h = np.tanh(z) if k < L - 1 else z
        acts.append(h)
    return (h, acts) if return_cache else h


def mlp_backward(params: Params, X, y) -> tuple[float, Params]:
    """Loss and exact gradients of the batch MSE."""
    out, acts = mlp_forward(params, X, return_cache=True)
    y = np.asarray(y).reshape(out.shape)
    L = n_layers(params)
    delta = 2.0 * (out - y) / out.size
    grads = {}
    for k in reversed(range(L)):
        grads[f"W{k}"] = acts[k].T @ delta
        grads[f"b{k}"] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params[f"W{k}"].T) * (1.0 - acts[k] ** 2)
    return mse(out, y), grads


class MLPNet:
    def __init__(self, sizes: Sequence[int]):
        self.sizes = tuple(int(s) for s in sizes)

    def init(self, rng: np.random.Generator, dtype=np.float64) -> Params:
        return init_mlp(self.sizes, rng, dtype)

    def predict(self, params: Params, X) -> np.ndarray:
        return mlp_forward(params, X)

    def loss_and_grad(self, params: Params, X, y):
        return mlp_backward(params, X, y)


# -------------------------------------------------------------------- LSTM

def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def init_lstm(input_dim: int, hidden: int, output_dim: int, rng: np.random.Generator, dtype=np.float64) -> Params:
    """Single-layer LSTM, gate blocks ordered (input, forget, cell, output)."""
    return {
        "Wx": _uniform(rng, hidden, (input_dim, 4 * hidden), dtype),
        "Wh": _uniform(rng, hidden, (hidden, 4 * hidden), dtype),
        "b": _uniform(rng, hidden, (4 * hidden,), dtype),
        "Wy": _uniform(rng, hidden, (hidden, output_dim), dtype),
        "by": _uniform(rng, hidden, (output_dim,), dtype),
    }


def lstm_forward(params: Params, seqs, return_cache: bool = False):
    """Run ``(N, T, D)`` sequences and map the last hidden state to the output."""
    X = np.asarray(seqs)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1] < 1:
        raise ShapeError("LSTM input must be (N, T, D) with T >= 1")
    if X.shape[2] != params["Wx"].shape[0]:
        raise ShapeError(f"frame has {X.shape[2]} features, model expects {params['Wx'].shape[0]}")
    N, T, _ = X.shape
    nh = params["Wh"].shape[0]
    h = np.zeros((N, nh), dtype=params["Wh"].dtype)
    c = np.zeros_like(h)
    cache = []
    # input projection for all steps at once
    zx = X @ params["Wx"] + params["b"]
    for t in range(T):
        z = zx[:, t] + h @ params["Wh"]
        i = sigmoid(z[:, :nh])
        f = sigmoid(z[:, nh:2 * nh])
        g = np.tanh(z[:, 2 * nh:3 * nh])
        o = sigmoid(z[:, 3 * nh:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.append((h_prev, c_prev, i, f, g, o, tc))
    out = h @ params["Wy"] + params["by"]
    return (out, (X, cache, h)) if return_cache else out


def lstm_backward(params: Params, seqs, y) -> tuple[float, Params]:
    """Loss and backpropagation-through-time gradients of the batch MSE."""
    out, (X, cache, h_last) = lstm_forward(params, seqs, return_cache=True)
    y = np.asarray(y).reshape(out.shape)
    N, T, _ = X.shape
    nh = params["Wh"].shape[0]
    dout = 2.0 * (out - y) / out.size
    grads = {
        "Wy": h_last.T @ dout,
        "by": dout.sum(axis=0),
        "Wx": np.zeros_like(params["Wx"]),
        "Wh": np.zeros_like(params["Wh"]),
        "b": np.zeros_like(params["b"]),
    }
    dh = dout @ params["Wy"].T
    dc = np.zeros_like(dh)
    dz = np.empty((N, 4 * nh), dtype=dh.dtype)
    for t in reversed(range(T)):
        h_prev, c_prev, i, f, g, o, tc = cache[t]
        dc = dc + dh * o * (1.0 - tc ** 2)
        dz[:, :nh] = dc * g * i * (1.0 - i)
        dz[:, nh:2 * nh] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * nh:3 * nh] = dc * i * (1.0 - g ** 2)
        dz[:, 3 * nh:] = dh * tc * o * (1.0 - o)
        grads["Wx"] += X[:, t].T @ dz
        grads["Wh"] += h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)
        dh = dz @ params["Wh"].T
        dc = dc * f
    return mse(out, y), grads


class LSTMNet:
    def __init__(self, input_dim: int, hidden: int, output_dim: int):
        self.input_dim, self.hidden, self.output_dim = int(input_dim), int(hidden), int(output_dim)

    def init(self, rng: np.random.Generator, dtype=np.float64) -> Params:
        return init_lstm(self.input_dim, self.hidden, self.output_dim, rng, dtype)

    def predict(self, params: Params, X) -> np.ndarray:
        return lstm_forward(params, X)

    def loss_and_grad(self, params: Params, X, y):
        return lstm_backward(params, X, y)
