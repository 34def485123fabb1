"""Closed-form regularized least squares for the linear readout."""

from __future__ import annotations

import numpy as np

from ..exceptions import SingularMatrixError


def ridge_fit(X, Y, alpha: float = 0.0, fit_intercept: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``min ||X W + b - Y||^2 + alpha ||W||^2``.

    Returns ``(W, b)`` with ``W`` of shape ``(n_features, n_targets)``. The
    intercept is not penalized.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    squeeze = Y.ndim == 1
    if squeeze:
        Y = Y[:, None]
    if len(X) < 1 or len(X) != len(Y):
        raise ValueError("need at least one sample and matching X / Y lengths")
    if fit_intercept:
        x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
        Xc, Yc = X - x_mean, Y - y_mean
    else:
        x_mean, y_mean = np.zeros(X.shape[1]), np.zeros(Y.shape[1])
        Xc, Yc = X, Y
    gram = Xc.T @ Xc + alpha * np.eye(X.shape[1])
    rhs = Xc.T @ Yc
    try:
        cho = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("normal matrix is singular; use alpha > 0") from None
    # reject numerically rank-deficient systems that Cholesky happens to accept
    if alpha == 0 and np.linalg.cond(gram) > 1e14:
        raise SingularMatrixError("normal matrix is numerically singular; use alpha > 0")
    W = np.linalg.solve(cho.T, np.linalg.solve(cho, rhs))
    b = y_mean - x_mean @ W
    if squeeze:
        return W[:, 0], b[0]
    return W, b


def ridge_objective_gradient(X, Y, W, b, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the (unscaled) ridge objective at ``(W, b)``."""
    X = np.asarray(X, dtype=float)
    R = X @ W + b - Y
    return 2.0 * X.T @ R + 2.0 * alpha * W, 2.0 * R.sum(axis=0)
