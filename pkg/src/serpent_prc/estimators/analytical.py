"""Kinematics-only pose estimate: no learning, no filtering."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..dataset import SessionLog
from ..kinematics import ArmGeometry, forward_kinematics, joints_from_markers, motor_to_joint


class AnalyticalEstimator(RegressorMixin, BaseEstimator):
    """Integrates ideal motor-to-joint kinematics from a marker-derived start pose.

    ``fit`` takes motor angles ``(T, 9)`` and markers ``(T, 27)`` but only uses the
    first row of each: the initial joint angles are solved from the first marker
    frame. ``predict`` maps motor angles to markers via the accumulated joint
    angles.
    """

    def __init__(self, geometry: ArmGeometry | None = None):
        self.geometry = geometry

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        y = check_array(y, dtype=float)
        g = self.geometry or ArmGeometry()
        self.initial_joints_ = joints_from_markers(y[0], g)
        self.initial_motors_ = X[0].copy()
        self.n_features_in_ = X.shape[1]
        return self

    def joint_estimates(self, X) -> np.ndarray:
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        q = self.initial_joints_ + motor_to_joint(X - self.initial_motors_)
        return np.clip(q, -np.pi, np.pi)

    def predict(self, X) -> np.ndarray:
        q = self.joint_estimates(X)
        markers = forward_kinematics(q, self.geometry or ArmGeometry())
        return markers.reshape(len(q), -1)


def analytical_estimate(log: SessionLog, geometry: ArmGeometry | None = None) -> np.ndarray:
    """Per-step marker predictions ``(T, 27)`` for a whole session."""
    est = AnalyticalEstimator(geometry).fit(log.motor_angles[:1], log.markers[:1])
    return est.predict(log.motor_angles)
