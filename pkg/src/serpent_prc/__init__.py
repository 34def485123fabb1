"""Simulator and learning toolkit for reservoir-style pose estimation of a cable-driven serpentine arm."""

from .config import ExperimentConfig, derive_seed
from .dataset import (
    Normalizer,
    SessionLog,
    SupervisedSet,
    embed,
    embed_many,
    fit_normalizer,
    lstm_sequences,
    split_sessions,
)
from .estimators import AnalyticalEstimator, LinearReadout, LSTMReadout, MLPReadout
from .evaluation import ComparisonTable, ErrorReport, SweepResult, compare_methods, marker_error, sweep_H
from .kinematics import ArmGeometry, forward_kinematics, joint_to_motor, joints_from_markers, motor_to_joint
from .plant import PlantConfig, PlantState, run_session, step

__version__ = "0.1.0"

__all__ = [
    "AnalyticalEstimator",
    "ArmGeometry",
    "ComparisonTable",
    "ErrorReport",
    "ExperimentConfig",
    "LSTMReadout",
    "LinearReadout",
    "MLPReadout",
    "Normalizer",
    "PlantConfig",
    "PlantState",
    "SessionLog",
    "SupervisedSet",
    "SweepResult",
    "compare_methods",
    "derive_seed",
    "embed",
    "embed_many",
    "fit_normalizer",
    "forward_kinematics",
    "joint_to_motor",
    "joints_from_markers",
    "lstm_sequences",
    "marker_error",
    "motor_to_joint",
    "run_session",
    "split_sessions",
    "step",
    "sweep_H",
]
