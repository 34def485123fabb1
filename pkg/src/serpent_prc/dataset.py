"""Session logs, splits, normalization and delay embedding."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InsufficientDataError, WindowError

N_MOTORS = 9
N_SENSOR = 2 * N_MOTORS
N_MARKER_COORDS = 27
FRAME_DIM = N_SENSOR + N_MOTORS

SENSOR_BLOCK = slice(0, N_SENSOR)
COMMAND_BLOCK = slice(N_SENSOR, N_SENSOR + N_MOTORS)
MARKER_BLOCK = slice(N_SENSOR + N_MOTORS, N_SENSOR + N_MOTORS + N_MARKER_COORDS)
N_CHANNELS = N_SENSOR + N_MOTORS + N_MARKER_COORDS

CSV_COLUMNS = (
    ["t"]
    + [f"motor_angle_{j}" for j in range(1, 10)]
    + [f"motor_load_{j}" for j in range(1, 10)]
    + [f"command_{j}" for j in range(1, 10)]
    + [f"marker_{k}_{c}" for k in range(1, 10) for c in "xyz"]
)


def array_digest(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


@dataclass
class SessionLog:
    """One data-collection session.

    Row ``t`` holds the observation ``s_t`` and markers ``y_t`` read before the
    command ``u_t`` of the same row was sent, so ``u_t`` never influences ``y_t``.
    """

    sensors: np.ndarray
    commands: np.ndarray
    markers: np.ndarray
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sensors = np.asarray(self.sensors, dtype=float)
        self.commands = np.asarray(self.commands, dtype=float)
        self.markers = np.asarray(self.markers, dtype=float).reshape(len(self.markers), -1)
        if self.sensors.shape[1:] != (N_SENSOR,) or self.commands.shape[1:] != (N_MOTORS,):
            raise ValueError("sensors must be (T, 18) and commands (T, 9)")
        if self.markers.shape[1:] != (N_MARKER_COORDS,):
            raise ValueError("markers must be (T, 27)")
        if not len(self.sensors) == len(self.commands) == len(self.markers):
            raise ValueError("sensor, command and marker series differ in length")

    def __len__(self) -> int:
        return len(self.sensors)

    @property
    def motor_angles(self) -> np.ndarray:
        return self.sensors[:, :N_MOTORS]

    @property
    def motor_loads(self) -> np.ndarray:
        return self.sensors[:, N_MOTORS:]

    @property
    def channels(self) -> np.ndarray:
        """All 54 channels side by side: sensors, commands, markers."""
        return np.hstack([self.sensors, self.commands, self.markers])

    def trimmed(self, start: int) -> "SessionLog":
        manifest = dict(self.manifest, first_step=int(self.manifest.get("first_step", 0)) + start)
        return SessionLog(self.sensors[start:], self.commands[start:], self.markers[start:], manifest)

    def digest(self) -> str:
        return array_digest(self.sensors, self.commands, self.markers)

    def write(self, csv_path, dt: float | None = None) -> Path:
        """Write the CSV plus a JSON manifest next to it (``<stem>.json``)."""
        csv_path = Path(csv_path)
        dt = float(self.manifest.get("dt", 0.25)) if dt is None else dt
        t = np.arange(len(self))[:, None] * dt
        table = np.hstack([t, self.sensors, self.commands, self.markers])
        np.savetxt(csv_path, table, delimiter=",", header=",".join(CSV_COLUMNS), comments="", fmt="%.17g")
        manifest = dict(self.manifest, steps=len(self), columns=CSV_COLUMNS, content_hash=self.digest())
        csv_path.with_suffix(".json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        return csv_path

    @classmethod
    def read(cls, csv_path) -> "SessionLog":
        csv_path = Path(csv_path)
        table = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        manifest_path = csv_path.with_suffix(".json")
        manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
        if table.shape[1] != len(CSV_COLUMNS):
            raise ValueError(f"{csv_path}: expected {len(CSV_COLUMNS)} columns, found {table.shape[1]}")
        body = table[:, 1:]
        return cls(body[:, SENSOR_BLOCK], body[:, COMMAND_BLOCK], body[:, MARKER_BLOCK], manifest)


def split_counts(n_sessions: int) -> tuple[int, int, int]:
    """Train/val/test session counts in a 20/2/1 ratio, at least one each."""
    if n_sessions < 3:
        raise InsufficientDataError(f"need at least 3 sessions, got {n_sessions}")
    n_test = max(1, round(n_sessions / 23))
    n_val = max(1, round(2 * n_sessions / 23))
    return n_sessions - n_val - n_test, n_val, n_test


def split_sessions(logs: Sequence[SessionLog], burnin: int = 100):
    """Split logs by index into (train, val, test) and drop the transient head.

    Sessions keep their order: the first ones train, then validation, and the
    last session(s) are held out for testing.
    """
    logs = list(logs)
    n_train, n_val, _ = split_counts(len(logs))
    for log in logs:
        if burnin >= len(log):
            raise InsufficientDataError(f"burn-in of {burnin} steps leaves nothing of a {len(log)}-step session")
    trimmed = [log.trimmed(burnin) for log in logs]
    return trimmed[:n_train], trimmed[n_train:n_train + n_val], trimmed[n_train + n_val:]


class Normalizer(TransformerMixin, BaseEstimator):
    """Per-channel affine map of the training range onto [-1, 1].

    Constant channels keep a unit half-span, so they map to 0. Values outside the
    fitted range are not clipped.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        lo, hi = X.min(axis=0), X.max(axis=0)
        self.min_ = lo
        self.max_ = hi
        self.center_ = (hi + lo) / 2.0
        half = (hi - lo) / 2.0
        self.half_span_ = np.where(half > 0, half, 1.0)
        self.n_features_in_ = X.shape[1]
        return self

    def _block(self, block):
        check_is_fitted(self)
        block = slice(None) if block is None else block
        return self.center_[block], self.half_span_[block]

    def transform(self, X, block: slice | None = None):
        c, h = self._block(block)
        X = check_array(X, dtype=float, ensure_all_finite=False)
        if X.shape[1] != len(c):
            raise ValueError(f"expected {len(c)} channels, got {X.shape[1]}")
        return (X - c) / h

    def inverse_transform(self, X, block: slice | None = None):
        c, h = self._block(block)
        X = check_array(X, dtype=float, ensure_all_finite=False)
        if X.shape[1] != len(c):
            raise ValueError(f"expected {len(c)} channels, got {X.shape[1]}")
        return X * h + c

    def to_dict(self) -> dict:
        check_is_fitted(self)
        return {"min": self.min_.tolist(), "max": self.max_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        lo = np.asarray(d["min"], dtype=float)
        hi = np.asarray(d["max"], dtype=float)
        return cls().fit(np.vstack([lo, hi]))


def fit_normalizer(train_logs: Sequence[SessionLog]) -> Normalizer:
    if not train_logs:
        raise InsufficientDataError("cannot fit a normalizer without training data")
    return Normalizer().fit(np.vstack([log.channels for log in train_logs]))


@dataclass
class SupervisedSet:
    inputs: np.ndarray
    targets: np.ndarray
    provenance: np.ndarray  # (N, 2): session index, step index within the raw session

    def __len__(self) -> int:
        return len(self.inputs)

    @classmethod
    def concat(cls, sets: Sequence["SupervisedSet"]) -> "SupervisedSet":
        return cls(
            np.concatenate([s.inputs for s in sets]),
            np.concatenate([s.targets for s in sets]),
            np.concatenate([s.provenance for s in sets]),
        )

    def digest(self) -> str:
        return array_digest(self.inputs, self.targets, self.provenance)


def reservoir_dim(H: int, include_loads: bool = True) -> int:
    """Width of the delay vector: ``H`` observations plus ``H - 1`` past commands."""
    s_dim = N_SENSOR if include_loads else N_MOTORS
    return s_dim * H + N_MOTORS * (H - 1)


def _check_window(log: SessionLog, H: int) -> None:
    if int(H) != H or H < 1:
        raise WindowError(f"window size must be a positive integer, got {H}")
    if len(log) < H:
        raise WindowError(f"session of {len(log)} steps is shorter than window {H}")


def _normalized_blocks(log: SessionLog, norm: Normalizer | None):
    s, u, y = log.sensors, log.commands, log.markers
    if norm is not None:
        s = norm.transform(s, SENSOR_BLOCK)
        u = norm.transform(u, COMMAND_BLOCK)
        y = norm.transform(y, MARKER_BLOCK)
    return s, u, y


def _provenance(log: SessionLog, H: int) -> np.ndarray:
    steps = np.arange(H - 1, len(log)) + int(log.manifest.get("first_step", 0))
    session = np.full_like(steps, int(log.manifest.get("session_index", -1)))
    return np.column_stack([session, steps])


def embed(log: SessionLog, H: int, norm: Normalizer | None = None, include_loads: bool = True) -> SupervisedSet:
    """Delay vectors ``(s_t, ..., s_{t-H+1}, u_{t-1}, ..., u_{t-H+1})`` -> ``y_t``.

    The command of the target's own step is never included. The first ``H - 1``
    steps have no full window and are dropped.
    """
    _check_window(log, H)
    s, u, y = _normalized_blocks(log, norm)
    if not include_loads:
        s = s[:, :N_MOTORS]
    T = len(log)
    n = T - H + 1
    blocks = [s[H - 1 - lag:T - lag] for lag in range(H)]
    blocks += [u[H - 1 - lag:T - lag] for lag in range(1, H)]
    inputs = np.hstack(blocks) if blocks else np.empty((n, 0))
    return SupervisedSet(inputs, y[H - 1:], _provenance(log, H))


def embed_many(logs: Sequence[SessionLog], H: int, norm: Normalizer | None = None, include_loads: bool = True) -> SupervisedSet:
    return SupervisedSet.concat([embed(log, H, norm, include_loads) for log in logs])


def lstm_sequences(log: SessionLog, H: int, norm: Normalizer | None = None) -> SupervisedSet:
    """Windows of ``H`` frames ``(s_k, u_k)`` ending at ``t``, with ``u_t`` zeroed.

    ``inputs`` has shape ``(N, H, 27)``.
    """
    _check_window(log, H)
    s, u, y = _normalized_blocks(log, norm)
    frames = np.hstack([s, u])
    T = len(log)
    idx = np.arange(H - 1, T)[:, None] + np.arange(-H + 1, 1)[None, :]
    seqs = frames[idx].copy()
    seqs[:, -1, N_SENSOR:] = 0.0
    return SupervisedSet(seqs, y[H - 1:], _provenance(log, H))


def lstm_sequences_many(logs: Sequence[SessionLog], H: int, norm: Normalizer | None = None) -> SupervisedSet:
    return SupervisedSet.concat([lstm_sequences(log, H, norm) for log in logs])


def save_supervised(path, data: SupervisedSet, H: int, normalizer: Normalizer, split: str, extra: dict | None = None) -> Path:
    """Write ``<path>.npz`` with the tensors and a ``<path>.json`` sidecar."""
    path = Path(path).with_suffix(".npz")
    np.savez(path, inputs=data.inputs, targets=data.targets, provenance=data.provenance)
    sidecar = {
        "H": int(H),
        "split": split,
        "normalizer": normalizer.to_dict(),
        "n_samples": len(data),
        "input_dim": int(np.prod(data.inputs.shape[1:])),
        "content_hash": data.digest(),
        **(extra or {}),
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def load_supervised(path) -> tuple[SupervisedSet, dict]:
    path = Path(path).with_suffix(".npz")
    with np.load(path) as z:
        data = SupervisedSet(z["inputs"], z["targets"], z["provenance"])
    sidecar = json.loads(path.with_suffix(".json").read_text())
    if sidecar.get("content_hash") != data.digest():
        raise ValueError(f"{path}: content hash does not match sidecar")
    return data, sidecar
