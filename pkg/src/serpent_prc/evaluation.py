"""Marker-error metrics, method comparison tables and the window-length sweep."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import clone

from .dataset import Normalizer, SessionLog, embed_many
from .exceptions import ShapeError, TrainingDivergedError

log = logging.getLogger(__name__)

# Column order of the comparison table; unknown methods follow alphabetically.
METHOD_ORDER = ("prc-mlp", "analytical", "no-load", "prc-lin", "lstm")


@dataclass
class ErrorReport:
    method: str
    mean: float  # mm, mean over steps of the per-step mean marker distance
    std: float
    per_marker: list
    n_samples: int
    mse: float  # mm^2, mean squared coordinate error

    def to_dict(self) -> dict:
        return asdict(self)


def _as_markers(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 2 and a.shape[1] % 3 == 0:
        a = a.reshape(len(a), -1, 3)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ShapeError(f"expected (T, 27) or (T, 9, 3) markers, got {a.shape}")
    return a


def marker_error(pred, truth, method: str = "") -> ErrorReport:
    """Euclidean error per marker, averaged over markers, then summarized over steps."""
    p, t = _as_markers(pred), _as_markers(truth)
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} and truth {t.shape} differ")
    dist = np.linalg.norm(p - t, axis=2)
    per_step = dist.mean(axis=1)
    return ErrorReport(method, float(per_step.mean()), float(per_step.std()),
                       dist.mean(axis=0).tolist(), int(len(per_step)), float(np.mean((p - t) ** 2)))


def _method_key(name: str):
    return (METHOD_ORDER.index(name), "") if name in METHOD_ORDER else (len(METHOD_ORDER), name)


@dataclass
class ComparisonTable:
    rows: list  # ErrorReport or None-for-absent, aligned with ``methods``
    methods: list
    meta: dict = field(default_factory=dict)

    def report(self, method: str) -> ErrorReport | None:
        return self.rows[self.methods.index(method)]

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "units": "mm",
            "methods": [
                {"method": m, "status": "absent"} if r is None else {"status": "ok", **r.to_dict()}
                for m, r in zip(self.methods, self.rows)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        cells = [("absent" if r is None else f"{r.mean:.1f} ± {r.std:.1f}") for r in self.rows]
        width = [max(len(m), len(c)) for m, c in zip(self.methods, cells)]
        line = "+" + "+".join("-" * (w + 2) for w in width) + "+"
        head = "|" + "|".join(f" {m:<{w}} " for m, w in zip(self.methods, width)) + "|"
        body = "|" + "|".join(f" {c:<{w}} " for c, w in zip(cells, width)) + "|"
        return "\n".join(["Marker error, mean ± std [mm]", line, head, line, body, line])


def compare_methods(truth, predictions: Mapping[str, np.ndarray | None], meta: dict | None = None) -> ComparisonTable:
    """Score every method's predictions against the same ground truth.

    A ``None`` prediction marks a method whose model is missing; it is listed as
    absent instead of failing the comparison.
    """
    methods = sorted(predictions, key=_method_key)
    rows = [None if predictions[m] is None else marker_error(predictions[m], truth, m) for m in methods]
    return ComparisonTable(rows, methods, dict(meta or {}))


@dataclass
class SweepResult:
    H: list
    val_loss: list
    diverged: list

    @property
    def best_H(self) -> int | None:
        finite = [(loss, h) for h, loss in zip(self.H, self.val_loss) if np.isfinite(loss)]
        return min(finite)[1] if finite else None

    def loss_at(self, H: int) -> float:
        return self.val_loss[self.H.index(H)]

    def to_dict(self) -> dict:
        return {"H": self.H, "val_loss": self.val_loss, "diverged": self.diverged, "best_H": self.best_H}

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["H", "val_loss"])
            for h, loss in zip(self.H, self.val_loss):
                w.writerow([h, repr(float(loss))])
        return path


def _sweep_point(H, train_logs, val_logs, norm, estimator, include_loads):
    tr = embed_many(train_logs, H, norm, include_loads)
    va = embed_many(val_logs, H, norm, include_loads)
    try:
        model = clone(estimator).fit(tr.inputs, tr.targets, eval_set=(va.inputs, va.targets))
    except TrainingDivergedError as exc:
        log.warning("H=%d diverged: %s", H, exc)
        return float("nan"), True
    return float(model.best_val_loss_), False


def sweep_H(Hs: Sequence[int], train_logs: Sequence[SessionLog], val_logs: Sequence[SessionLog],
            norm: Normalizer, estimator, include_loads: bool = True, workers: int = 1) -> SweepResult:
    """Train a fresh copy of ``estimator`` per window length; record best validation MSE.

    Duplicate window lengths are trained once. A diverged point is flagged with a
    NaN loss and the sweep carries on.
    """
    Hs = sorted({int(h) for h in Hs})
    if not Hs or Hs[0] < 1:
        raise ValueError("window lengths must be positive")
    args = [(h, train_logs, val_logs, norm, estimator, include_loads) for h in Hs]
    if workers > 1 and len(Hs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, *zip(*args)))
    else:
        results = [_sweep_point(*a) for a in args]
    return SweepResult(Hs, [r[0] for r in results], [h for h, r in zip(Hs, results) if r[1]])
