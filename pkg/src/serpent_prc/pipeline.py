"""Generate -> train -> evaluate -> sweep, with every artifact tied to its config hash.

Layout under ``cfg.out_dir``::

    sessions/session_XX.csv + .json   raw logs and manifests
    datasets/<split>_H<H>.npz + .json  delay-embedded tensors
    models/<method>.npz               checkpoints
    report.json, report.txt           comparison table
    sweep.csv, sweep.json             window-length sweep
"""

from __future__ import annotations

import io
import json
import logging
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import METHODS, ExperimentConfig, stable_hash
from .dataset import (
    MARKER_BLOCK,
    Normalizer,
    SessionLog,
    embed_many,
    fit_normalizer,
    lstm_sequences_many,
    save_supervised,
    split_sessions,
)
from .estimators.analytical import analytical_estimate
from .estimators.readouts import LinearReadout, LSTMReadout, MLPReadout
from .evaluation import ComparisonTable, SweepResult, compare_methods, sweep_H
from .exceptions import ConfigMismatchError, SerpentPRCError
from .plant import run_session

log = logging.getLogger(__name__)


class DatasetMissingError(SerpentPRCError, FileNotFoundError):
    pass


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode())


# ------------------------------------------------------------------ generate

def _session_job(args):
    cfg, index = args
    return run_session(cfg.plant, cfg.session_seed(index), cfg.steps, cfg.target_refresh, session_index=index)


def generate(cfg: ExperimentConfig, workers: int = 1) -> list[Path]:
    out = Path(cfg.out_dir) / "sessions"
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, i) for i in range(cfg.sessions)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            logs = list(pool.map(_session_job, jobs))
    else:
        logs = [_session_job(j) for j in jobs]
    staging = Path(cfg.out_dir) / ".staging"
    shutil.rmtree(staging, ignore_errors=True)
    staging.mkdir(parents=True)
    paths = []
    for i, session in enumerate(logs):
        session.manifest.update(data_hash=cfg.data_hash, config=cfg.data_dict(), session_index=i)
        name = f"session_{i:02d}.csv"
        session.write(staging / name)
        for suffix in (".csv", ".json"):
            os.replace(staging / Path(name).with_suffix(suffix).name, out / Path(name).with_suffix(suffix).name)
        paths.append(out / name)
    shutil.rmtree(staging, ignore_errors=True)
    log.info("wrote %d sessions to %s", len(paths), out)
    return paths


def load_sessions(cfg: ExperimentConfig) -> list[SessionLog]:
    folder = Path(cfg.out_dir) / "sessions"
    paths = [folder / f"session_{i:02d}.csv" for i in range(cfg.sessions)]
    missing = [p for p in paths if not p.exists()]
    if missing:
        raise DatasetMissingError(f"{missing[0]} not found; run `serpent-prc generate` with the same config first")
    logs = []
    for p in paths:
        session = SessionLog.read(p)
        if session.manifest.get("data_hash") != cfg.data_hash:
            raise ConfigMismatchError(f"{p} was generated with a different configuration (data hash mismatch); "
                                      "regenerate or pass the matching config")
        logs.append(session)
    return logs


def prepare(cfg: ExperimentConfig):
    """Splits and the training-set normalizer."""
    train, val, test = split_sessions(load_sessions(cfg), cfg.burnin)
    return train, val, test, fit_normalizer(train)


# --------------------------------------------------------------- checkpoints

_KINDS = {"mlp": MLPReadout, "linear": LinearReadout, "lstm": LSTMReadout}


def _kind(est) -> str:
    return {MLPReadout: "mlp", LinearReadout: "linear", LSTMReadout: "lstm"}[type(est)]


def save_checkpoint(path, estimator, meta: dict) -> Path:
    """Checkpoint = ``.npz`` with ``param__<name>`` arrays and a JSON ``meta`` string.

    ``meta`` carries the architecture, window length, normalizer, training curve
    and the hashes of the configuration that produced the model.
    """
    path = Path(path)
    meta = dict(meta, kind=_kind(estimator), estimator_params=estimator.get_params(),
                n_features=int(estimator.n_features_in_), n_outputs=int(estimator.n_outputs_),
                curve=estimator.curve_)
    arrays = {f"param__{k}": v for k, v in estimator.params_.items()}
    buf = io.BytesIO()
    np.savez(buf, meta=np.array(json.dumps(meta, sort_keys=True, default=float)), **arrays)
    _atomic_write_bytes(path, buf.getvalue())
    return path


def load_checkpoint(path):
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        params = {k[len("param__"):]: z[k] for k in z.files if k.startswith("param__")}
    est = _KINDS[meta["kind"]](**meta["estimator_params"])
    est.restore(params, meta["n_features"], meta["n_outputs"], meta["curve"])
    return est, meta


# --------------------------------------------------------------------- train

def build_estimator(cfg: ExperimentConfig, method: str, ridge: bool = False):
    params = cfg.method_params(method)
    seed = cfg.session_seed(10_000 + METHODS.index(method))
    cls = {"prc-mlp": MLPReadout, "no-load": MLPReadout, "prc-lin": LinearReadout, "lstm": LSTMReadout}[method]
    valid = set(cls().get_params())
    params = {k: (tuple(v) if isinstance(v, list) else v) for k, v in params.items() if k in valid}
    params["random_state"] = seed
    if ridge:
        if method != "prc-lin":
            raise ValueError("--ridge only applies to prc-lin")
        params["solver"] = "ridge"
    return cls(**params)


def _inputs(method: str, logs, H: int, norm: Normalizer):
    if method == "lstm":
        return lstm_sequences_many(logs, H, norm)
    return embed_many(logs, H, norm, include_loads=method != "no-load")


def train_method(cfg: ExperimentConfig, method: str, ridge: bool = False) -> Path:
    train, val, test, norm = prepare(cfg)
    est = build_estimator(cfg, method, ridge)
    tr, va = _inputs(method, train, cfg.H, norm), _inputs(method, val, cfg.H, norm)
    datasets = Path(cfg.out_dir) / "datasets"
    datasets.mkdir(parents=True, exist_ok=True)
    if method in ("prc-mlp", "lstm"):
        kind = "embed" if method == "prc-mlp" else "lstm"
        for split, data in (("train", tr), ("val", va)):
            save_supervised(datasets / f"{kind}_{split}_H{cfg.H}", data, cfg.H, norm, split,
                            {"embedding_hash": cfg.embedding_hash()})
    log.info("training %s on %d samples (input %s)", method, len(tr), tr.inputs.shape[1:])
    est.fit(tr.inputs, tr.targets, eval_set=(va.inputs, va.targets))
    models = Path(cfg.out_dir) / "models"
    models.mkdir(parents=True, exist_ok=True)
    meta = {
        "method": method,
        "H": cfg.H,
        "include_loads": method != "no-load",
        "normalizer": norm.to_dict(),
        "data_hash": cfg.data_hash,
        "embedding_hash": cfg.embedding_hash(),
        "config_hash": cfg.config_hash,
        "ridge": ridge,
    }
    return save_checkpoint(models / f"{method}.npz", est, meta)


# ------------------------------------------------------------------ evaluate

def evaluate(cfg: ExperimentConfig, checkpoints: dict | None = None, include_analytical: bool = True) -> ComparisonTable:
    """Score checkpoints and the analytical baseline on the test split.

    ``checkpoints`` maps method name to checkpoint path; by default every method
    with a file under ``models/`` is used. Methods without a checkpoint are
    reported as absent.
    """
    _, _, test, norm = prepare(cfg)
    H = cfg.H
    if checkpoints is None:
        models = Path(cfg.out_dir) / "models"
        checkpoints = {m: models / f"{m}.npz" for m in METHODS}
    truth = np.vstack([t.markers[H - 1:] for t in test])
    predictions: dict = {}
    for method, path in checkpoints.items():
        path = Path(path)
        if not path.exists():
            predictions[method] = None
            continue
        est, meta = load_checkpoint(path)
        if meta.get("embedding_hash") != cfg.embedding_hash():
            raise ConfigMismatchError(
                f"{path}: checkpoint was trained for H={meta.get('H')} on data {meta.get('data_hash', '?')[:12]}, "
                f"but the config has H={H} on data {cfg.data_hash[:12]} (hash mismatch)")
        model_norm = Normalizer.from_dict(meta["normalizer"])
        pred = est.predict(_inputs(method, test, H, model_norm).inputs)
        predictions[method] = model_norm.inverse_transform(pred, MARKER_BLOCK)
    if include_analytical:
        predictions["analytical"] = np.vstack([analytical_estimate(t, cfg.plant.geometry)[H - 1:] for t in test])
    meta = {"config_hash": cfg.config_hash, "data_hash": cfg.data_hash, "H": H, "profile": cfg.profile,
            "test_sessions": [int(t.manifest.get("session_index", -1)) for t in test]}
    table = compare_methods(truth, predictions, meta)
    out = Path(cfg.out_dir)
    _atomic_write_text(out / "report.json", table.to_json())
    _atomic_write_text(out / "report.txt", table.to_text() + "\n")
    return table


def report_hash(cfg: ExperimentConfig) -> str:
    return stable_hash(json.loads((Path(cfg.out_dir) / "report.json").read_text()))


# --------------------------------------------------------------------- sweep

def sweep(cfg: ExperimentConfig, Hs=None, workers: int = 1) -> SweepResult:
    train, val, _, norm = prepare(cfg)
    est = build_estimator(cfg, "prc-mlp")
    result = sweep_H(Hs or cfg.sweep_H, train, val, norm, est, workers=workers)
    out = Path(cfg.out_dir)
    result.write_csv(out / "sweep.csv")
    summary = dict(result.to_dict(), config_hash=cfg.config_hash)
    _atomic_write_text(out / "sweep.json", json.dumps(summary, indent=2, sort_keys=True, default=float))
    return result
