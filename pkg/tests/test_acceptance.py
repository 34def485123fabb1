"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

The desk-profile criteria share one generate -> train -> evaluate -> sweep run
(a few minutes on one core); determinism repeats generate -> train -> evaluate
in a second directory and compares report hashes.
"""

import time

import numpy as np
import pytest

from serpent_prc import pipeline
from serpent_prc.config import METHODS, ExperimentConfig
from serpent_prc.dataset import SessionLog, embed, reservoir_dim
from serpent_prc.estimators import LinearReadout, analytical_estimate
from serpent_prc.estimators.nn import init_lstm, init_mlp, lstm_backward, mlp_backward
from serpent_prc.kinematics import (
    coupling_matrix,
    coupling_matrix_inverse,
    forward_kinematics,
    joint_origins,
    joint_to_motor,
    joints_from_markers,
    motor_to_joint,
)
from serpent_prc.plant import PlantConfig, play_operator, run_session, sample_targets

from test_estimators import finite_difference_check


def _run_pipeline(out, sweep=False):
    cfg = ExperimentConfig.from_profile("desk", out_dir=str(out))
    t0 = time.perf_counter()
    pipeline.generate(cfg)
    for method in METHODS:
        pipeline.train_method(cfg, method)
    table = pipeline.evaluate(cfg)
    t_table = time.perf_counter() - t0
    result, t_sweep = None, None
    if sweep:
        t1 = time.perf_counter()
        result = pipeline.sweep(cfg)
        t_sweep = time.perf_counter() - t1
    return cfg, table, t_table, result, t_sweep


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    return _run_pipeline(tmp_path_factory.mktemp("desk"), sweep=True)


def test_coupling_algebra(criterion):
    t0 = time.perf_counter()
    A, A_inv = coupling_matrix(9), coupling_matrix_inverse(9)
    err_inv = np.abs(A @ A_inv - np.eye(9)).max()
    v = np.random.default_rng(0).uniform(-np.pi, np.pi, size=(1000, 9))
    err_rt = np.abs(motor_to_joint(joint_to_motor(v)) - v).max()
    dt = time.perf_counter() - t0
    ok = err_inv < 1e-12 and err_rt < 1e-12 and dt < 1.0
    assert criterion("coupling algebra", ok, f"|AA^-1 - I|={err_inv:.1e}, round trip {err_rt:.1e}, {dt:.3f} s")


def test_fk_ik_round_trip(criterion):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        q = sample_targets(rng)
        worst = max(worst, np.abs(joints_from_markers(forward_kinematics(q)) - q).max())
    tip = np.linalg.norm(joint_origins(np.zeros(9))[-1])
    ok = worst < 1e-6 and abs(tip - 545.0) <= 1e-9
    assert criterion("FK/IK round trip", ok, f"max joint error {worst:.1e} rad, zero-pose tip {tip:.12f} mm")


def test_ideal_limit(criterion):
    cfg = PlantConfig.ideal()
    log = run_session(cfg, 0, steps=2100)
    err = np.linalg.norm((analytical_estimate(log, cfg.geometry) - log.markers).reshape(-1, 9, 3), axis=2).mean()
    assert criterion("ideal-limit exactness", err < 1e-6, f"analytical error {err:.2e} mm over 2100 steps")


def test_embedding_dimension(criterion):
    rng = np.random.default_rng(2)
    log = SessionLog(rng.normal(size=(40, 18)), rng.normal(size=(40, 9)), rng.normal(size=(40, 27)))
    bad = [H for H in range(1, 17)
           if embed(log, H).inputs.shape[1] != 27 * H - 9
           or embed(log, H, include_loads=False).inputs.shape[1] != 18 * H - 9
           or reservoir_dim(H) != 27 * H - 9]
    assert criterion("embedding dimension", not bad, "27H-9 and 18H-9 for H=1..16" if not bad else f"wrong for H={bad}")


def test_gradient_correctness(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    mlp = init_mlp((6, 5, 5, 5, 4), rng)
    X, y = rng.normal(size=(8, 6)), rng.normal(size=(8, 4))
    e_mlp = finite_difference_check(lambda p: mlp_backward(p, X, y), mlp)
    lstm = init_lstm(5, 4, 3, rng)
    S, z = rng.normal(size=(6, 4, 5)), rng.normal(size=(6, 3))
    e_lstm = finite_difference_check(lambda p: lstm_backward(p, S, z), lstm)
    dt = time.perf_counter() - t0
    ok = e_mlp < 1e-4 and e_lstm < 1e-4 and dt < 30
    assert criterion("gradient correctness", ok, f"MLP {e_mlp:.1e}, LSTM {e_lstm:.1e} max rel. error, {dt:.1f} s")


def test_readout_equivalence(criterion):
    rng = np.random.default_rng(4)
    X = rng.uniform(-1, 1, size=(500, 12))
    Y = X @ rng.normal(size=(12, 5)) + 0.05 * rng.normal(size=(500, 5))
    closed = LinearReadout(solver="ridge").fit(X, Y)
    adam = LinearReadout(learning_rate=1e-2, batch_size=50, max_epochs=2000).fit(X, Y, eval_set=(X, Y))
    m_c = np.mean((closed.predict(X) - Y) ** 2)
    m_a = np.mean((adam.predict(X) - Y) ** 2)
    rel = abs(m_a - m_c) / m_c
    assert criterion("readout equivalence", rel < 0.01, f"Adam MSE {m_a:.6f} vs ridge {m_c:.6f} ({rel:.2%})")


def test_directional_table(desk_run, criterion):
    _, table, seconds, _, _ = desk_run
    e = {m: table.report(m).mean for m in ("prc-mlp", "analytical", "prc-lin", "lstm")}
    a = e["analytical"] >= 3 * e["prc-mlp"]
    b = e["prc-mlp"] <= e["prc-lin"]
    c = e["prc-mlp"] <= 1.15 * e["lstm"] and e["lstm"] <= 1.15 * e["prc-mlp"]
    ok = a and b and c and seconds <= 30 * 60
    detail = (f"MLP {e['prc-mlp']:.2f}, analytical {e['analytical']:.2f}, LIN {e['prc-lin']:.2f}, "
              f"LSTM {e['lstm']:.2f} mm; (a)={a} (b)={b} (c)={c}; {seconds / 60:.1f} min")
    assert criterion("directional table structure (desk)", ok, detail)


def test_sweep_structure(desk_run, criterion):
    _, _, _, result, seconds = desk_run
    best = result.best_H
    ok = best is not None and result.loss_at(best) < result.loss_at(1) and seconds <= 60 * 60
    losses = ", ".join(f"H={h}: {v:.5f}" for h, v in zip(result.H, result.val_loss))
    assert criterion("sweep structure (desk)", ok, f"{losses}; best H={best}; {seconds / 60:.1f} min")


def test_determinism(desk_run, tmp_path, criterion):
    cfg, _, _, _, _ = desk_run
    first = pipeline.report_hash(cfg)
    cfg2, _, _, _, _ = _run_pipeline(tmp_path)
    second = pipeline.report_hash(cfg2)
    assert criterion("determinism", first == second, f"report hashes {first[:16]} / {second[:16]}")


def test_hysteresis_properties(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    n, T = 10_000, 60
    u = np.cumsum(rng.normal(scale=0.05, size=(n, T)), axis=1)
    w = rng.uniform(0.0, 0.3, size=n)
    c = u[:, 0].copy()  # start from a consistent state: output equals the first input
    lipschitz = dead_zone = True
    for t in range(1, T):
        nxt = play_operator(u[:, t], c, w)
        lipschitz &= bool(np.all(np.abs(nxt - c) <= np.abs(u[:, t] - u[:, t - 1]) + 1e-12))
        inside = np.abs(u[:, t] - c) <= w / 2
        dead_zone &= bool(np.all(nxt[inside] == c[inside]))
        c = nxt
    dt = time.perf_counter() - t0
    ok = lipschitz and dead_zone and dt < 5
    assert criterion("hysteresis properties", ok,
                     f"{n} sequences: 1-Lipschitz={lipschitz}, dead zone holds={dead_zone}, {dt:.2f} s")
