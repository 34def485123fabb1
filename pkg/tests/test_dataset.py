import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serpent_prc.dataset import (
    CSV_COLUMNS,
    MARKER_BLOCK,
    Normalizer,
    SessionLog,
    embed,
    embed_many,
    fit_normalizer,
    load_supervised,
    lstm_sequences,
    reservoir_dim,
    save_supervised,
    split_counts,
    split_sessions,
)
from serpent_prc.exceptions import InsufficientDataError, WindowError
from serpent_prc.plant import PlantConfig, run_session


def coded_log(T=30, session=0):
    """Entries encode (step, channel): sensors 1000t+c, commands 1000t+100+c."""
    t = np.arange(T)[:, None]
    sensors = 1000.0 * t + np.arange(18)
    commands = 1000.0 * t + 100 + np.arange(9)
    markers = 1000.0 * t + 200 + np.arange(27)
    return SessionLog(sensors, commands, markers, {"session_index": session})


class TestSplits:
    def test_full_run_counts(self):
        logs = [coded_log(2100, i) for i in range(23)]
        train, val, test = split_sessions(logs, burnin=100)
        assert sum(map(len, train)) == 40000
        assert sum(map(len, val)) == 4000
        assert sum(map(len, test)) == 2000
        assert [l.manifest["session_index"] for l in test] == [22]

    def test_three_sessions(self):
        assert split_counts(3) == (1, 1, 1)

    def test_too_few_sessions(self):
        with pytest.raises(InsufficientDataError):
            split_counts(2)

    def test_burnin_longer_than_session(self):
        with pytest.raises(InsufficientDataError):
            split_sessions([coded_log(50, i) for i in range(3)], burnin=50)

    def test_burnin_records_first_step(self):
        train, _, _ = split_sessions([coded_log(50, i) for i in range(3)], burnin=10)
        assert train[0].manifest["first_step"] == 10
        assert train[0].sensors[0, 0] == 10000.0


class TestNormalizer:
    def test_midpoint_and_ends(self):
        X = np.array([[0.0, -4.0], [10.0, 4.0], [5.0, 0.0]])
        n = Normalizer().fit(X)
        np.testing.assert_allclose(n.transform(X), [[-1, -1], [1, 1], [0, 0]])

    def test_constant_channel(self):
        X = np.array([[3.0, 1.0], [3.0, 2.0]])
        n = Normalizer().fit(X)
        np.testing.assert_array_equal(n.transform(X)[:, 0], 0.0)
        np.testing.assert_array_equal(n.inverse_transform(n.transform(X)), X)

    def test_no_clipping(self):
        n = Normalizer().fit(np.array([[0.0], [2.0]]))
        assert n.transform(np.array([[4.0]]))[0, 0] == 3.0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 40), st.integers(1, 6), st.integers(0, 2**31 - 1))
    def test_round_trip(self, n, d, seed):
        X = np.random.default_rng(seed).normal(scale=50, size=(n, d))
        norm = Normalizer().fit(X)
        np.testing.assert_allclose(norm.inverse_transform(norm.transform(X)), X, atol=1e-9)
        assert np.abs(norm.transform(X)).max() <= 1 + 1e-12

    def test_dict_round_trip(self):
        X = np.random.default_rng(0).normal(size=(20, 5))
        a = Normalizer().fit(X)
        b = Normalizer.from_dict(json.loads(json.dumps(a.to_dict())))
        np.testing.assert_array_equal(a.transform(X), b.transform(X))

    def test_block_transform(self):
        log = coded_log()
        norm = fit_normalizer([log])
        full = norm.transform(log.channels)
        np.testing.assert_array_equal(norm.transform(log.markers, MARKER_BLOCK), full[:, MARKER_BLOCK])

    def test_training_statistics_only(self):
        logs = [coded_log(30, i) for i in range(3)]
        logs[2].sensors[:] += 1e6  # test session far outside
        train, _, _ = split_sessions(logs, burnin=0)
        norm = fit_normalizer(train)
        assert norm.max_[0] == 29000.0


class TestEmbedding:
    @pytest.mark.parametrize("H", range(1, 17))
    def test_dimensions(self, H):
        log = coded_log(40)
        assert embed(log, H).inputs.shape == (40 - H + 1, 27 * H - 9)
        assert embed(log, H, include_loads=False).inputs.shape[1] == 18 * H - 9
        assert reservoir_dim(H) == 27 * H - 9

    def test_alignment(self):
        H = 3
        data = embed(coded_log(10), H)
        row = data.inputs[0]  # target step t = 2
        np.testing.assert_array_equal(row[:18], 2000 + np.arange(18))
        np.testing.assert_array_equal(row[18:36], 1000 + np.arange(18))
        np.testing.assert_array_equal(row[36:54], np.arange(18))
        np.testing.assert_array_equal(row[54:63], 1100 + np.arange(9))  # u_{t-1}
        np.testing.assert_array_equal(row[63:72], 100 + np.arange(9))  # u_{t-2}
        np.testing.assert_array_equal(data.targets[0], 2200 + np.arange(27))

    def test_own_command_excluded(self):
        data = embed(coded_log(10), 4)
        t = 3
        own = 1000 * t + 100 + np.arange(9)
        assert not np.isin(own, data.inputs[0]).any()

    def test_no_load_drops_loads(self):
        row = embed(coded_log(10), 2, include_loads=False).inputs[0]
        np.testing.assert_array_equal(row[:9], 1000 + np.arange(9))
        np.testing.assert_array_equal(row[9:18], np.arange(9))
        np.testing.assert_array_equal(row[18:], 100 + np.arange(9))

    def test_no_cross_session_windows(self):
        a, b = coded_log(10, 0), coded_log(10, 1)
        b.sensors += 1e6
        data = embed_many([a, b], 4)
        assert len(data) == 2 * 7
        for row, (session, _) in zip(data.inputs, data.provenance):
            s_vals = row[:72]
            assert (s_vals >= 1e6).all() if session == 1 else (s_vals < 1e6).all()

    def test_provenance(self):
        log = coded_log(20, 7).trimmed(5)
        data = embed(log, 3)
        np.testing.assert_array_equal(data.provenance[0], [7, 7])

    def test_window_errors(self):
        with pytest.raises(WindowError):
            embed(coded_log(10), 0)
        with pytest.raises(WindowError):
            embed(coded_log(3), 4)

    def test_lstm_zeroes_own_command(self):
        H = 3
        data = lstm_sequences(coded_log(10), H)
        assert data.inputs.shape == (8, H, 27)
        seq = data.inputs[0]
        np.testing.assert_array_equal(seq[-1, 18:], 0.0)
        np.testing.assert_array_equal(seq[-2, 18:], 1100 + np.arange(9))
        np.testing.assert_array_equal(seq[0, :18], np.arange(18))

    def test_lstm_matches_flat_content(self):
        """Both encodings carry the same numbers, only arranged differently."""
        H = 4
        log = coded_log(12)
        flat = embed(log, H).inputs
        seq = lstm_sequences(log, H).inputs
        for f, s in zip(flat, seq):
            assert sorted(f) == sorted(s[:, :18].ravel().tolist() + s[:-1, 18:].ravel().tolist())


class TestIO:
    def test_session_csv_round_trip(self, tmp_path):
        log = run_session(PlantConfig(), 3, steps=50, session_index=2)
        path = log.write(tmp_path / "s.csv")
        header = path.read_text().splitlines()[0].split(",")
        assert header == CSV_COLUMNS
        again = SessionLog.read(path)
        assert again.digest() == log.digest()
        manifest = json.loads((tmp_path / "s.json").read_text())
        assert manifest["seed"] == 3 and manifest["steps"] == 50
        assert manifest["content_hash"] == log.digest()

    def test_supervised_round_trip(self, tmp_path):
        log = coded_log(20)
        norm = fit_normalizer([log])
        data = embed(log, 2, norm)
        save_supervised(tmp_path / "train", data, 2, norm, "train")
        again, side = load_supervised(tmp_path / "train")
        assert again.digest() == data.digest()
        assert side["H"] == 2 and side["input_dim"] == 45

    def test_supervised_tamper_detected(self, tmp_path):
        log = coded_log(20)
        norm = fit_normalizer([log])
        path = save_supervised(tmp_path / "x", embed(log, 2, norm), 2, norm, "val")
        with np.load(path) as z:
            arrays = dict(z)
        arrays["targets"][0, 0] += 1
        np.savez(path, **arrays)
        with pytest.raises(ValueError):
            load_supervised(path)
