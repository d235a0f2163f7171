import numpy as np
import pytest

from earlystream import (
    DataError,
    GeneratorConfig,
    HorizonRange,
    OpenTimeSeries,
    ValidationError,
    build_horizon_datasets,
    extract_features,
    extract_window,
    feature_matrix,
    generate_synthetic,
    load_pdm_csv,
    load_series_csv,
    save_series_csv,
    select_targets,
    split_series,
)
from earlystream.data import _split_sizes


def make_series(T=100, p=2, e=1, seed=0, series_id="s"):
    rng = np.random.default_rng(seed)
    return OpenTimeSeries(
        series_id=series_id,
        telemetry=rng.standard_normal((T, p)),
        errors=rng.random((T, e)) < 0.15,
        labels=(rng.random(T) < 0.2).astype(int),
    )


class TestSelectTargets:
    def test_example_three_targets(self):
        hr = HorizonRange(eta_min=-10, eta_max=20, window=10)
        assert select_targets(make_series(T=100), hr) == [30, 60, 90]

    def test_too_short(self):
        hr = HorizonRange(eta_min=-10, eta_max=20, window=10)
        assert select_targets(make_series(T=29), hr) == []

    def test_single_target_zero_eta_min(self):
        hr = HorizonRange(eta_min=0, eta_max=20, window=10)
        assert select_targets(make_series(T=30), hr) == [30]

    def test_every_horizon_window_fits(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            w = int(rng.integers(1, 8))
            eta_max = int(rng.integers(1, 15))
            eta_min = int(rng.integers(-w, eta_max))
            hr = HorizonRange(eta_min=eta_min, eta_max=eta_max, window=w)
            T = int(rng.integers(1, 120))
            s = make_series(T=T)
            for t_p in select_targets(s, hr):
                for eta in hr.horizons():
                    end = t_p - eta
                    assert w <= end <= T
                assert 1 <= t_p <= T

    def test_spacing_prevents_same_horizon_window_overlap(self):
        hr = HorizonRange(eta_min=-10, eta_max=20, window=10)
        targets = select_targets(make_series(T=400), hr)
        assert all(b - a == 30 for a, b in zip(targets, targets[1:]))
        for eta in hr.horizons():
            ends = [t_p - eta for t_p in targets]
            for a, b in zip(ends, ends[1:]):
                assert a <= b - 10  # one window ends before the next begins


class TestWindows:
    def test_boundary_alignment(self):
        s = make_series(T=20)
        win = extract_window(s, end_t=5, w=5)
        assert np.array_equal(win.telemetry, s.telemetry[0:5])
        win = extract_window(s, end_t=20, w=5)
        assert np.array_equal(win.telemetry, s.telemetry[15:20])

    def test_range_error(self):
        s = make_series(T=20)
        with pytest.raises(ValidationError):
            extract_window(s, end_t=4, w=5)
        with pytest.raises(ValidationError):
            extract_window(s, end_t=21, w=5)


class TestFeatures:
    def test_hand_computed_stats(self):
        s = OpenTimeSeries(
            "x",
            np.array([[1.0], [3.0], [2.0], [10.0], [4.0]]),
            np.zeros((5, 1), bool),
            np.zeros(5, int),
        )
        f = extract_features(extract_window(s, 5, 5))
        assert list(f) == [1.0, 10.0, 4.0, 3.0, 0.0]

    def test_constant_channel(self):
        s = OpenTimeSeries(
            "x", np.full((4, 1), 7.5), np.zeros((4, 2), bool), np.zeros(4, int)
        )
        f = extract_features(extract_window(s, 4, 4))
        assert list(f) == [7.5, 7.5, 7.5, 7.5, 0.0, 0.0]

    def test_even_window_median_averages_middle_pair(self):
        s = OpenTimeSeries(
            "x", np.array([[1.0], [2.0], [4.0], [8.0]]),
            np.zeros((4, 0), bool), np.zeros(4, int),
        )
        f = extract_features(extract_window(s, 4, 4))
        assert f[3] == 3.0

    def test_error_counts(self):
        errs = np.zeros((4, 2), bool)
        errs[1, 0] = errs[3, 0] = errs[2, 1] = True
        s = OpenTimeSeries("x", np.zeros((4, 1)), errs, np.zeros(4, int))
        f = extract_features(extract_window(s, 4, 4))
        assert list(f[-2:]) == [2.0, 1.0]

    def test_non_finite_telemetry_rejected(self):
        tel = np.ones((4, 1)); tel[2, 0] = np.nan
        s = OpenTimeSeries("x", tel, np.zeros((4, 0), bool), np.zeros(4, int))
        with pytest.raises(DataError):
            extract_features(extract_window(s, 4, 4))

    def test_permutation_stability(self):
        rng = np.random.default_rng(5)
        s = make_series(T=30, p=3, e=2, seed=9)
        win = extract_window(s, 20, 8)
        base = extract_features(win)
        for _ in range(10):
            perm = rng.permutation(8)
            shuffled = type(win)(telemetry=win.telemetry[perm], errors=win.errors[perm])
            f = extract_features(shuffled)
            # min/max/median/counts are exact under reordering; mean only up
            # to summation order
            for offset in (0, 1, 3):
                assert np.array_equal(f[offset:12:4], base[offset:12:4])
            assert np.array_equal(f[12:], base[12:])
            assert np.allclose(f, base, rtol=1e-12, atol=0)

    def test_matrix_matches_per_window_exactly(self):
        for seed in range(5):
            s = make_series(T=60, p=3, e=2, seed=seed)
            for w in (1, 4, 7):
                fm = feature_matrix(s, w)
                for t in range(w, s.length + 1):
                    row = extract_features(extract_window(s, t, w))
                    assert np.array_equal(fm[t - w], row), (seed, w, t)


class TestHorizonDatasets:
    def test_counting_example(self):
        hr = HorizonRange(eta_min=-10, eta_max=50, window=10)
        s = make_series(T=3 * 60 + 10, seed=2)  # exactly 3 targets
        assert len(select_targets(s, hr)) == 3
        datasets = build_horizon_datasets([s], hr)
        assert len(datasets) == 61
        assert all(len(ds) == 3 for ds in datasets.values())
        assert sum(len(ds) for ds in datasets.values()) == 183

    def test_empty_targets(self):
        hr = HorizonRange(eta_min=-10, eta_max=50, window=10)
        s = make_series(T=40)
        datasets = build_horizon_datasets([s], hr)
        assert all(len(ds) == 0 for ds in datasets.values())

    def test_labels_come_from_target_for_every_horizon(self):
        hr = HorizonRange(eta_min=-3, eta_max=6, window=4)
        s = make_series(T=80, seed=7)
        datasets = build_horizon_datasets([s], hr)
        for eta, ds in datasets.items():
            for (sid, t_p), label in zip(ds.target_ids, ds.labels):
                assert label == s.labels[t_p - 1]

    def test_alignment_across_horizons(self):
        hr = HorizonRange(eta_min=-3, eta_max=6, window=4)
        series = [make_series(T=70, seed=i, series_id=f"s{i}") for i in range(3)]
        datasets = build_horizon_datasets(series, hr)
        ids = {ds.target_ids for ds in datasets.values()}
        assert len(ids) == 1

    def test_features_match_window_at_offset(self):
        hr = HorizonRange(eta_min=-3, eta_max=6, window=4)
        s = make_series(T=70, seed=4)
        datasets = build_horizon_datasets([s], hr)
        for eta in (-3, 0, 6):
            ds = datasets[eta]
            for (sid, t_p), feats in zip(ds.target_ids, ds.features):
                expected = extract_features(extract_window(s, t_p - eta, 4))
                assert np.array_equal(feats, expected)


class TestSplit:
    def test_spec_sizes(self):
        assert _split_sizes(100) == {
            "train": 50, "test": 20, "validation": 15, "estimation": 15
        }
        assert _split_sizes(4) == {
            "train": 1, "test": 1, "validation": 1, "estimation": 1
        }

    def test_too_few(self):
        with pytest.raises(ValidationError):
            split_series([make_series(seed=i, series_id=f"s{i}") for i in range(3)], 0)

    def test_partition_properties(self):
        for n in (4, 5, 6, 7, 10, 33, 100):
            series = [make_series(T=10, seed=i, series_id=f"s{i:03d}") for i in range(n)]
            split = split_series(series, seed=42)
            ids = [s.series_id for part in
                   (split.train, split.test, split.validation, split.estimation)
                   for s in part]
            assert len(ids) == n and len(set(ids)) == n
            assert all(len(part) >= 1 for part in
                       (split.train, split.test, split.validation, split.estimation))

    def test_deterministic(self):
        series = [make_series(T=10, seed=i, series_id=f"s{i:03d}") for i in range(20)]
        a = split_series(series, seed=7)
        b = split_series(list(reversed(series)), seed=7)
        assert [s.series_id for s in a.train] == [s.series_id for s in b.train]
        c = split_series(series, seed=8)
        assert [s.series_id for s in a.train] != [s.series_id for s in c.train]


class TestGenerator:
    def test_disabled_mechanisms_mean_no_errors(self):
        cfg = GeneratorConfig(
            seed=0, num_series=3, length=200, premise_fire_prob=0.0,
            noise_error_rate=0.0,
        )
        for s in generate_synthetic(cfg):
            assert not s.errors.any()

    def test_zero_failure_rate_means_all_normal(self):
        cfg = GeneratorConfig(seed=0, num_series=3, length=200, failure_rate=0.0)
        for s in generate_synthetic(cfg):
            assert not s.labels.any()

    def test_bit_identical_repetition(self):
        cfg = GeneratorConfig(seed=123, num_series=4, length=300)
        a = generate_synthetic(cfg)
        b = generate_synthetic(cfg)
        for x, y in zip(a, b):
            assert x.series_id == y.series_id
            assert np.array_equal(x.telemetry, y.telemetry)
            assert np.array_equal(x.errors, y.errors)
            assert np.array_equal(x.labels, y.labels)

    def test_invalid_config(self):
        with pytest.raises(ValidationError):
            GeneratorConfig(seed=0, num_series=2, length=100, premise_fire_prob=1.5)
        with pytest.raises(ValidationError):
            GeneratorConfig(seed=0, num_series=2, length=100,
                            premise_lag_low=9, premise_lag_high=5)

    def test_premise_containment_interval(self):
        # fixed lag L: the window at horizon eta holds burst flags iff some
        # burst step falls inside, i.e. eta in [L - w - burst + 2, L]
        L, w, burst = 15, 10, 3
        cfg = GeneratorConfig(
            seed=21, num_series=6, length=600, num_error_types=1,
            failure_rate=2.0, premise_lag_low=L, premise_lag_high=L,
            premise_fire_prob=1.0, noise_error_rate=0.0,
            telemetry_drift_amplitude=0.0,
        )
        lo, hi = L - w - burst + 2, L
        checked = 0
        for s in generate_synthetic(cfg):
            onsets = np.flatnonzero(np.diff(np.concatenate([[0], s.labels])) == 1) + 1
            isolated = [
                o for o in onsets
                if all(o == q or abs(o - q) > 100 for q in onsets)
            ]
            for t_p in isolated:
                for eta in range(lo - 4, hi + 5):
                    end = t_p - eta
                    if not (w <= end <= s.length):
                        continue
                    count = extract_features(extract_window(s, int(end), w))[-1]
                    assert (count > 0) == (lo <= eta <= hi), (t_p, eta)
                    checked += 1
        assert checked > 50


class TestNativeFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        series = [make_series(T=25, p=2, e=2, seed=i, series_id=f"s{i}") for i in range(3)]
        path = tmp_path / "data.csv"
        save_series_csv(series, path)
        loaded = load_series_csv(path)
        assert [s.series_id for s in loaded] == [s.series_id for s in series]
        for a, b in zip(series, loaded):
            assert np.array_equal(a.telemetry, b.telemetry)
            assert np.array_equal(a.errors, b.errors)
            assert np.array_equal(a.labels, b.labels)

    def test_rewrite_is_byte_identical(self, tmp_path):
        series = [make_series(T=10, seed=5, series_id="a")]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        save_series_csv(series, p1)
        save_series_csv(load_series_csv(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_rows(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("series_id,t,tel_1,label\na,1,0.5,0\na,3,0.5,0\n")
        with pytest.raises(DataError, match="timestamps"):
            load_series_csv(path)


PDM_TELEMETRY = """machineID,datetime,volt,rotate,pressure,vibration
1,2015-01-01 06:00:00,176.2,418.5,113.0,45.08
1,2015-01-01 07:00:00,162.8,402.7,95.46,43.41
1,2015-01-01 08:00:00,170.9,527.3,75.23,34.17
2,2015-01-01 06:00:00,157.6,444.2,96.13,38.33
2,2015-01-01 07:00:00,172.5,443.9,101.0,35.39
2,2015-01-01 08:00:00,175.6,504.1,103.2,41.21
"""

PDM_ERRORS = """machineID,datetime,errorID
1,2015-01-01 07:00:00,error1
2,2015-01-01 06:00:00,error3
2,2015-01-01 08:00:00,error1
"""

PDM_FAILURES = """machineID,datetime,failure
2,2015-01-01 07:00:00,comp2
"""


def write_pdm(tmp_path, telemetry=PDM_TELEMETRY, errors=PDM_ERRORS, failures=PDM_FAILURES):
    t, e, f = tmp_path / "telemetry.csv", tmp_path / "errors.csv", tmp_path / "failures.csv"
    t.write_text(telemetry)
    e.write_text(errors)
    f.write_text(failures)
    return t, e, f


class TestPdmLoader:
    def test_join_and_flags(self, tmp_path):
        series = load_pdm_csv(*write_pdm(tmp_path))
        assert [s.series_id for s in series] == ["1", "2"]
        m1, m2 = series
        assert m1.length == 3 and m1.n_telemetry == 4
        assert m1.n_error_types == 2  # error1, error3 discovered and widened
        assert m1.errors[1, 0] and m1.errors.sum() == 1
        assert m2.errors[0, 1] and m2.errors[2, 0] and m2.errors.sum() == 2
        assert m2.labels.tolist() == [0, 1, 0]
        assert not m1.labels.any()
        assert m1.telemetry[0, 0] == 176.2

    def test_empty_telemetry(self, tmp_path):
        paths = write_pdm(
            tmp_path,
            telemetry="machineID,datetime,volt,rotate,pressure,vibration\n",
            errors="machineID,datetime,errorID\n",
            failures="machineID,datetime,failure\n",
        )
        assert load_pdm_csv(*paths) == []

    def test_unknown_machine(self, tmp_path):
        paths = write_pdm(tmp_path, errors=PDM_ERRORS + "9,2015-01-01 06:00:00,error1\n")
        with pytest.raises(DataError, match="errors.csv:5"):
            load_pdm_csv(*paths)

    def test_off_grid_event(self, tmp_path):
        paths = write_pdm(tmp_path, failures="machineID,datetime,failure\n1,2015-01-02 06:00:00,comp1\n")
        with pytest.raises(DataError, match="failures.csv:2"):
            load_pdm_csv(*paths)

    def test_gap_in_grid(self, tmp_path):
        bad = PDM_TELEMETRY.replace("1,2015-01-01 07:00:00,162.8,402.7,95.46,43.41\n", "")
        paths = write_pdm(tmp_path, telemetry=bad, errors="machineID,datetime,errorID\n",
                          failures="machineID,datetime,failure\n")
        with pytest.raises(DataError, match="hourly"):
            load_pdm_csv(*paths)

    def test_malformed_value(self, tmp_path):
        bad = PDM_TELEMETRY.replace("162.8", "volts!")
        paths = write_pdm(tmp_path, telemetry=bad)
        with pytest.raises(DataError, match="telemetry.csv:3"):
            load_pdm_csv(*paths)
