import numpy as np
import pytest

from core.functionals import (
    FunctionalError,
    column_names,
    compute_window_features,
    functionals_full,
    functionals_mean_sd,
    gaze_feature_vector,
    head_feature_vector,
    window_feature_vector,
)
from core.trajectories import make_windows, prepare_trajectory
from shared.records import Trajectory

GAZE_NAMES = column_names()[:67]
HEAD_NAMES = column_names()[134:221]


def test_constant_series_functionals():
    stats = functionals_full([2, 2, 2])
    assert stats.min == stats.max == stats.mean == stats.p25 == stats.p50 == stats.p75 == 2
    assert stats.sd == stats.range == stats.iqr == 0


def test_population_sd_and_range():
    stats = functionals_full([1, 2, 3, 4])
    assert stats.mean == 2.5
    assert stats.sd == pytest.approx(1.118, abs=1e-3)
    assert stats.range == 3
    assert stats.p25 == pytest.approx(1.75)


def test_singleton_series():
    stats = functionals_full([5])
    assert stats.min == stats.max == stats.mean == stats.p50 == 5
    assert stats.sd == stats.range == stats.iqr == 0


@pytest.mark.parametrize("series, expected", [([0, 0], (0, 0)), ([-1, 1], (0, 1)), ([3], (3, 0))])
def test_mean_sd(series, expected):
    stats = functionals_mean_sd(series)
    assert (stats.mean, stats.sd) == expected


def test_empty_series_is_rejected():
    with pytest.raises(FunctionalError):
        functionals_full([])


def test_constant_gaze_has_zero_motion_features():
    angles = np.tile([4.0, -2.0], (10, 1))
    vector = gaze_feature_vector(angles, np.arange(10) * 40.0)
    assert vector.size == 67
    assert vector[GAZE_NAMES.index("gaze_x_mean")] == 4.0
    assert vector[GAZE_NAMES.index("gaze_y_p50")] == -2.0
    motion = [i for i, name in enumerate(GAZE_NAMES) if "_d" in name or "dvec" in name]
    assert np.all(vector[motion] == 0.0)


def test_gaze_ramp_speed():
    angles = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    vector = gaze_feature_vector(angles, np.array([0.0, 100.0, 200.0]))
    assert vector[GAZE_NAMES.index("gaze_abs_dx_t_mean")] == pytest.approx(10.0)
    assert vector[GAZE_NAMES.index("gaze_abs_dvec_t_mean")] == pytest.approx(10.0)
    assert vector[GAZE_NAMES.index("gaze_dx_mean")] == pytest.approx(1.0)


def test_head_yaw_speed():
    head = np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]])
    vector = head_feature_vector(head, np.array([0.0, 1000.0]))
    assert vector.size == 87
    assert vector[HEAD_NAMES.index("head_abs_dyaw_t_mean")] == pytest.approx(10.0)
    assert vector[HEAD_NAMES.index("head_abs_dpitch_t_mean")] == 0.0


def test_constant_head_has_zero_deltas():
    vector = head_feature_vector(np.tile([5.0, 1.0, -1.0], (8, 1)), np.arange(8) * 40.0)
    deltas = [i for i, name in enumerate(HEAD_NAMES) if name.startswith(("head_abs_d", "head_d"))]
    assert np.all(vector[deltas] == 0.0)


def test_window_needs_two_frames():
    with pytest.raises(FunctionalError):
        gaze_feature_vector(np.zeros((1, 2)), np.zeros(1))


def test_zero_blocks_give_zero_vector_with_flag():
    vector = window_feature_vector(np.zeros(67), np.zeros(67), np.zeros(87), np.zeros(6), 2)
    assert vector.size == 228
    assert vector[-1] == 2.0
    assert not vector[:-1].any()


def test_window_vector_follows_documented_order():
    gaze, eye, head, look = np.full(67, 1.0), np.full(67, 2.0), np.full(87, 3.0), np.full(6, 4.0)
    vector = window_feature_vector(gaze, eye, head, look, 1)
    assert vector[0] == 1.0 and vector[67] == 2.0 and vector[134] == 3.0 and vector[221] == 4.0
    swapped = window_feature_vector(eye, gaze, head, look, 1)
    assert not np.array_equal(vector, swapped)


def test_window_vector_rejects_bad_parts():
    with pytest.raises(FunctionalError):
        window_feature_vector(np.zeros(66), np.zeros(67), np.zeros(87), np.zeros(6), 0)
    with pytest.raises(FunctionalError):
        window_feature_vector(np.zeros(67), np.zeros(67), np.zeros(87), np.zeros(6), 3)
    with pytest.raises(FunctionalError):
        window_feature_vector(None, np.zeros(67), np.zeros(87), np.zeros(6), 0)


def test_column_names_are_unique_and_complete():
    names = column_names()
    assert len(names) == 228 == len(set(names))
    assert names[-1] == "glasses_flag"
    assert names[221:227] == [f"look_{i}" for i in range(6)]


def test_compute_window_features_on_prepared_trajectory():
    n = 50
    t = np.arange(n) * 40.0
    gaze = np.stack([np.linspace(0, 5, n), np.zeros(n)], axis=1)
    traj = Trajectory("SP01", np.arange(n), t, gaze, np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 2)), np.ones(n, dtype=bool))
    prepare_trajectory(traj)
    window = make_windows(traj)[2]
    features = compute_window_features(traj, window, np.array([0, 0, 0, 0, 0, 1.0]), 1)
    combined = features.combined_228
    assert combined.shape == (228,)
    assert combined[-1] == 1.0
    assert combined[221:227].tolist() == [0, 0, 0, 0, 0, 1.0]
    assert np.isfinite(combined).all()


def _brute_percentile(values, q):
    ordered = sorted(values)
    position = (len(ordered) - 1) * q / 100.0
    low = int(position)
    high = min(low + 1, len(ordered) - 1)
    return ordered[low] + (ordered[high] - ordered[low]) * (position - low)


def test_functionals_match_brute_force_on_random_windows():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        values = list(rng.normal(rng.uniform(-20, 20), rng.uniform(0.1, 10), int(rng.integers(1, 60))))
        mean = sum(values) / len(values)
        sd = (sum((v - mean) ** 2 for v in values) / len(values)) ** 0.5
        p25, p50, p75 = (_brute_percentile(values, q) for q in (25, 50, 75))
        stats = functionals_full(values)
        expected = {
            "min": min(values),
            "max": max(values),
            "mean": mean,
            "sd": sd,
            "range": max(values) - min(values),
            "p25": p25,
            "p50": p50,
            "p75": p75,
            "iqr": p75 - p25,
        }
        for name, value in expected.items():
            assert getattr(stats, name) == pytest.approx(value, rel=1e-9, abs=1e-12), name
