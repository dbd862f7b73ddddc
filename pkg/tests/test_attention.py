import numpy as np
import pytest

from core.attention import (
    AttentionError,
    VCCluster,
    estimate_bandwidth,
    gaze_direction,
    gaze_points_on_plane,
    lookingness,
    mahalanobis_weights,
    mean_shift,
    prefilter_points,
    video_attention,
    weights_from_distance,
)
from shared.records import Trajectory


def test_perpendicular_ray_hits_origin():
    assert gaze_points_on_plane((0, 0, 1), (0, 0, -1)) == pytest.approx((0.0, 0.0))


def test_oblique_ray_intersection():
    direction = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
    assert gaze_points_on_plane((0, 0, 1), direction) == pytest.approx((1.0, 0.0))


def test_ray_pointing_away_has_no_intersection():
    assert gaze_points_on_plane((0, 0, 1), (0, 0, 1)) is None
    assert gaze_points_on_plane((0, 0, 1), (1, 0, 0)) is None


def test_zero_direction_is_rejected():
    with pytest.raises(AttentionError):
        gaze_points_on_plane((0, 0, 1), (0, 0, 0))


def test_straight_ahead_gaze_points_at_camera():
    assert gaze_direction(np.array([0.0, 0.0])) == pytest.approx([0.0, 0.0, -1.0])


def test_bandwidth_on_unit_grid():
    grid = np.array([(x, y) for x in range(5) for y in range(5)], dtype=float)
    assert estimate_bandwidth(grid) == pytest.approx(3.0)


def test_bandwidth_floor_for_duplicates():
    assert estimate_bandwidth(np.zeros((10, 2))) == 1e-6


def test_bandwidth_rules_scale_with_the_points():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(200, 2))
    for rule in ("nn_median", "knn_quantile"):
        assert estimate_bandwidth(pts * 10.0, rule) == pytest.approx(10.0 * estimate_bandwidth(pts, rule))


def test_bandwidth_rejects_unknown_rule_and_single_point():
    with pytest.raises(AttentionError):
        estimate_bandwidth(np.zeros((5, 2)), "silverman")
    with pytest.raises(AttentionError):
        estimate_bandwidth(np.zeros((1, 2)))


def test_single_blob_gives_one_cluster_at_centroid():
    rng = np.random.default_rng(1)
    pts = rng.normal(loc=(2.0, -1.0), scale=0.05, size=(200, 2))
    clusters = mean_shift(pts, 1.0)
    assert len(clusters) == 1
    assert clusters[0].center == pytest.approx(pts.mean(axis=0), abs=1e-3)
    assert clusters[0].member_count == 200


def test_two_blobs_give_two_clusters():
    rng = np.random.default_rng(2)
    a = rng.normal(loc=(0.0, 0.0), scale=0.3, size=(300, 2))
    b = rng.normal(loc=(10.0, 0.0), scale=0.3, size=(200, 2))
    clusters = mean_shift(np.vstack([a, b]), 2.0)
    assert len(clusters) == 2
    assert clusters[0].center == pytest.approx([0.0, 0.0], abs=0.1)
    assert clusters[1].center == pytest.approx([10.0, 0.0], abs=0.1)
    assert [c.member_count for c in clusters] == [300, 200]


def test_identical_points_give_zero_covariance():
    clusters = mean_shift(np.ones((20, 2)), 0.5)
    assert len(clusters) == 1
    assert not clusters[0].covariance.any()


def test_mean_shift_is_translation_equivariant():
    rng = np.random.default_rng(4)
    pts = np.vstack([rng.normal((0, 0), 0.2, (100, 2)), rng.normal((5, 5), 0.2, (60, 2))])
    base = mean_shift(pts, 1.5)
    moved = mean_shift(pts + np.array([100.0, -50.0]), 1.5)
    assert [c.member_count for c in base] == [c.member_count for c in moved]
    for c, m in zip(base, moved):
        assert m.center == pytest.approx(c.center + np.array([100.0, -50.0]), abs=1e-6)


def test_mean_shift_rejects_bad_bandwidth():
    with pytest.raises(AttentionError):
        mean_shift(np.zeros((3, 2)), 0.0)


@pytest.mark.parametrize("distance, weight", [(0.0, 1.0), (1.0, 1.0), (2.0, 0.5), (4.0, 0.0), (6.0, 0.0)])
def test_repaired_weights(distance, weight):
    assert weights_from_distance(np.array([distance]))[0] == pytest.approx(weight)


def test_literal_weights_stay_in_unit_interval():
    w = weights_from_distance(np.linspace(0, 5, 51), formula="literal")
    assert ((w >= 0) & (w <= 1)).all()
    assert w[0] == 1.0


def test_point_at_cluster_center_has_full_weight():
    cluster = VCCluster(center=np.array([1.0, 1.0]), covariance=np.eye(2), member_count=10)
    assert mahalanobis_weights(np.array([[1.0, 1.0], [1.0, 3.0], [1.0, 9.0]]), cluster).tolist() == [1.0, 0.5, 0.0]


def test_singular_covariance_is_regularised():
    cluster = VCCluster(center=np.zeros(2), covariance=np.zeros((2, 2)), member_count=5)
    weights = mahalanobis_weights(np.array([[0.0, 0.0], [1.0, 0.0]]), cluster)
    assert weights.tolist() == [1.0, 0.0]


def test_lookingness_examples():
    assert lookingness(np.ones(10))[0].tolist() == [0, 0, 0, 0, 0, 1]
    half, _ = lookingness(np.array([0.0] * 5 + [1.0] * 5))
    assert half.tolist() == [0.5, 0, 0, 0, 0, 0.5]
    assert lookingness(np.array([0.5, np.nan]))[0].tolist() == [0, 0, 0, 1, 0, 0]


def test_windows_without_weighted_frames_are_flagged():
    codes, unweighted = lookingness(np.array([np.nan, np.nan]))
    assert codes.tolist() == [0] * 6
    assert unweighted
    assert lookingness(np.array([]))[1]
    assert not lookingness(np.array([0.0, np.nan]))[1]


def test_prefilter_flags_far_points():
    rng = np.random.default_rng(5)
    pts = np.vstack([rng.normal(0, 1, (100, 2)), [[50.0, 50.0]]])
    mask = prefilter_points(pts)
    assert not mask[-1]
    assert mask[:100].mean() > 0.95


def _plane_trajectory(plane):
    n = len(plane)
    return Trajectory(
        "SP01",
        np.arange(n),
        np.arange(n) * 40.0,
        np.zeros((n, 2)),
        np.zeros((n, 3)),
        np.tile([0.0, 0.0, 1.0], (n, 1)),
        plane,
        np.ones(n, dtype=bool),
    )


def _flat_band(seed=9):
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, 0.05, 300)
    y = np.r_[np.zeros(240), np.full(60, 0.1)]
    return np.column_stack([x, y])


def test_prefilter_fences_respect_the_floor_on_a_flat_axis():
    pts = _flat_band()
    assert prefilter_points(pts).sum() == 240
    assert prefilter_points(pts, floor=0.3).all()


def test_prefilter_fences_sit_outside_the_quartiles():
    pts = np.column_stack([np.arange(9.0), np.zeros(9)])
    pts = np.vstack([pts, [[20.0, 0.0], [21.0, 0.0]]])
    q25, q75 = np.percentile(pts[:, 0], [25, 75])
    assert prefilter_points(pts, factor=1.0, floor=0.5).tolist() == (
        (pts[:, 0] >= q25 - (q75 - q25)) & (pts[:, 0] <= q75 + (q75 - q25))
    ).tolist()


def test_video_attention_keeps_a_band_with_no_spread():
    result = video_attention(_plane_trajectory(_flat_band()), bandwidth=0.3)
    assert result.coach.member_count == 300
    assert np.isfinite(result.weights).all()


def test_video_attention_finds_the_dense_cluster():
    rng = np.random.default_rng(6)
    coach = rng.normal((0.0, 0.0), 0.05, (240, 2))
    elsewhere = rng.normal((2.0, 2.0), 0.05, (60, 2))
    result = video_attention(_plane_trajectory(np.vstack([coach, elsewhere])), bandwidth=0.3)
    assert result.coach.center == pytest.approx([0.0, 0.0], abs=0.05)
    assert result.bandwidth == 0.3
    assert np.all(result.weights[240:] == 0.0)
    assert result.weights[:240].mean() > 0.5


def test_video_attention_with_estimated_bandwidth():
    rng = np.random.default_rng(7)
    result = video_attention(_plane_trajectory(rng.normal(0, 0.1, (200, 2))))
    assert result.bandwidth > 0
    assert result.coach is not None
    assert np.isfinite(result.weights).all()


def test_video_attention_without_usable_points():
    traj = _plane_trajectory(np.zeros((3, 2)))
    traj.valid[:] = False
    result = video_attention(traj)
    assert result.coach is None
    assert np.isnan(result.weights).all()


@pytest.mark.parametrize("seed", range(20))
def test_planted_hotspot_is_recovered(seed):
    rng = np.random.default_rng(100 + seed)
    planted = rng.uniform(-1.0, 1.0, 2)
    hotspot = rng.normal(planted, 0.05, (300, 2))
    scattered = rng.uniform(-3.0, 3.0, (100, 2))
    result = video_attention(_plane_trajectory(np.vstack([hotspot, scattered])), bandwidth=0.3)
    assert np.linalg.norm(result.coach.center - planted) < 0.5 * result.bandwidth
    weights = result.weights[np.isfinite(result.weights)]
    assert weights.min() >= 0.0 and weights.max() <= 1.0
