"""
Looking-at-coach estimation from gaze points on the camera plane.

The coach is assumed to sit where gaze points are densest: points are
clustered with flat-kernel mean shift, the most populated cluster is taken
as the coach, and every frame gets a weight from its Mahalanobis distance to
that cluster. Weights are binned into a 6-wide one-hot code and averaged
per window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from affectfuse.affectfuse import logger as app_logger
from shared.records import Trajectory

_LOGGER = app_logger.get_logger()

THR_INNER = 1.0
THR_OUTER = 4.0
N_BINS = 6
BANDWIDTH_FLOOR = 1e-6
BANDWIDTH_NN_FACTOR = 3.0
KNN_QUANTILE = 0.3
CONVERGENCE_TOL = 1e-4
MAX_ITER = 300
MAX_SEEDS = 500
COVARIANCE_EPS = 1e-8
PREFILTER_IQR_FACTOR = 3.0

WEIGHT_FORMULAS = ("repaired", "literal")
BANDWIDTH_RULES = ("nn_median", "knn_quantile")


class AttentionError(ValueError):
    """Raised for invalid clustering or geometry input."""


@dataclass(frozen=True, slots=True)
class GazePoint:
    x: float
    y: float
    frame_idx: int
    valid: bool = True


@dataclass(slots=True)
class VCCluster:
    """A density mode: center is the mean of the points inside its kernel."""

    center: np.ndarray
    covariance: np.ndarray
    member_count: int
    support: int = 0


@dataclass(slots=True)
class AttentionResult:
    """Per-frame weights (NaN where no weight applies) and the clustering behind them."""

    weights: np.ndarray
    bandwidth: Optional[float] = None
    clusters: List[VCCluster] = field(default_factory=list)

    @property
    def coach(self) -> Optional[VCCluster]:
        return self.clusters[0] if self.clusters else None


def gaze_direction(angles: np.ndarray) -> np.ndarray:
    """Unit gaze vectors for (horizontal, vertical) angles, looking toward -z."""
    a = np.radians(np.asarray(angles, dtype=float))
    theta, phi = a[..., 0], a[..., 1]
    return np.stack([-np.cos(phi) * np.sin(theta), -np.sin(phi), -np.cos(phi) * np.cos(theta)], axis=-1)


def gaze_points_on_plane(origin: Sequence[float], direction: Sequence[float]) -> Optional[Tuple[float, float]]:
    """Intersect a gaze ray with the camera plane z = 0; None if parallel or pointing away."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise AttentionError("gaze direction has zero length.")
    d = d / norm
    if abs(d[2]) < 1e-12:
        return None
    s = -o[2] / d[2]
    if s <= 0:
        return None
    hit = o + s * d
    return float(hit[0]), float(hit[1])


def estimate_bandwidth(points: np.ndarray, rule: str = "nn_median") -> float:
    """
    Per-video bandwidth.

    ``nn_median`` is three times the median nearest-neighbour distance;
    ``knn_quantile`` is the mean distance to the k-th neighbour with k a
    fixed fraction of the points. Both scale with the points.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise AttentionError(f"bandwidth estimation needs at least 2 points, got {len(pts)}.")
    if rule not in BANDWIDTH_RULES:
        raise AttentionError(f"bandwidth rule must be one of {BANDWIDTH_RULES}, got {rule!r}.")
    tree = cKDTree(pts)
    if rule == "nn_median":
        distances, _ = tree.query(pts, k=2)
        bandwidth = BANDWIDTH_NN_FACTOR * float(np.median(distances[:, 1]))
    else:
        k = max(2, min(len(pts), int(len(pts) * KNN_QUANTILE)))
        distances, _ = tree.query(pts, k=k)
        bandwidth = float(np.mean(distances[:, -1]))
    return max(bandwidth, BANDWIDTH_FLOOR)


def _shift_to_mode(seed: np.ndarray, pts: np.ndarray, tree: cKDTree, bandwidth: float) -> Optional[Tuple[np.ndarray, int]]:
    current = seed
    for _ in range(MAX_ITER):
        neighbours = tree.query_ball_point(current, bandwidth)
        if not neighbours:
            return None
        shifted = pts[neighbours].mean(axis=0)
        if np.linalg.norm(shifted - current) < CONVERGENCE_TOL:
            current = shifted
            break
        current = shifted
    support = len(tree.query_ball_point(current, bandwidth))
    return current, support


def mean_shift(points: np.ndarray, bandwidth: float) -> List[VCCluster]:
    """
    Flat-kernel mean shift.

    Seeds are the points themselves (evenly strided beyond MAX_SEEDS), so
    the result is deterministic and moves with the data under translation.
    Modes closer than half the bandwidth are merged, keeping the better
    supported one. Every point is assigned to its nearest mode and clusters
    are returned by member count, largest first.
    """
    if bandwidth <= 0:
        raise AttentionError(f"bandwidth must be positive, got {bandwidth}.")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise AttentionError("mean shift needs at least one point.")

    tree = cKDTree(pts)
    step = max(1, int(np.ceil(len(pts) / MAX_SEEDS)))
    converged: List[Tuple[np.ndarray, int]] = []
    for seed in pts[::step]:
        result = _shift_to_mode(seed, pts, tree, bandwidth)
        if result is not None:
            converged.append(result)

    converged.sort(key=lambda item: (-item[1], item[0][0], item[0][1]))
    modes: List[np.ndarray] = []
    supports: List[int] = []
    for mode, support in converged:
        if all(np.linalg.norm(mode - kept) >= bandwidth / 2.0 for kept in modes):
            modes.append(mode)
            supports.append(support)

    mode_array = np.vstack(modes)
    _, nearest = cKDTree(mode_array).query(pts, k=1)
    counts = np.bincount(nearest, minlength=len(modes))

    clusters = []
    for i, mode in enumerate(modes):
        inside = pts[tree.query_ball_point(mode, bandwidth)]
        if len(inside) > 1:
            covariance = np.cov(inside.T, bias=True)
        else:
            covariance = np.zeros((2, 2))
        clusters.append(
            VCCluster(center=mode.copy(), covariance=covariance, member_count=int(counts[i]), support=supports[i])
        )
    clusters.sort(key=lambda c: (-c.member_count, -c.support, float(c.center[0]), float(c.center[1])))
    return clusters


def _inverse_covariance(covariance: np.ndarray) -> np.ndarray:
    cov = np.asarray(covariance, dtype=float)
    if not np.isfinite(np.linalg.cond(cov)) or np.linalg.cond(cov) > 1e12:
        cov = cov + COVARIANCE_EPS * np.eye(cov.shape[0])
    return np.linalg.inv(cov)


def mahalanobis_distance(points: np.ndarray, cluster: VCCluster) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    diff = pts - cluster.center
    inverse = _inverse_covariance(cluster.covariance)
    return np.sqrt(np.maximum(np.einsum("ni,ij,nj->n", diff, inverse, diff), 0.0))


def weights_from_distance(
    distance: np.ndarray,
    *,
    thr_inner: float = THR_INNER,
    thr_outer: float = THR_OUTER,
    formula: str = "repaired",
) -> np.ndarray:
    """
    Piecewise weight: 1 up to ``thr_inner``, a linear ramp to 0 at
    ``thr_outer``, 0 beyond. ``literal`` uses (1 - d) / thr_outer for the
    ramp instead, clipped into [0, 1].
    """
    if formula not in WEIGHT_FORMULAS:
        raise AttentionError(f"weight formula must be one of {WEIGHT_FORMULAS}, got {formula!r}.")
    d = np.asarray(distance, dtype=float)
    if formula == "repaired":
        ramp = 1.0 - d / thr_outer
    else:
        ramp = np.clip((1.0 - d) / thr_outer, 0.0, 1.0)
    return np.where(d <= thr_inner, 1.0, np.where(d <= thr_outer, ramp, 0.0))


def mahalanobis_weights(points: np.ndarray, cluster: VCCluster, *, formula: str = "repaired") -> np.ndarray:
    return weights_from_distance(mahalanobis_distance(points, cluster), formula=formula)


def lookingness(weights: Sequence[float]) -> Tuple[np.ndarray, bool]:
    """
    Average one-hot bin codes of per-frame weights, plus an unweighted flag.

    Six equal bins over [0, 1], the last one closed. NaN weights are
    ignored; with no weighted frames the zero vector comes back flagged.
    """
    w = np.asarray(weights, dtype=float)
    w = w[np.isfinite(w)]
    if w.size == 0:
        return np.zeros(N_BINS), True
    bins = np.minimum((np.clip(w, 0.0, 1.0) * N_BINS).astype(np.int64), N_BINS - 1)
    return np.bincount(bins, minlength=N_BINS) / float(w.size), False


def prefilter_points(points: np.ndarray, factor: float = PREFILTER_IQR_FACTOR, floor: float = 0.0) -> np.ndarray:
    """
    Mask of points inside the quartile fences on both axes.

    The fences sit ``factor`` interquartile ranges below the first and above
    the third quartile, never closer than ``floor`` to them.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(0, dtype=bool)
    q25, q75 = np.percentile(pts, [25, 75], axis=0)
    reach = np.maximum(factor * (q75 - q25), floor)
    return ((pts >= q25 - reach - 1e-12) & (pts <= q75 + reach + 1e-12)).all(axis=1)


def video_attention(
    trajectory: Trajectory,
    *,
    bandwidth: Optional[float] = None,
    bandwidth_rule: str = "nn_median",
    formula: str = "repaired",
    prefilter_factor: float = PREFILTER_IQR_FACTOR,
) -> AttentionResult:
    """Locate the coach for one video and weight every valid frame."""
    valid = trajectory.valid if trajectory.valid is not None else trajectory.detected
    weights = np.full(len(trajectory), np.nan)
    usable = valid & np.isfinite(trajectory.plane).all(axis=1)
    positions = np.nonzero(usable)[0]
    points = trajectory.plane[positions]

    floor = bandwidth if bandwidth is not None else (estimate_bandwidth(points, bandwidth_rule) if len(points) >= 2 else 0.0)
    near = prefilter_points(points, prefilter_factor, floor)
    clustered = points[near]
    if len(clustered) < 2:
        _LOGGER.warning("Video {} has {} usable gaze points; no coach estimate.", trajectory.subject_id, len(clustered))
        return AttentionResult(weights=weights)

    h = bandwidth if bandwidth is not None else estimate_bandwidth(clustered, bandwidth_rule)
    clusters = mean_shift(clustered, h)
    coach = clusters[0]
    weights[positions] = mahalanobis_weights(points, coach, formula=formula)
    _LOGGER.debug(
        "Video {}: bandwidth {:.4g}, {} clusters, coach at ({:.3f}, {:.3f}) with {} points.",
        trajectory.subject_id,
        h,
        len(clusters),
        coach.center[0],
        coach.center[1],
        coach.member_count,
    )
    return AttentionResult(weights=weights, bandwidth=h, clusters=clusters)
