"""
Gaze and head trajectory cleaning, eye-in-head conversion and windowing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from affectfuse.affectfuse import logger as app_logger
from shared.records import FeatureWindow, Trajectory

_LOGGER = app_logger.get_logger()

MEDIAN_WIDTH = 5
MAX_EYE_DEG = 40.0
MAX_EYE_SPEED_DEG_S = 860.0
MAX_HEAD_SPEED_DEG_S = 700.0

WINDOW_MS = 1500
CENTER_STRIDE_MS = 500
MIN_SPAN_MS = 500
MAX_INVALID_FRACTION = 0.5

MEDIAN_EDGE_MODE = "truncated"
EYE_MODELS = ("subtract", "rotation")


class TrajectoryError(ValueError):
    """Raised for malformed trajectory input."""


@dataclass(slots=True)
class WindowingResult:
    """Windows that survived filtering plus the candidate/drop tally."""

    windows: List[FeatureWindow] = field(default_factory=list)
    n_candidates: int = 0

    @property
    def n_dropped(self) -> int:
        return self.n_candidates - len(self.windows)

    @property
    def drop_rate(self) -> float:
        if self.n_candidates == 0:
            return 0.0
        return self.n_dropped / self.n_candidates

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self) -> Iterator[FeatureWindow]:
        return iter(self.windows)

    def __getitem__(self, index: int) -> FeatureWindow:
        return self.windows[index]


def median_filter(series: Sequence[float], width: int = MEDIAN_WIDTH) -> np.ndarray:
    """Running median with truncated windows at the edges; length is preserved."""
    values = np.asarray(series, dtype=float)
    if values.size == 0:
        raise TrajectoryError("median_filter needs a non-empty series.")
    if width < 1 or width % 2 == 0:
        raise TrajectoryError(f"median filter width must be odd and >= 1, got {width}.")
    if width == 1:
        return values.copy()
    half = width // 2
    padded = np.concatenate([np.full(half, np.nan), values, np.full(half, np.nan)])
    return np.nanmedian(sliding_window_view(padded, width), axis=1)


def eye_in_head(gaze: np.ndarray, head: np.ndarray) -> np.ndarray:
    """Small-angle eye rotation: gaze angles minus head yaw and pitch (roll ignored)."""
    g = np.asarray(gaze, dtype=float)
    h = np.asarray(head, dtype=float)
    return np.stack([g[..., 0] - h[..., 0], g[..., 1] - h[..., 1]], axis=-1)


def _direction(angles: np.ndarray) -> np.ndarray:
    theta = np.radians(angles[..., 0])
    phi = np.radians(angles[..., 1])
    return np.stack([np.cos(phi) * np.sin(theta), np.sin(phi), np.cos(phi) * np.cos(theta)], axis=-1)


def _head_rotation(head: np.ndarray) -> np.ndarray:
    yaw, pitch, roll = (np.radians(head[..., i]) for i in range(3))
    n = yaw.shape
    ones, zeros = np.ones(n), np.zeros(n)

    ry = np.stack(
        [np.stack([np.cos(yaw), zeros, np.sin(yaw)], -1), np.stack([zeros, ones, zeros], -1),
         np.stack([-np.sin(yaw), zeros, np.cos(yaw)], -1)],
        axis=-2,
    )
    rx = np.stack(
        [np.stack([ones, zeros, zeros], -1), np.stack([zeros, np.cos(pitch), np.sin(pitch)], -1),
         np.stack([zeros, -np.sin(pitch), np.cos(pitch)], -1)],
        axis=-2,
    )
    rz = np.stack(
        [np.stack([np.cos(roll), -np.sin(roll), zeros], -1), np.stack([np.sin(roll), np.cos(roll), zeros], -1),
         np.stack([zeros, zeros, ones], -1)],
        axis=-2,
    )
    return ry @ rx @ rz


def eye_in_head_rotation(gaze: np.ndarray, head: np.ndarray) -> np.ndarray:
    """Eye rotation from composing the gaze direction with the inverse head rotation."""
    g = np.atleast_2d(np.asarray(gaze, dtype=float))
    h = np.atleast_2d(np.asarray(head, dtype=float))
    rotation = _head_rotation(h)
    local = np.einsum("nji,nj->ni", rotation, _direction(g))
    x = np.degrees(np.arctan2(local[:, 0], local[:, 2]))
    y = np.degrees(np.arcsin(np.clip(local[:, 1], -1.0, 1.0)))
    result = np.stack([x, y], axis=-1)
    return result.reshape(np.asarray(gaze, dtype=float).shape)


def smooth_trajectory(trajectory: Trajectory, width: int = MEDIAN_WIDTH) -> Trajectory:
    """Median-filter gaze and head angles over detected frames, in place."""
    detected = np.nonzero(trajectory.detected)[0]
    if detected.size == 0:
        return trajectory
    for column in range(2):
        trajectory.gaze[detected, column] = median_filter(trajectory.gaze[detected, column], width)
    for column in range(3):
        trajectory.head[detected, column] = median_filter(trajectory.head[detected, column], width)
    return trajectory


def validate_frames(
    trajectory: Trajectory,
    *,
    max_eye_deg: float = MAX_EYE_DEG,
    max_eye_speed: float = MAX_EYE_SPEED_DEG_S,
    max_head_speed: float = MAX_HEAD_SPEED_DEG_S,
) -> np.ndarray:
    """
    Mark anatomically implausible frames invalid.

    A frame is invalid when face data is missing, either eye angle exceeds
    ``max_eye_deg``, or the eye (vector) or any head component moves faster
    than its limit relative to the previous valid frame. Speeds use the
    timestamps, not the nominal frame rate.
    """
    t = trajectory.t_ms
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        position = int(np.nonzero(np.diff(t) <= 0)[0][0])
        raise TrajectoryError(
            f"timestamps must increase strictly; frame {position + 1} has t_ms {t[position + 1]} "
            f"after {t[position]}."
        )
    if trajectory.eye is None:
        trajectory.eye = eye_in_head(trajectory.gaze, trajectory.head)
    eye = trajectory.eye
    head = trajectory.head

    finite = np.isfinite(eye).all(axis=1) & np.isfinite(head).all(axis=1) & np.isfinite(trajectory.gaze).all(axis=1)
    candidate = trajectory.detected & finite & (np.abs(eye) <= max_eye_deg).all(axis=1)

    valid = np.zeros(len(t), dtype=bool)
    previous: Optional[int] = None
    for i in np.nonzero(candidate)[0]:
        if previous is not None:
            dt_s = (t[i] - t[previous]) / 1000.0
            eye_speed = float(np.hypot(*(eye[i] - eye[previous]))) / dt_s
            head_speed = float(np.max(np.abs(head[i] - head[previous]))) / dt_s
            if eye_speed > max_eye_speed or head_speed > max_head_speed:
                continue
        valid[i] = True
        previous = int(i)

    trajectory.valid = valid
    return valid


def _frame_interval_ms(t: np.ndarray) -> float:
    if len(t) < 2:
        return 0.0
    return float(np.median(np.diff(t)))


def video_bounds_ms(trajectory: Trajectory) -> Tuple[float, float]:
    """[start, end) of the video: the first frame time to one frame past the last."""
    t = trajectory.t_ms
    if len(t) == 0:
        return 0.0, 0.0
    return float(t[0]), float(t[-1]) + _frame_interval_ms(t)


def make_windows(
    trajectory: Trajectory,
    window_ms: int = WINDOW_MS,
    center_stride_ms: int = CENTER_STRIDE_MS,
    min_span_ms: int = MIN_SPAN_MS,
    max_invalid: float = MAX_INVALID_FRACTION,
) -> WindowingResult:
    """
    Cut windows centered every ``center_stride_ms`` over the video.

    Each window covers [center - window_ms/2, center + window_ms/2) clipped to
    the video. A window is dropped when its clipped span is below
    ``min_span_ms`` or more than ``max_invalid`` of its frames are invalid.
    """
    result = WindowingResult()
    if len(trajectory) == 0:
        return result
    t = trajectory.t_ms
    valid = trajectory.valid if trajectory.valid is not None else trajectory.detected
    video_start, video_end = video_bounds_ms(trajectory)
    half = window_ms / 2.0

    first_center = int(np.ceil(video_start / center_stride_ms)) * center_stride_ms
    centers = np.arange(first_center, video_end + 1e-9, center_stride_ms)
    for center in centers:
        result.n_candidates += 1
        lo = max(center - half, video_start)
        hi = min(center + half, video_end)
        span = hi - lo
        if span < min_span_ms:
            continue
        first = int(np.searchsorted(t, lo, side="left"))
        last = int(np.searchsorted(t, hi, side="left"))
        if last <= first:
            continue
        valid_fraction = float(valid[first:last].mean())
        if 1.0 - valid_fraction > max_invalid:
            continue
        result.windows.append(
            FeatureWindow(
                subject_id=trajectory.subject_id,
                center_ms=int(center),
                span_ms=int(round(span)),
                start_ms=int(round(lo)),
                end_ms=int(round(hi)),
                frame_indices=tuple(range(first, last)),
                valid_fraction=valid_fraction,
            )
        )

    _LOGGER.debug(
        "Windowing {}: {} of {} windows kept ({:.1%} dropped).",
        trajectory.subject_id,
        len(result.windows),
        result.n_candidates,
        result.drop_rate,
    )
    return result


def prepare_trajectory(
    trajectory: Trajectory,
    *,
    median_width: int = MEDIAN_WIDTH,
    eye_model: str = "subtract",
) -> Trajectory:
    """Smooth, convert to eye-in-head rotation and validate one subject's frames."""
    if eye_model not in EYE_MODELS:
        raise TrajectoryError(f"eye_model must be one of {EYE_MODELS}, got {eye_model!r}.")
    smooth_trajectory(trajectory, median_width)
    if eye_model == "rotation":
        trajectory.eye = eye_in_head_rotation(trajectory.gaze, trajectory.head)
    else:
        trajectory.eye = eye_in_head(trajectory.gaze, trajectory.head)
    validate_frames(trajectory)
    return trajectory
