"""
Window functionals over gaze, eye-in-head and head-pose trajectories.

Layout of the 228-wide window vector, in order:

    gaze (67) | eye (67) | head (87) | look_0..look_5 (6) | glasses_flag (1)

Gaze and eye blocks apply the full set (9: min, max, mean, sd, range, p25,
p50, p75, iqr) to x, y, |dx|/t, |dy|/t, |dvec|/t; the reduced set (full set
without range) to |dx|, |dy|; and mean/sd to dx, dy, |dvec|.

The head block applies the full set to yaw, pitch, roll, their speeds
|d.|/t and their displacement magnitudes |d.|, and mean/sd to the signed
differences: 27 + 27 + 27 + 6 = 87. A literal reading of the functional
table gives 66 for head; the 87 stated for the head vector is kept and range
is restored on the displacement magnitudes to reach it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from shared.label_sets import GAZE_DIM
from shared.records import FeatureWindow, Trajectory

FULL: Tuple[str, ...] = ("min", "max", "mean", "sd", "range", "p25", "p50", "p75", "iqr")
REDUCED: Tuple[str, ...] = ("min", "max", "mean", "sd", "p25", "p50", "p75", "iqr")
MEAN_SD: Tuple[str, ...] = ("mean", "sd")

PERCENTILE_METHOD = "linear"
SD_CONVENTION = "population"

GAZE_LAYOUT: Tuple[Tuple[str, Tuple[str, ...]], ...] = (
    ("x", FULL),
    ("y", FULL),
    ("abs_dx_t", FULL),
    ("abs_dy_t", FULL),
    ("abs_dvec_t", FULL),
    ("abs_dx", REDUCED),
    ("abs_dy", REDUCED),
    ("dx", MEAN_SD),
    ("dy", MEAN_SD),
    ("dvec", MEAN_SD),
)

HEAD_LAYOUT: Tuple[Tuple[str, Tuple[str, ...]], ...] = (
    ("yaw", FULL),
    ("pitch", FULL),
    ("roll", FULL),
    ("abs_dyaw_t", FULL),
    ("abs_dpitch_t", FULL),
    ("abs_droll_t", FULL),
    ("abs_dyaw", FULL),
    ("abs_dpitch", FULL),
    ("abs_droll", FULL),
    ("dyaw", MEAN_SD),
    ("dpitch", MEAN_SD),
    ("droll", MEAN_SD),
)

LOOKING_DIM = 6


def _layout_width(layout: Sequence[Tuple[str, Tuple[str, ...]]]) -> int:
    return sum(len(stats) for _, stats in layout)


GAZE_BLOCK_DIM = _layout_width(GAZE_LAYOUT)
HEAD_BLOCK_DIM = _layout_width(HEAD_LAYOUT)

assert GAZE_BLOCK_DIM == 67, GAZE_BLOCK_DIM
assert HEAD_BLOCK_DIM == 87, HEAD_BLOCK_DIM
assert 2 * GAZE_BLOCK_DIM + HEAD_BLOCK_DIM + LOOKING_DIM + 1 == GAZE_DIM


class FunctionalError(ValueError):
    """Raised when a window cannot produce its functionals."""


@dataclass(frozen=True, slots=True)
class FunctionalSet:
    """Summary statistics of one series; the short set leaves the rest as None."""

    mean: float
    sd: float
    min: Optional[float] = None
    max: Optional[float] = None
    range: Optional[float] = None
    p25: Optional[float] = None
    p50: Optional[float] = None
    p75: Optional[float] = None
    iqr: Optional[float] = None

    def values(self, names: Sequence[str]) -> List[float]:
        return [float(getattr(self, name)) for name in names]


@dataclass(slots=True)
class WindowFeatures:
    subject_id: str
    center_ms: int
    gaze_67: np.ndarray
    eye_67: np.ndarray
    head_87: np.ndarray
    looking_6: np.ndarray
    glasses_flag: int

    @property
    def combined_228(self) -> np.ndarray:
        return window_feature_vector(self.gaze_67, self.eye_67, self.head_87, self.looking_6, self.glasses_flag)


def _as_series(series: Sequence[float]) -> np.ndarray:
    values = np.asarray(series, dtype=float).ravel()
    if values.size == 0:
        raise FunctionalError("functionals need a non-empty series.")
    return values


def functionals_full(series: Sequence[float]) -> FunctionalSet:
    """Nine functionals; percentiles interpolate linearly, SD is the population SD."""
    values = _as_series(series)
    p25, p50, p75 = np.percentile(values, [25, 50, 75], method=PERCENTILE_METHOD)
    low, high = float(values.min()), float(values.max())
    return FunctionalSet(
        mean=float(values.mean()),
        sd=float(values.std(ddof=0)),
        min=low,
        max=high,
        range=high - low,
        p25=float(p25),
        p50=float(p50),
        p75=float(p75),
        iqr=float(p75 - p25),
    )


def functionals_mean_sd(series: Sequence[float]) -> FunctionalSet:
    values = _as_series(series)
    return FunctionalSet(mean=float(values.mean()), sd=float(values.std(ddof=0)))


def _functional_values(series: np.ndarray, names: Tuple[str, ...]) -> List[float]:
    if names == MEAN_SD:
        return functionals_mean_sd(series).values(names)
    return functionals_full(series).values(names)


def _differences(values: np.ndarray, t_ms: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if len(values) < 2:
        raise FunctionalError(f"window needs at least 2 valid frames, got {len(values)}.")
    dt_s = np.diff(t_ms) / 1000.0
    return np.diff(values, axis=0), dt_s


def _assemble(layout: Sequence[Tuple[str, Tuple[str, ...]]], series: Dict[str, np.ndarray]) -> np.ndarray:
    out: List[float] = []
    for element, names in layout:
        out.extend(_functional_values(series[element], names))
    return np.asarray(out, dtype=float)


def gaze_feature_vector(angles: np.ndarray, t_ms: np.ndarray) -> np.ndarray:
    """67 functionals of a (horizontal, vertical) angle track over valid frames."""
    angles = np.asarray(angles, dtype=float).reshape(-1, 2)
    delta, dt_s = _differences(angles, np.asarray(t_ms, dtype=float))
    magnitude = np.hypot(delta[:, 0], delta[:, 1])
    series = {
        "x": angles[:, 0],
        "y": angles[:, 1],
        "abs_dx_t": np.abs(delta[:, 0]) / dt_s,
        "abs_dy_t": np.abs(delta[:, 1]) / dt_s,
        "abs_dvec_t": magnitude / dt_s,
        "abs_dx": np.abs(delta[:, 0]),
        "abs_dy": np.abs(delta[:, 1]),
        "dx": delta[:, 0],
        "dy": delta[:, 1],
        "dvec": magnitude,
    }
    vector = _assemble(GAZE_LAYOUT, series)
    assert vector.size == GAZE_BLOCK_DIM
    return vector


def head_feature_vector(head: np.ndarray, t_ms: np.ndarray) -> np.ndarray:
    """87 functionals of a (yaw, pitch, roll) track over valid frames."""
    head = np.asarray(head, dtype=float).reshape(-1, 3)
    delta, dt_s = _differences(head, np.asarray(t_ms, dtype=float))
    series: Dict[str, np.ndarray] = {}
    for i, name in enumerate(("yaw", "pitch", "roll")):
        series[name] = head[:, i]
        series[f"abs_d{name}_t"] = np.abs(delta[:, i]) / dt_s
        series[f"abs_d{name}"] = np.abs(delta[:, i])
        series[f"d{name}"] = delta[:, i]
    vector = _assemble(HEAD_LAYOUT, series)
    assert vector.size == HEAD_BLOCK_DIM
    return vector


def window_feature_vector(
    gaze_67: Optional[np.ndarray],
    eye_67: Optional[np.ndarray],
    head_87: Optional[np.ndarray],
    looking_6: Optional[np.ndarray],
    glasses_flag: Optional[int],
) -> np.ndarray:
    """Concatenate sub-vectors in the documented gaze | eye | head | look | flag order."""
    parts: Dict[str, Optional[np.ndarray]] = {
        "gaze": gaze_67,
        "eye": eye_67,
        "head": head_87,
        "looking": looking_6,
    }
    missing = [name for name, part in parts.items() if part is None]
    if missing or glasses_flag is None:
        raise FunctionalError(f"window is missing sub-vectors: {missing or ['glasses_flag']}.")
    if glasses_flag not in (0, 1, 2):
        raise FunctionalError(f"glasses_flag must be 0, 1 or 2, got {glasses_flag}.")
    expected = {"gaze": GAZE_BLOCK_DIM, "eye": GAZE_BLOCK_DIM, "head": HEAD_BLOCK_DIM, "looking": LOOKING_DIM}
    for name, part in parts.items():
        if np.asarray(part).size != expected[name]:
            raise FunctionalError(f"{name} block has width {np.asarray(part).size}, expected {expected[name]}.")
    vector = np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts.values()] + [[float(glasses_flag)]])
    assert vector.size == GAZE_DIM
    return vector


def compute_window_features(
    trajectory: Trajectory,
    window: FeatureWindow,
    looking_6: np.ndarray,
    glasses_flag: int,
) -> WindowFeatures:
    """Functionals over the window's valid frames."""
    positions = np.asarray(window.frame_indices, dtype=np.int64)
    valid = positions[trajectory.valid[positions]]
    t = trajectory.t_ms[valid]
    if trajectory.eye is None:
        raise FunctionalError("trajectory has no eye-in-head track; run prepare_trajectory first.")
    return WindowFeatures(
        subject_id=window.subject_id,
        center_ms=window.center_ms,
        gaze_67=gaze_feature_vector(trajectory.gaze[valid], t),
        eye_67=gaze_feature_vector(trajectory.eye[valid], t),
        head_87=head_feature_vector(trajectory.head[valid], t),
        looking_6=np.asarray(looking_6, dtype=float),
        glasses_flag=int(glasses_flag),
    )


def _block_names(prefix: str, layout: Sequence[Tuple[str, Tuple[str, ...]]]) -> List[str]:
    return [f"{prefix}_{element}_{stat}" for element, stats in layout for stat in stats]


def column_names() -> List[str]:
    """Names of the 228 window columns, in vector order."""
    names = (
        _block_names("gaze", GAZE_LAYOUT)
        + _block_names("eye", GAZE_LAYOUT)
        + _block_names("head", HEAD_LAYOUT)
        + [f"look_{i}" for i in range(LOOKING_DIM)]
        + ["glasses_flag"]
    )
    assert len(names) == GAZE_DIM
    return names

