"""
Shared record types passed between pipeline stages.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .label_sets import (
    AUDIO_SEGMENT_LABELS,
    CHANNEL_LABELS,
    COUNTRIES,
    MODALITY_ORDER,
    SEGMENT_MS,
    VIDEO_FRAME_LABELS,
)


class RecordValidationError(ValueError):
    """Raised when a record violates its field invariants."""


@dataclass(frozen=True, slots=True)
class AnnotationEvent:
    """One rater-asserted emotion event on one channel."""

    rater_id: str
    channel: str
    start_ms: int
    end_ms: int
    label: str

    def __post_init__(self) -> None:
        if self.channel not in CHANNEL_LABELS:
            raise RecordValidationError(
                f"channel must be one of {sorted(CHANNEL_LABELS)}, got {self.channel!r}."
            )
        if self.start_ms >= self.end_ms:
            raise RecordValidationError(
                f"event start_ms {self.start_ms} must be before end_ms {self.end_ms} "
                f"(rater {self.rater_id})."
            )
        allowed = CHANNEL_LABELS[self.channel]
        if self.label not in allowed:
            raise RecordValidationError(
                f"label {self.label!r} is not in the {self.channel} label set {list(allowed)}."
            )

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass(slots=True)
class AudioSegment:
    """A 3-s labeled unit of one subject's session."""

    subject_id: str
    segment_index: int
    start_ms: int
    end_ms: int
    label: str
    vad: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.end_ms - self.start_ms != SEGMENT_MS:
            raise RecordValidationError(
                f"segment {self.segment_index} spans {self.end_ms - self.start_ms} ms, expected {SEGMENT_MS}."
            )
        if self.label not in AUDIO_SEGMENT_LABELS:
            raise RecordValidationError(f"unknown audio segment label {self.label!r}.")

    @property
    def center_ms(self) -> float:
        return (self.start_ms + self.end_ms) / 2.0

    @property
    def is_speech(self) -> bool:
        return self.label != "silence"


@dataclass(slots=True)
class FrameLabelTrack:
    """Per-frame video labels for one subject."""

    subject_id: str
    fps: Fraction
    labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        self.fps = Fraction(self.fps)
        if self.fps <= 0:
            raise RecordValidationError(f"fps must be positive, got {self.fps}.")
        self.labels = tuple(self.labels)
        unknown = sorted(set(self.labels) - set(VIDEO_FRAME_LABELS))
        if unknown:
            raise RecordValidationError(f"unknown video frame labels {unknown}.")

    def __len__(self) -> int:
        return len(self.labels)

    def frame_time_ms(self, frame_idx: int) -> float:
        return float(Fraction(frame_idx * 1000) / self.fps)

    def frame_times_ms(self) -> np.ndarray:
        return np.arange(len(self.labels), dtype=float) * (1000.0 / float(self.fps))


@dataclass(frozen=True, slots=True)
class TrajectoryFrame:
    """One per-frame gaze/head sample as read from a trajectory file."""

    frame_idx: int
    t_ms: int
    gaze_x: float
    gaze_y: float
    head_yaw: float
    head_pitch: float
    head_roll: float
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    plane: Tuple[float, float] = (0.0, 0.0)
    detected: bool = True


@dataclass(slots=True)
class Trajectory:
    """
    Column-oriented gaze/head trajectory of one subject.

    Angles are in degrees. ``eye`` is filled by the eye-in-head conversion and
    ``valid`` by frame validation; both start empty/true.
    """

    subject_id: str
    frame_idx: np.ndarray
    t_ms: np.ndarray
    gaze: np.ndarray
    head: np.ndarray
    origin: np.ndarray
    plane: np.ndarray
    detected: np.ndarray
    eye: Optional[np.ndarray] = None
    valid: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        n = len(self.t_ms)
        self.frame_idx = np.asarray(self.frame_idx, dtype=np.int64)
        self.t_ms = np.asarray(self.t_ms, dtype=float)
        self.gaze = np.asarray(self.gaze, dtype=float).reshape(n, 2)
        self.head = np.asarray(self.head, dtype=float).reshape(n, 3)
        self.origin = np.asarray(self.origin, dtype=float).reshape(n, 3)
        self.plane = np.asarray(self.plane, dtype=float).reshape(n, 2)
        self.detected = np.asarray(self.detected, dtype=bool).reshape(n)
        if self.valid is None:
            self.valid = self.detected.copy()

    def __len__(self) -> int:
        return len(self.t_ms)

    @classmethod
    def from_frames(cls, subject_id: str, frames: Sequence[TrajectoryFrame]) -> "Trajectory":
        return cls(
            subject_id=subject_id,
            frame_idx=[f.frame_idx for f in frames],
            t_ms=[f.t_ms for f in frames],
            gaze=[(f.gaze_x, f.gaze_y) for f in frames],
            head=[(f.head_yaw, f.head_pitch, f.head_roll) for f in frames],
            origin=[f.origin for f in frames],
            plane=[f.plane for f in frames],
            detected=[f.detected for f in frames],
        )

    @property
    def duration_ms(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(self.t_ms[-1] - self.t_ms[0])


@dataclass(frozen=True, slots=True)
class FeatureWindow:
    """A valid sliding window over a trajectory (positions index the arrays)."""

    subject_id: str
    center_ms: int
    span_ms: int
    start_ms: int
    end_ms: int
    frame_indices: Tuple[int, ...]
    valid_fraction: float


@dataclass(slots=True)
class SampleRow:
    """One synchronized multimodal training sample."""

    subject_id: str
    country: str
    t_center_ms: float
    speaking: bool
    unit_index: int = 0
    audio_label: Optional[str] = None
    video_label: Optional[str] = None
    feat_A: Optional[np.ndarray] = None
    feat_F: Optional[np.ndarray] = None
    feat_G: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.country not in COUNTRIES:
            raise RecordValidationError(f"country must be one of {COUNTRIES}, got {self.country!r}.")
        if self.feat_A is None and self.feat_F is None and self.feat_G is None:
            raise RecordValidationError("a sample row needs at least one feature block.")

    def block(self, modality: str) -> Optional[np.ndarray]:
        return getattr(self, f"feat_{modality}")


@dataclass(slots=True)
class SampleMatrix:
    """Assembled rows plus their column schema and retention statistics."""

    label_type: str
    modalities: Tuple[str, ...]
    rows: List[SampleRow]
    schema: Dict[str, object] = field(default_factory=dict)
    retention: Dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def features(self, modalities: Optional[Iterable[str]] = None) -> np.ndarray:
        """Concatenate feature blocks in A, F, G order."""
        wanted = tuple(m for m in MODALITY_ORDER if m in set(modalities or self.modalities))
        if not self.rows:
            width = sum(int(self.schema.get("widths", {}).get(m, 0)) for m in wanted)
            return np.zeros((0, width))
        return np.vstack([np.concatenate([row.block(m) for m in wanted]) for row in self.rows])

    def labels(self) -> np.ndarray:
        attr = "audio_label" if self.label_type == "audio" else "video_label"
        return np.array([getattr(row, attr) for row in self.rows], dtype=object)

    def subjects(self) -> np.ndarray:
        return np.array([row.subject_id for row in self.rows], dtype=object)

    def countries(self) -> np.ndarray:
        return np.array([row.country for row in self.rows], dtype=object)

    def speaking(self) -> np.ndarray:
        return np.array([row.speaking for row in self.rows], dtype=bool)
