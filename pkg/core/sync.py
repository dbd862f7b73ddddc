"""
Temporal alignment of speech (A), face (F) and gaze (G) features onto
audio-segment and video-frame sample grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from affectfuse.affectfuse import logger as app_logger
from shared.label_sets import (
    ENRICHED_DIM,
    FACE_FRAME_DIM,
    GAZE_DIM,
    MODALITY_ORDER,
    SEGMENT_MS,
    reduced_labels,
)
from shared.records import AudioSegment, FeatureWindow, FrameLabelTrack, SampleMatrix, SampleRow

from . import functionals

_LOGGER = app_logger.get_logger()

LABEL_TYPES = ("audio", "video")
SPEAKING_FILTERS = ("speech", "silence", "all")
FACE_POOLINGS = ("mean_sd", "central")
CENTRAL_FRAMES = SEGMENT_MS // 1000
WINDOW_REACH_MS = 750.0
SEGMENT_REACH_MS = SEGMENT_MS / 2.0


class SyncError(ValueError):
    """Raised for invalid alignment requests."""


class SchemaMismatchError(SyncError):
    """Raised when feature columns differ from the declared schema."""

    def __init__(self, source: str, expected: Sequence[str], actual: Sequence[str]):
        self.source = source
        self.missing = [c for c in expected if c not in set(actual)]
        self.unexpected = [c for c in actual if c not in set(expected)]
        self.reordered = not self.missing and not self.unexpected and list(expected) != list(actual)
        detail = []
        if self.missing:
            detail.append(f"missing {_abbreviate(self.missing)}")
        if self.unexpected:
            detail.append(f"unexpected {_abbreviate(self.unexpected)}")
        if self.reordered:
            first = next(i for i, (e, a) in enumerate(zip(expected, actual)) if e != a)
            detail.append(f"column order differs at position {first}: expected {expected[first]!r}, got {actual[first]!r}")
        if not detail:
            detail.append(f"expected {len(expected)} columns, got {len(actual)}")
        super().__init__(f"{source}: schema mismatch, " + "; ".join(detail) + ".")


def _abbreviate(columns: Sequence[str], limit: int = 6) -> str:
    shown = ", ".join(columns[:limit])
    if len(columns) > limit:
        shown += f", ... ({len(columns)} total)"
    return f"[{shown}]"


def check_columns(source: str, expected: Sequence[str], actual: Sequence[str]) -> None:
    if list(expected) != list(actual):
        raise SchemaMismatchError(source, expected, actual)


def audio_columns() -> List[str]:
    return [f"a_{i}" for i in range(ENRICHED_DIM)]


def face_frame_columns() -> List[str]:
    return [f"f_{i}" for i in range(FACE_FRAME_DIM)]


def face_segment_columns(pooling: str = "mean_sd") -> List[str]:
    if pooling == "central":
        return [f"f_c{k}_{i}" for k in range(CENTRAL_FRAMES) for i in range(FACE_FRAME_DIM)]
    return [f"f_mean_{i}" for i in range(FACE_FRAME_DIM)] + [f"f_sd_{i}" for i in range(FACE_FRAME_DIM)]


def modality_columns(label_type: str, modality: str, face_pooling: str = "mean_sd") -> List[str]:
    if modality == "A":
        return audio_columns()
    if modality == "G":
        return functionals.column_names()
    if modality == "F":
        return face_segment_columns(face_pooling) if label_type == "audio" else face_frame_columns()
    raise SyncError(f"unknown modality {modality!r}; expected one of {MODALITY_ORDER}.")


@dataclass(slots=True)
class SubjectStreams:
    """
    Everything known about one subject before alignment.

    ``segments`` is the full gold-standard segment list (silence included),
    ``face_features`` has one row per video frame with NaN rows where no face
    was found, and ``gaze_vectors`` is parallel to ``gaze_windows``.
    """

    subject_id: str
    country: str
    segments: List[AudioSegment]
    frames: Optional[FrameLabelTrack] = None
    audio_features: Dict[int, np.ndarray] = field(default_factory=dict)
    face_features: Optional[np.ndarray] = None
    gaze_windows: List[FeatureWindow] = field(default_factory=list)
    gaze_vectors: Optional[np.ndarray] = None


def segment_face_stats(frame_features: np.ndarray) -> np.ndarray:
    """Per-dimension mean followed by population SD of the frames' 256D features."""
    feats = np.asarray(frame_features, dtype=float).reshape(-1, FACE_FRAME_DIM)
    if len(feats) == 0:
        raise SyncError("segment_face_stats needs at least one valid frame.")
    return np.concatenate([feats.mean(axis=0), feats.std(axis=0, ddof=0)])


def _nearest(centers: np.ndarray, t: float) -> Optional[int]:
    """Index of the center nearest ``t``; equidistant centers resolve to the earlier one."""
    if len(centers) == 0:
        return None
    right = int(np.searchsorted(centers, t, side="left"))
    if right == 0:
        return 0
    if right == len(centers):
        return len(centers) - 1
    left = right - 1
    return left if t - centers[left] <= centers[right] - t else right


def segment_face_central_frames(frame_times_ms: np.ndarray, frame_features: np.ndarray, segment: AudioSegment) -> Optional[np.ndarray]:
    """Concatenate the valid frame nearest the middle of each second of the segment (768 reals)."""
    times = np.asarray(frame_times_ms, dtype=float)
    feats = np.asarray(frame_features, dtype=float).reshape(-1, FACE_FRAME_DIM)
    picked = []
    for k in range(CENTRAL_FRAMES):
        lo = segment.start_ms + 1000 * k
        hi = lo + 1000
        inside = np.nonzero((times >= lo) & (times < hi) & np.isfinite(feats).all(axis=1))[0]
        if inside.size == 0:
            return None
        choice = _nearest(times[inside], lo + 500.0)
        picked.append(feats[inside[choice]])
    return np.concatenate(picked)


def align_window_to_segment(windows: Sequence[FeatureWindow], segment: AudioSegment) -> Optional[int]:
    """
    Index of the window lying fully inside the segment whose center is
    nearest the segment center; ties go to the earlier window.
    """
    eligible = [i for i, w in enumerate(windows) if w.start_ms >= segment.start_ms and w.end_ms <= segment.end_ms]
    if not eligible:
        return None
    centers = np.array([windows[i].center_ms for i in eligible], dtype=float)
    choice = _nearest(centers, segment.center_ms)
    return eligible[choice]


def frame_to_nearest(
    frame_t: float,
    window_centers: Sequence[float],
    segment_centers: Sequence[float],
    *,
    window_reach_ms: float = WINDOW_REACH_MS,
    segment_reach_ms: float = SEGMENT_REACH_MS,
) -> Tuple[Optional[int], Optional[int]]:
    """
    Nearest window and segment centers for one frame (ties to the earlier).

    A match further than the reach is reported as None, so frames after the
    last segment end or inside a gap of removed windows stay unmatched.
    """
    windows = np.asarray(window_centers, dtype=float)
    segments = np.asarray(segment_centers, dtype=float)
    w = _nearest(windows, frame_t)
    s = _nearest(segments, frame_t)
    if w is not None and not (-window_reach_ms <= frame_t - windows[w] < window_reach_ms):
        w = None
    if s is not None and not (-segment_reach_ms <= frame_t - segments[s] < segment_reach_ms):
        s = None
    return w, s


def _modal_video_label(track: FrameLabelTrack, segment: AudioSegment, keep: Sequence[str]) -> Optional[str]:
    times = track.frame_times_ms()
    inside = np.nonzero((times >= segment.start_ms) & (times < segment.end_ms))[0]
    labels = [track.labels[i] for i in inside if track.labels[i] in keep]
    if not labels:
        return None
    counts = {label: labels.count(label) for label in keep}
    best = max(counts.values())
    return next(label for label in keep if counts[label] == best)


def _face_valid(face: Optional[np.ndarray]) -> np.ndarray:
    if face is None:
        return np.zeros(0, dtype=bool)
    return np.isfinite(face).all(axis=1)


def _audio_rows(
    subject: SubjectStreams,
    modalities: Tuple[str, ...],
    face_pooling: str,
    tally: Dict[str, int],
) -> List[SampleRow]:
    keep_audio = reduced_labels("audio")
    keep_video = reduced_labels("video")
    rows: List[SampleRow] = []
    frame_times = subject.frames.frame_times_ms() if subject.frames is not None else np.zeros(0)
    face_valid = _face_valid(subject.face_features)

    for segment in subject.segments:
        if segment.label not in keep_audio:
            continue
        tally["candidates"] += 1
        blocks: Dict[str, Optional[np.ndarray]] = {}
        if "A" in modalities:
            blocks["A"] = subject.audio_features.get(segment.segment_index)
        if "F" in modalities:
            blocks["F"] = None
            if subject.face_features is not None:
                if face_pooling == "central":
                    blocks["F"] = segment_face_central_frames(frame_times, subject.face_features, segment)
                else:
                    inside = (frame_times >= segment.start_ms) & (frame_times < segment.end_ms) & face_valid
                    if inside.any():
                        blocks["F"] = segment_face_stats(subject.face_features[inside])
        if "G" in modalities:
            index = align_window_to_segment(subject.gaze_windows, segment)
            blocks["G"] = None if index is None else subject.gaze_vectors[index]

        missing = [m for m, block in blocks.items() if block is None]
        if missing:
            for m in missing:
                tally[f"missing_{m}"] += 1
            continue
        video_label = _modal_video_label(subject.frames, segment, keep_video) if subject.frames is not None else None
        rows.append(
            SampleRow(
                subject_id=subject.subject_id,
                country=subject.country,
                t_center_ms=segment.center_ms,
                speaking=True,
                unit_index=segment.segment_index,
                audio_label=segment.label,
                video_label=video_label,
                feat_A=blocks.get("A"),
                feat_F=blocks.get("F"),
                feat_G=blocks.get("G"),
            )
        )
    return rows


def _video_rows(
    subject: SubjectStreams,
    modalities: Tuple[str, ...],
    speaking_filter: str,
    tally: Dict[str, int],
) -> List[SampleRow]:
    if subject.frames is None:
        raise SyncError(f"subject {subject.subject_id} has no video gold standard.")
    keep_audio = reduced_labels("audio")
    keep_video = reduced_labels("video")
    times = subject.frames.frame_times_ms()
    window_centers = np.array([w.center_ms for w in subject.gaze_windows], dtype=float)
    segment_centers = np.array([s.center_ms for s in subject.segments], dtype=float)
    face_valid = _face_valid(subject.face_features)
    rows: List[SampleRow] = []

    for frame_idx, label in enumerate(subject.frames.labels):
        if label not in keep_video:
            continue
        t = float(times[frame_idx])
        w, s = frame_to_nearest(t, window_centers, segment_centers)
        if s is None:
            tally["unmatched"] += 1
            continue
        segment = subject.segments[s]
        speaking = segment.is_speech
        if speaking_filter == "speech" and not speaking:
            continue
        if speaking_filter == "silence" and speaking:
            continue
        tally["candidates"] += 1

        blocks: Dict[str, Optional[np.ndarray]] = {}
        if "A" in modalities:
            blocks["A"] = subject.audio_features.get(segment.segment_index)
        if "F" in modalities:
            has_face = subject.face_features is not None and frame_idx < len(face_valid) and face_valid[frame_idx]
            blocks["F"] = subject.face_features[frame_idx] if has_face else None
        if "G" in modalities:
            blocks["G"] = None if w is None else subject.gaze_vectors[w]

        missing = [m for m, block in blocks.items() if block is None]
        if missing:
            for m in missing:
                tally[f"missing_{m}"] += 1
            continue
        rows.append(
            SampleRow(
                subject_id=subject.subject_id,
                country=subject.country,
                t_center_ms=t,
                speaking=speaking,
                unit_index=frame_idx,
                audio_label=segment.label if segment.label in keep_audio else None,
                video_label=label,
                feat_A=blocks.get("A"),
                feat_F=blocks.get("F"),
                feat_G=blocks.get("G"),
            )
        )
    return rows


def _check_block_widths(subject: SubjectStreams, modalities: Tuple[str, ...]) -> None:
    if "A" in modalities:
        for index, vector in subject.audio_features.items():
            if np.asarray(vector).size != ENRICHED_DIM:
                raise SchemaMismatchError(
                    f"{subject.subject_id} audio segment {index}",
                    audio_columns(),
                    [f"a_{i}" for i in range(np.asarray(vector).size)],
                )
    if "F" in modalities and subject.face_features is not None:
        width = subject.face_features.shape[1]
        if width != FACE_FRAME_DIM:
            raise SchemaMismatchError(f"{subject.subject_id} face features", face_frame_columns(), [f"f_{i}" for i in range(width)])
    if "G" in modalities and subject.gaze_vectors is not None and len(subject.gaze_vectors):
        width = subject.gaze_vectors.shape[1]
        if width != GAZE_DIM:
            names = functionals.column_names()
            raise SchemaMismatchError(f"{subject.subject_id} gaze windows", names, names[:width] + [f"extra_{i}" for i in range(width - GAZE_DIM)])


def assemble_dataset(
    subjects: Sequence[SubjectStreams],
    label_type: str,
    modalities: Sequence[str],
    speaking_filter: str = "all",
    *,
    face_pooling: str = "mean_sd",
) -> SampleMatrix:
    """
    Build a training matrix for one label type and modality set.

    Audio rows are speech segments carrying a reduced audio label; video rows
    are frames carrying a reduced video label, with speaking status taken from
    the segment they fall into. Rows missing any requested block are dropped
    and counted in the retention statistics.
    """
    if label_type not in LABEL_TYPES:
        raise SyncError(f"label_type must be one of {LABEL_TYPES}, got {label_type!r}.")
    if speaking_filter not in SPEAKING_FILTERS:
        raise SyncError(f"speaking_filter must be one of {SPEAKING_FILTERS}, got {speaking_filter!r}.")
    if face_pooling not in FACE_POOLINGS:
        raise SyncError(f"face_pooling must be one of {FACE_POOLINGS}, got {face_pooling!r}.")
    wanted = tuple(m for m in MODALITY_ORDER if m in set(modalities))
    unknown = sorted(set(modalities) - set(MODALITY_ORDER))
    if unknown or not wanted:
        raise SyncError(f"modalities must be a non-empty subset of {MODALITY_ORDER}, got {list(modalities)}.")
    if label_type == "audio" and speaking_filter == "silence":
        _LOGGER.warning("Audio rows are speech segments; a silence filter leaves no rows.")

    tally: Dict[str, int] = {"candidates": 0, "unmatched": 0}
    for m in wanted:
        tally[f"missing_{m}"] = 0
    rows: List[SampleRow] = []
    for subject in sorted(subjects, key=lambda s: s.subject_id):
        _check_block_widths(subject, wanted)
        if label_type == "audio":
            if speaking_filter != "silence":
                rows.extend(_audio_rows(subject, wanted, face_pooling, tally))
        else:
            rows.extend(_video_rows(subject, wanted, speaking_filter, tally))

    columns = {m: modality_columns(label_type, m, face_pooling) for m in wanted}
    schema = {
        "label_type": label_type,
        "modalities": list(wanted),
        "speaking_filter": speaking_filter,
        "face_pooling": face_pooling,
        "widths": {m: len(c) for m, c in columns.items()},
        "columns": [c for m in wanted for c in columns[m]],
    }
    candidates = tally["candidates"]
    retention = {
        "candidates": float(candidates),
        "emitted": float(len(rows)),
        "fraction": (len(rows) / candidates) if candidates else 1.0,
        **{k: float(v) for k, v in tally.items() if k != "candidates"},
    }
    _LOGGER.info(
        "Assembled {} {} rows for {} ({}): retention {:.1%} of {} candidates.",
        len(rows),
        label_type,
        "+".join(wanted),
        speaking_filter,
        retention["fraction"],
        candidates,
    )
    return SampleMatrix(label_type=label_type, modalities=wanted, rows=rows, schema=schema, retention=retention)


def expected_width(label_type: str, modalities: Sequence[str], face_pooling: str = "mean_sd") -> int:
    return sum(len(modality_columns(label_type, m, face_pooling)) for m in MODALITY_ORDER if m in set(modalities))

