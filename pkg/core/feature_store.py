"""
CSV and JSON persistence for corpus inputs and pipeline outputs.

Every reader checks the header against the expected column list first and
raises SchemaMismatchError naming the missing, unexpected or reordered
columns. Frame-label files carry their frame rate on a leading
``#fps=<rational>`` line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from affectfuse.affectfuse import logger as app_logger
from shared.label_sets import EMBEDDING_DIM, GAZE_DIM, MODALITY_ORDER, VAD_CHANNELS
from shared.records import (
    AnnotationEvent,
    AudioSegment,
    FeatureWindow,
    FrameLabelTrack,
    SampleMatrix,
    SampleRow,
    Trajectory,
)

from . import functionals
from .sync import SchemaMismatchError, audio_columns, check_columns, face_frame_columns

_LOGGER = app_logger.get_logger()

FLOAT_FORMAT = "%.17g"
ENCODING = "utf-8"
FPS_PREFIX = "#fps="

SUBJECT_COLUMNS = ["subject_id", "country", "session_ms", "glasses"]
ANNOTATION_COLUMNS = ["rater_id", "channel", "start_ms", "end_ms", "label"]
FRAME_COLUMNS = ["subject_id", "frame_idx", "label_rater_a", "label_rater_b"]
AVATAR_COLUMNS = ["start_ms", "end_ms"]
TRAJECTORY_COLUMNS = [
    "subject_id",
    "frame_idx",
    "t_ms",
    "gaze_x",
    "gaze_y",
    "head_yaw",
    "head_pitch",
    "head_roll",
    "origin_x",
    "origin_y",
    "origin_z",
    "plane_x",
    "plane_y",
    "detected",
]
AUDIO_GOLD_COLUMNS = ["subject_id", "segment_index", "start_ms", "end_ms", "label"]
VAD_GOLD_COLUMNS = ["subject_id", "segment_index"] + list(VAD_CHANNELS)
VIDEO_GOLD_COLUMNS = ["subject_id", "frame_idx", "label"]
WINDOW_COLUMNS = ["subject_id", "center_ms"] + [f"f_{i}" for i in range(GAZE_DIM)]
FACE_COLUMNS = ["subject_id", "frame_idx"] + face_frame_columns()
EMBEDDING_COLUMNS = ["subject_id", "segment_index"] + [f"e_{i}" for i in range(EMBEDDING_DIM)]
ENRICHED_COLUMNS = ["subject_id", "segment_index"] + audio_columns()
MATRIX_META_COLUMNS = ["subject_id", "country", "t_center_ms", "speaking", "unit_index", "audio_label", "video_label"]
CLUSTER_COLUMNS = [
    "subject_id",
    "cluster",
    "center_x",
    "center_y",
    "cov_xx",
    "cov_xy",
    "cov_yy",
    "member_count",
    "support",
    "bandwidth",
    "is_coach",
]


@dataclass(frozen=True, slots=True)
class SubjectInfo:
    subject_id: str
    country: str
    session_ms: int
    glasses: int = 0


@dataclass(frozen=True)
class CorpusLayout:
    """Paths of a raw input corpus, one file per subject and kind."""

    root: Path

    @property
    def subjects_csv(self) -> Path:
        return self.root / "subjects.csv"

    def annotations(self, subject_id: str) -> Path:
        return self.root / "annotations" / f"{subject_id}.csv"

    def frames(self, subject_id: str) -> Path:
        return self.root / "frames" / f"{subject_id}.csv"

    def avatar(self, subject_id: str) -> Path:
        return self.root / "avatar" / f"{subject_id}.csv"

    def trajectory(self, subject_id: str) -> Path:
        return self.root / "trajectories" / f"{subject_id}.csv"

    def face(self, subject_id: str) -> Path:
        return self.root / "face" / f"{subject_id}.csv"

    def embeddings(self, subject_id: str) -> Path:
        return self.root / "embeddings" / f"{subject_id}.csv"


@dataclass(frozen=True)
class WorkLayout:
    """Paths of everything the pipeline derives from a corpus."""

    root: Path

    def audio_gold(self, subject_id: str) -> Path:
        return self.root / "gold" / "audio" / f"{subject_id}.csv"

    def vad_gold(self, subject_id: str) -> Path:
        return self.root / "gold" / "vad" / f"{subject_id}.csv"

    def video_gold(self, subject_id: str) -> Path:
        return self.root / "gold" / "video" / f"{subject_id}.csv"

    @property
    def gold_dir(self) -> Path:
        return self.root / "gold"

    @property
    def contingency_csv(self) -> Path:
        return self.gold_dir / "contingency.csv"

    def distribution_csv(self, label_type: str) -> Path:
        return self.gold_dir / f"distribution_{label_type}.csv"

    @property
    def agreement_csv(self) -> Path:
        return self.root / "kappa" / "agreement.csv"

    def gaze_windows(self, subject_id: str) -> Path:
        return self.root / "gaze" / "windows" / f"{subject_id}.csv"

    @property
    def clusters_csv(self) -> Path:
        return self.root / "gaze" / "clusters.csv"

    def audio_features(self, subject_id: str) -> Path:
        return self.root / "features" / "audio" / f"{subject_id}.csv"

    @property
    def enrichment_json(self) -> Path:
        return self.root / "features" / "enrichment.json"

    def matrix(self, name: str) -> Path:
        return self.root / "matrices" / f"{name}.csv"

    def model(self, name: str) -> Path:
        return self.root / "models" / f"{name}.json"

    @property
    def folds_json(self) -> Path:
        return self.root / "folds.json"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    def report(self, name: str) -> Path:
        return self.reports_dir / f"{name}.json"

    @property
    def comparisons_csv(self) -> Path:
        return self.root / "stats" / "comparisons.csv"

    @property
    def render_dir(self) -> Path:
        return self.root / "report"

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"


def matrix_name(label_type: str, modalities: Sequence[str], speaking_filter: str) -> str:
    return f"{label_type}_{'+'.join(modalities)}_{speaking_filter}"


def sidecar_path(path: Path) -> Path:
    return Path(path).with_suffix(".json")


def read_fps_line(path: Path) -> Optional[Fraction]:
    with Path(path).open("r", encoding=ENCODING) as handle:
        first = handle.readline().strip()
    if first.startswith(FPS_PREFIX):
        return Fraction(first[len(FPS_PREFIX) :])
    return None


def read_header(path: Path) -> List[str]:
    """Column names of a CSV, skipping a leading fps line."""
    skip = 1 if read_fps_line(path) is not None else 0
    return list(pd.read_csv(path, nrows=0, skiprows=skip, encoding=ENCODING).columns)


def _read_csv(path: Path, expected: Sequence[str], *, text_columns: Iterable[str] = ()) -> pd.DataFrame:
    path = Path(path)
    skip = 1 if read_fps_line(path) is not None else 0
    dtype = {column: str for column in text_columns}
    frame = pd.read_csv(
        path, skiprows=skip, dtype=dtype, keep_default_na=False, na_values=[""], encoding=ENCODING, float_precision="round_trip"
    )
    check_columns(str(path), expected, list(frame.columns))
    for column in text_columns:
        frame[column] = frame[column].fillna("")
    return frame


def _write_csv(frame: pd.DataFrame, path: Path, *, header_line: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding=ENCODING, newline="") as handle:
        if header_line is not None:
            handle.write(header_line + "\n")
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _write_json(data: Mapping[str, object], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding=ENCODING)
    return path


def _fps_text(fps: Fraction) -> str:
    fps = Fraction(fps)
    return str(fps.numerator) if fps.denominator == 1 else f"{fps.numerator}/{fps.denominator}"


# --- subjects -----------------------------------------------------------------


def write_subjects(path: Path, subjects: Sequence[SubjectInfo]) -> Path:
    frame = pd.DataFrame(
        [(s.subject_id, s.country, int(s.session_ms), int(s.glasses)) for s in subjects],
        columns=SUBJECT_COLUMNS,
    )
    return _write_csv(frame, path)


def read_subjects(path: Path) -> List[SubjectInfo]:
    frame = _read_csv(path, SUBJECT_COLUMNS, text_columns=("subject_id", "country"))
    return [
        SubjectInfo(str(r.subject_id), str(r.country), int(r.session_ms), int(r.glasses))
        for r in frame.itertuples(index=False)
    ]


# --- annotations ----------------------------------------------------------------


def write_annotations(path: Path, events: Sequence[AnnotationEvent]) -> Path:
    ordered = sorted(events, key=lambda e: (e.rater_id, e.channel, e.start_ms))
    frame = pd.DataFrame(
        [(e.rater_id, e.channel, e.start_ms, e.end_ms, e.label) for e in ordered],
        columns=ANNOTATION_COLUMNS,
    )
    return _write_csv(frame, path)


def read_annotations(path: Path) -> Dict[str, List[AnnotationEvent]]:
    """Events grouped by rater, in file order."""
    frame = _read_csv(path, ANNOTATION_COLUMNS, text_columns=("rater_id", "channel", "label"))
    by_rater: Dict[str, List[AnnotationEvent]] = {}
    for r in frame.itertuples(index=False):
        event = AnnotationEvent(str(r.rater_id), str(r.channel), int(r.start_ms), int(r.end_ms), str(r.label))
        by_rater.setdefault(event.rater_id, []).append(event)
    return by_rater


def write_frame_labels(path: Path, subject_id: str, fps: Fraction, rater_a: Sequence[str], rater_b: Sequence[str]) -> Path:
    frame = pd.DataFrame(
        {
            "subject_id": subject_id,
            "frame_idx": np.arange(len(rater_a), dtype=np.int64),
            "label_rater_a": list(rater_a),
            "label_rater_b": list(rater_b),
        },
        columns=FRAME_COLUMNS,
    )
    return _write_csv(frame, path, header_line=f"{FPS_PREFIX}{_fps_text(fps)}")


def read_frame_labels(path: Path) -> Tuple[Fraction, List[str], List[str]]:
    fps = read_fps_line(path)
    if fps is None:
        raise SchemaMismatchError(str(path), [f"{FPS_PREFIX}<rate>"] + FRAME_COLUMNS, read_header(path))
    frame = _read_csv(path, FRAME_COLUMNS, text_columns=("subject_id", "label_rater_a", "label_rater_b"))
    return fps, frame["label_rater_a"].tolist(), frame["label_rater_b"].tolist()


def write_avatar(path: Path, intervals: Sequence[Tuple[int, int]]) -> Path:
    return _write_csv(pd.DataFrame(list(intervals), columns=AVATAR_COLUMNS), path)


def read_avatar(path: Path) -> List[Tuple[int, int]]:
    if not Path(path).exists():
        return []
    frame = _read_csv(path, AVATAR_COLUMNS)
    return [(int(r.start_ms), int(r.end_ms)) for r in frame.itertuples(index=False)]


# --- trajectories and per-frame features ------------------------------------------


def write_trajectory(path: Path, trajectory: Trajectory) -> Path:
    frame = pd.DataFrame(
        {
            "subject_id": trajectory.subject_id,
            "frame_idx": trajectory.frame_idx,
            "t_ms": trajectory.t_ms.astype(np.int64),
            "gaze_x": trajectory.gaze[:, 0],
            "gaze_y": trajectory.gaze[:, 1],
            "head_yaw": trajectory.head[:, 0],
            "head_pitch": trajectory.head[:, 1],
            "head_roll": trajectory.head[:, 2],
            "origin_x": trajectory.origin[:, 0],
            "origin_y": trajectory.origin[:, 1],
            "origin_z": trajectory.origin[:, 2],
            "plane_x": trajectory.plane[:, 0],
            "plane_y": trajectory.plane[:, 1],
            "detected": trajectory.detected.astype(np.int64),
        },
        columns=TRAJECTORY_COLUMNS,
    )
    return _write_csv(frame, path)


def read_trajectory(path: Path) -> Trajectory:
    frame = _read_csv(path, TRAJECTORY_COLUMNS, text_columns=("subject_id",))
    subject_ids = frame["subject_id"].unique().tolist()
    subject_id = subject_ids[0] if subject_ids else Path(path).stem
    return Trajectory(
        subject_id=subject_id,
        frame_idx=frame["frame_idx"].to_numpy(dtype=np.int64),
        t_ms=frame["t_ms"].to_numpy(dtype=float),
        gaze=frame[["gaze_x", "gaze_y"]].to_numpy(dtype=float),
        head=frame[["head_yaw", "head_pitch", "head_roll"]].to_numpy(dtype=float),
        origin=frame[["origin_x", "origin_y", "origin_z"]].to_numpy(dtype=float),
        plane=frame[["plane_x", "plane_y"]].to_numpy(dtype=float),
        detected=frame["detected"].to_numpy(dtype=np.int64) == 1,
    )


def write_face(path: Path, subject_id: str, frame_idx: Sequence[int], features: np.ndarray) -> Path:
    """Write per-frame 256D face features; only frames with a detected face appear."""
    frame = pd.DataFrame(np.asarray(features, dtype=float), columns=FACE_COLUMNS[2:])
    frame.insert(0, "frame_idx", np.asarray(frame_idx, dtype=np.int64))
    frame.insert(0, "subject_id", subject_id)
    return _write_csv(frame, path)


def read_face(path: Path, n_frames: int) -> np.ndarray:
    """Per-frame features with NaN rows for frames absent from the file."""
    frame = _read_csv(path, FACE_COLUMNS, text_columns=("subject_id",))
    out = np.full((n_frames, len(FACE_COLUMNS) - 2), np.nan)
    idx = frame["frame_idx"].to_numpy(dtype=np.int64)
    inside = (idx >= 0) & (idx < n_frames)
    if not inside.all():
        _LOGGER.warning("{}: {} face rows index past the {} labeled frames.", path, int((~inside).sum()), n_frames)
    out[idx[inside]] = frame[FACE_COLUMNS[2:]].to_numpy(dtype=float)[inside]
    return out


# --- per-segment features -----------------------------------------------------------


def _write_segment_block(path: Path, columns: Sequence[str], subject_id: str, indices: Sequence[int], values: np.ndarray) -> Path:
    frame = pd.DataFrame(np.asarray(values, dtype=float).reshape(len(indices), len(columns) - 2), columns=columns[2:])
    frame.insert(0, "segment_index", np.asarray(indices, dtype=np.int64))
    frame.insert(0, "subject_id", subject_id)
    return _write_csv(frame, path)


def _read_segment_block(path: Path, columns: Sequence[str]) -> Dict[int, np.ndarray]:
    frame = _read_csv(path, columns, text_columns=("subject_id",))
    values = frame[list(columns[2:])].to_numpy(dtype=float)
    return {int(i): values[row] for row, i in enumerate(frame["segment_index"].to_numpy(dtype=np.int64))}


def write_embeddings(path: Path, subject_id: str, indices: Sequence[int], embeddings: np.ndarray) -> Path:
    return _write_segment_block(path, EMBEDDING_COLUMNS, subject_id, indices, embeddings)


def read_embeddings(path: Path) -> Dict[int, np.ndarray]:
    return _read_segment_block(path, EMBEDDING_COLUMNS)


def write_audio_features(path: Path, subject_id: str, indices: Sequence[int], features: np.ndarray) -> Path:
    return _write_segment_block(path, ENRICHED_COLUMNS, subject_id, indices, features)


def read_audio_features(path: Path) -> Dict[int, np.ndarray]:
    return _read_segment_block(path, ENRICHED_COLUMNS)


# --- gold standards -----------------------------------------------------------------


def write_audio_gold(path: Path, segments: Sequence[AudioSegment]) -> Path:
    frame = pd.DataFrame(
        [(s.subject_id, s.segment_index, s.start_ms, s.end_ms, s.label) for s in segments],
        columns=AUDIO_GOLD_COLUMNS,
    )
    return _write_csv(frame, path)


def read_audio_gold(path: Path) -> List[AudioSegment]:
    frame = _read_csv(path, AUDIO_GOLD_COLUMNS, text_columns=("subject_id", "label"))
    return [
        AudioSegment(str(r.subject_id), int(r.segment_index), int(r.start_ms), int(r.end_ms), str(r.label))
        for r in frame.itertuples(index=False)
    ]


def write_vad_gold(path: Path, subject_id: str, vad: Mapping[str, Sequence[Optional[str]]], n_segments: int) -> Path:
    columns = {"subject_id": [subject_id] * n_segments, "segment_index": list(range(n_segments))}
    for channel in VAD_CHANNELS:
        labels = list(vad.get(channel) or [None] * n_segments)
        columns[channel] = ["" if label is None else label for label in labels]
    return _write_csv(pd.DataFrame(columns, columns=VAD_GOLD_COLUMNS), path)


def read_vad_gold(path: Path) -> Dict[str, List[Optional[str]]]:
    if not Path(path).exists():
        return {}
    frame = _read_csv(path, VAD_GOLD_COLUMNS, text_columns=("subject_id",) + VAD_CHANNELS)
    return {channel: [label or None for label in frame[channel].tolist()] for channel in VAD_CHANNELS}


def write_video_gold(path: Path, track: FrameLabelTrack) -> Path:
    frame = pd.DataFrame(
        {"subject_id": track.subject_id, "frame_idx": np.arange(len(track), dtype=np.int64), "label": list(track.labels)},
        columns=VIDEO_GOLD_COLUMNS,
    )
    return _write_csv(frame, path, header_line=f"{FPS_PREFIX}{_fps_text(track.fps)}")


def read_video_gold(path: Path) -> FrameLabelTrack:
    fps = read_fps_line(path)
    if fps is None:
        raise SchemaMismatchError(str(path), [f"{FPS_PREFIX}<rate>"] + VIDEO_GOLD_COLUMNS, read_header(path))
    frame = _read_csv(path, VIDEO_GOLD_COLUMNS, text_columns=("subject_id", "label"))
    subject_id = str(frame["subject_id"].iloc[0]) if len(frame) else Path(path).stem
    return FrameLabelTrack(subject_id=subject_id, fps=fps, labels=tuple(frame["label"].tolist()))


# --- gaze windows ---------------------------------------------------------------------


def write_window_features(
    path: Path,
    subject_id: str,
    centers: Sequence[int],
    vectors: np.ndarray,
    *,
    window_ms: int,
    video_bounds_ms: Optional[Tuple[float, float]] = None,
) -> Path:
    """
    Window CSV plus a JSON sidecar naming every ``f_i`` column.

    ``video_bounds_ms`` is the [start, end) of the video the windows were cut
    from; readers clip rebuilt windows to it.
    """
    values = np.asarray(vectors, dtype=float).reshape(len(centers), GAZE_DIM)
    frame = pd.DataFrame(values, columns=WINDOW_COLUMNS[2:])
    frame.insert(0, "center_ms", np.asarray(centers, dtype=np.int64))
    frame.insert(0, "subject_id", subject_id)
    _write_csv(frame, path)
    meta: Dict[str, object] = {
        "window_ms": int(window_ms),
        "columns": WINDOW_COLUMNS,
        "names": dict(zip(WINDOW_COLUMNS[2:], functionals.column_names())),
    }
    if video_bounds_ms is not None:
        meta["video_start_ms"], meta["video_end_ms"] = float(video_bounds_ms[0]), float(video_bounds_ms[1])
    _write_json(meta, sidecar_path(path))
    return Path(path)


def read_window_features(path: Path) -> Tuple[List[FeatureWindow], np.ndarray]:
    """Windows rebuilt from centers and the sidecar's window length, plus their vectors."""
    meta = json.loads(sidecar_path(path).read_text(encoding=ENCODING))
    half = int(meta["window_ms"]) / 2.0
    video_start = float(meta.get("video_start_ms", 0.0))
    video_end = float(meta.get("video_end_ms", np.inf))
    frame = _read_csv(path, WINDOW_COLUMNS, text_columns=("subject_id",))
    windows = []
    for subject_id, center in zip(frame["subject_id"], frame["center_ms"].to_numpy(dtype=np.int64)):
        start = int(round(max(center - half, video_start)))
        end = int(round(min(center + half, video_end)))
        windows.append(
            FeatureWindow(
                subject_id=str(subject_id),
                center_ms=int(center),
                span_ms=end - start,
                start_ms=start,
                end_ms=end,
                frame_indices=(),
                valid_fraction=float("nan"),
            )
        )
    return windows, frame[WINDOW_COLUMNS[2:]].to_numpy(dtype=float)


def write_clusters(path: Path, rows: Sequence[Mapping[str, object]]) -> Path:
    return _write_csv(pd.DataFrame(list(rows), columns=CLUSTER_COLUMNS), path)


# --- sample matrices ----------------------------------------------------------------------


def write_matrix(path: Path, matrix: SampleMatrix) -> Path:
    """Matrix CSV (metadata columns then features in A, F, G order) plus schema sidecar."""
    columns = list(matrix.schema.get("columns", []))
    features = matrix.features()
    if features.shape[1] != len(columns):
        raise SchemaMismatchError(str(path), columns, [f"col_{i}" for i in range(features.shape[1])])
    meta = pd.DataFrame(
        {
            "subject_id": [r.subject_id for r in matrix.rows],
            "country": [r.country for r in matrix.rows],
            "t_center_ms": [r.t_center_ms for r in matrix.rows],
            "speaking": [int(r.speaking) for r in matrix.rows],
            "unit_index": [r.unit_index for r in matrix.rows],
            "audio_label": [r.audio_label or "" for r in matrix.rows],
            "video_label": [r.video_label or "" for r in matrix.rows],
        },
        columns=MATRIX_META_COLUMNS,
    )
    frame = pd.concat([meta, pd.DataFrame(features, columns=columns)], axis=1)
    _write_csv(frame, path)
    _write_json(
        {"schema": matrix.schema, "retention": matrix.retention, "row_count": len(matrix)},
        sidecar_path(path),
    )
    return Path(path)


def read_matrix(path: Path) -> SampleMatrix:
    meta = json.loads(sidecar_path(path).read_text(encoding=ENCODING))
    schema = meta["schema"]
    feature_columns = list(schema["columns"])
    frame = _read_csv(
        path,
        MATRIX_META_COLUMNS + feature_columns,
        text_columns=("subject_id", "country", "audio_label", "video_label"),
    )
    modalities = tuple(m for m in MODALITY_ORDER if m in schema["modalities"])
    widths = schema["widths"]
    values = frame[feature_columns].to_numpy(dtype=float)
    offsets = np.cumsum([0] + [int(widths[m]) for m in modalities])

    rows = []
    for i, r in enumerate(frame.itertuples(index=False)):
        blocks = {m: values[i, offsets[k] : offsets[k + 1]] for k, m in enumerate(modalities)}
        rows.append(
            SampleRow(
                subject_id=str(r.subject_id),
                country=str(r.country),
                t_center_ms=float(r.t_center_ms),
                speaking=bool(int(r.speaking)),
                unit_index=int(r.unit_index),
                audio_label=r.audio_label or None,
                video_label=r.video_label or None,
                feat_A=blocks.get("A"),
                feat_F=blocks.get("F"),
                feat_G=blocks.get("G"),
            )
        )
    return SampleMatrix(
        label_type=str(schema["label_type"]),
        modalities=modalities,
        rows=rows,
        schema=schema,
        retention=dict(meta.get("retention", {})),
    )


def write_table(path: Path, frame: pd.DataFrame) -> Path:
    """Summary tables (agreement, contingency, distributions) in the store's CSV format."""
    return _write_csv(frame, path)


def write_json(path: Path, data: Mapping[str, object]) -> Path:
    return _write_json(data, path)


def read_json(path: Path) -> Dict[str, object]:
    return json.loads(Path(path).read_text(encoding=ENCODING))
