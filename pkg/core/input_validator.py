"""
Schema, encoding and vocabulary checks for corpus input files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd

from affectfuse.affectfuse import logger as app_logger
from shared.label_sets import CHANNEL_LABELS, COUNTRIES, NEUTRAL, VIDEO_EMOTIONS

from . import feature_store
from .feature_store import FPS_PREFIX, CorpusLayout
from .sync import SchemaMismatchError

_LOGGER = app_logger.get_logger()

FRAME_RATER_LABELS: Tuple[str, ...] = ("", NEUTRAL) + VIDEO_EMOTIONS
REQUIRED_KINDS = ("annotations", "frames", "trajectories", "face", "embeddings")
OPTIONAL_KINDS = ("avatar",)


@dataclass(frozen=True, slots=True)
class Violation:
    path: Path
    line: int
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}: {self.message}"


@dataclass(slots=True)
class ValidationReport:
    """Row count per checked file and every violation found."""

    row_counts: Dict[str, int] = field(default_factory=dict)
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def extend(self, other: "ValidationReport") -> None:
        self.row_counts.update(other.row_counts)
        self.violations.extend(other.violations)


@dataclass(slots=True)
class _Table:
    path: Path
    frame: pd.DataFrame
    first_data_line: int

    def line(self, row: int) -> int:
        return self.first_data_line + int(row)


def _decode(path: Path, report: ValidationReport) -> str | None:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        report.violations.append(Violation(path, 0, f"cannot read file: {exc}"))
        return None
    try:
        return raw.decode(feature_store.ENCODING)
    except UnicodeDecodeError as exc:
        line = raw[: exc.start].count(b"\n") + 1
        report.violations.append(Violation(path, line, f"not valid UTF-8 at byte {exc.start}"))
        return None


def _load(path: Path, expected: Sequence[str], report: ValidationReport, *, fps_line: bool = False) -> _Table | None:
    text = _decode(path, report)
    if text is None:
        return None
    offset = 0
    if fps_line:
        first = text.split("\n", 1)[0].strip()
        if not first.startswith(FPS_PREFIX):
            report.violations.append(Violation(path, 1, f"first line must be '{FPS_PREFIX}<rate>', got {first[:40]!r}"))
            return None
        try:
            if Fraction(first[len(FPS_PREFIX) :]) <= 0:
                raise ValueError(first)
        except (ValueError, ZeroDivisionError):
            report.violations.append(Violation(path, 1, f"invalid frame rate {first[len(FPS_PREFIX):]!r}"))
            return None
        offset = 1
    try:
        frame = pd.read_csv(io.StringIO(text), skiprows=offset, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        report.violations.append(Violation(path, offset + 1, f"unreadable CSV: {exc}"))
        return None
    actual = list(frame.columns)
    if actual != list(expected):
        message = str(SchemaMismatchError(path.name, expected, actual))
        report.violations.append(Violation(path, offset + 1, message))
        return None
    report.row_counts[str(path)] = len(frame)
    return _Table(path=path, frame=frame, first_data_line=offset + 2)


def _check_numeric(table: _Table, columns: Iterable[str], report: ValidationReport, *, integer: bool = False) -> None:
    for column in columns:
        values = table.frame[column]
        parsed = pd.to_numeric(values, errors="coerce")
        bad = parsed.isna() | ~np.isfinite(parsed.to_numpy(dtype=float))
        if integer:
            bad |= (parsed.fillna(0) % 1) != 0
        for row in np.nonzero(bad.to_numpy())[0][:5]:
            kind = "an integer" if integer else "a finite number"
            report.violations.append(Violation(table.path, table.line(row), f"column {column} must be {kind}, got {values.iloc[row]!r}"))


def _check_vocabulary(table: _Table, column: str, allowed: Sequence[str], report: ValidationReport) -> None:
    allowed_set = set(allowed)
    for row, value in enumerate(table.frame[column]):
        if value not in allowed_set:
            report.violations.append(
                Violation(table.path, table.line(row), f"unknown label {value!r} in column {column}; allowed {list(allowed)}")
            )


def _check_subject_column(table: _Table, subject_id: str | None, report: ValidationReport) -> None:
    if subject_id is None or "subject_id" not in table.frame:
        return
    wrong = np.nonzero((table.frame["subject_id"] != subject_id).to_numpy())[0]
    if wrong.size:
        row = int(wrong[0])
        report.violations.append(
            Violation(table.path, table.line(row), f"subject_id {table.frame['subject_id'].iloc[row]!r} differs from file subject {subject_id!r}")
        )


def check_subjects(path: Path) -> ValidationReport:
    report = ValidationReport()
    table = _load(path, feature_store.SUBJECT_COLUMNS, report)
    if table is None:
        return report
    _check_vocabulary(table, "country", COUNTRIES, report)
    _check_numeric(table, ("session_ms",), report, integer=True)
    _check_vocabulary(table, "glasses", ("0", "1", "2"), report)
    duplicated = table.frame["subject_id"].duplicated().to_numpy()
    for row in np.nonzero(duplicated)[0]:
        report.violations.append(Violation(path, table.line(row), f"duplicate subject_id {table.frame['subject_id'].iloc[row]!r}"))
    return report


def check_annotations(path: Path, subject_id: str | None = None) -> ValidationReport:
    report = ValidationReport()
    table = _load(path, feature_store.ANNOTATION_COLUMNS, report)
    if table is None:
        return report
    _check_vocabulary(table, "channel", tuple(CHANNEL_LABELS), report)
    _check_numeric(table, ("start_ms", "end_ms"), report, integer=True)
    frame = table.frame
    start = pd.to_numeric(frame["start_ms"], errors="coerce")
    end = pd.to_numeric(frame["end_ms"], errors="coerce")
    for row in np.nonzero((start >= end).to_numpy())[0]:
        report.violations.append(Violation(path, table.line(row), f"start_ms {frame['start_ms'].iloc[row]} is not before end_ms {frame['end_ms'].iloc[row]}"))
    for row, (channel, label) in enumerate(zip(frame["channel"], frame["label"])):
        allowed = CHANNEL_LABELS.get(channel)
        if allowed is not None and label not in allowed:
            report.violations.append(
                Violation(path, table.line(row), f"unknown label {label!r} for channel {channel}; allowed {list(allowed)}")
            )
    return report


def check_frames(path: Path, subject_id: str | None = None) -> ValidationReport:
    report = ValidationReport()
    table = _load(path, feature_store.FRAME_COLUMNS, report, fps_line=True)
    if table is None:
        return report
    _check_subject_column(table, subject_id, report)
    _check_numeric(table, ("frame_idx",), report, integer=True)
    _check_frame_order(table, report)
    _check_vocabulary(table, "label_rater_a", FRAME_RATER_LABELS, report)
    _check_vocabulary(table, "label_rater_b", FRAME_RATER_LABELS, report)
    return report


def _check_frame_order(table: _Table, report: ValidationReport) -> None:
    idx = pd.to_numeric(table.frame["frame_idx"], errors="coerce").to_numpy(dtype=float)
    out_of_order = np.nonzero(idx != np.arange(len(idx)))[0]
    if out_of_order.size:
        row = int(out_of_order[0])
        report.violations.append(Violation(table.path, table.line(row), f"frame_idx must count 0, 1, 2, ...; row holds {table.frame['frame_idx'].iloc[row]!r}"))


def check_avatar(path: Path, subject_id: str | None = None) -> ValidationReport:
    report = ValidationReport()
    table = _load(path, feature_store.AVATAR_COLUMNS, report)
    if table is None:
        return report
    _check_numeric(table, feature_store.AVATAR_COLUMNS, report, integer=True)
    start = pd.to_numeric(table.frame["start_ms"], errors="coerce")
    end = pd.to_numeric(table.frame["end_ms"], errors="coerce")
    for row in np.nonzero((start >= end).to_numpy())[0]:
        report.violations.append(Violation(path, table.line(row), "avatar interval start_ms is not before end_ms"))
    return report


def check_trajectory(path: Path, subject_id: str | None = None) -> ValidationReport:
    report = ValidationReport()
    table = _load(path, feature_store.TRAJECTORY_COLUMNS, report)
    if table is None:
        return report
    _check_subject_column(table, subject_id, report)
    _check_numeric(table, ("frame_idx", "t_ms"), report, integer=True)
    _check_numeric(table, feature_store.TRAJECTORY_COLUMNS[3:-1], report)
    _check_vocabulary(table, "detected", ("0", "1"), report)
    t = pd.to_numeric(table.frame["t_ms"], errors="coerce").to_numpy(dtype=float)
    steps = np.nonzero(np.diff(t) <= 0)[0]
    if steps.size:
        row = int(steps[0]) + 1
        report.violations.append(Violation(path, table.line(row), f"t_ms must increase strictly; {t[row]:g} follows {t[row - 1]:g}"))
    return report


def _check_feature_file(path: Path, columns: Sequence[str], index_column: str, subject_id: str | None) -> ValidationReport:
    report = ValidationReport()
    table = _load(path, columns, report)
    if table is None:
        return report
    _check_subject_column(table, subject_id, report)
    _check_numeric(table, (index_column,), report, integer=True)
    values = table.frame[list(columns[2:])].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad_rows = np.nonzero(~np.isfinite(values).all(axis=1))[0]
    for row in bad_rows[:5]:
        column = columns[2 + int(np.nonzero(~np.isfinite(values[row]))[0][0])]
        report.violations.append(Violation(path, table.line(row), f"column {column} must be a finite number"))
    duplicated = table.frame[index_column].duplicated().to_numpy()
    for row in np.nonzero(duplicated)[0][:5]:
        report.violations.append(Violation(path, table.line(row), f"duplicate {index_column} {table.frame[index_column].iloc[row]}"))
    return report


def check_face(path: Path, subject_id: str | None = None) -> ValidationReport:
    return _check_feature_file(path, feature_store.FACE_COLUMNS, "frame_idx", subject_id)


def check_embeddings(path: Path, subject_id: str | None = None) -> ValidationReport:
    return _check_feature_file(path, feature_store.EMBEDDING_COLUMNS, "segment_index", subject_id)


CHECKERS: Dict[str, Callable[..., ValidationReport]] = {
    "annotations": check_annotations,
    "frames": check_frames,
    "avatar": check_avatar,
    "trajectories": check_trajectory,
    "face": check_face,
    "embeddings": check_embeddings,
}


def _kind_path(layout: CorpusLayout, kind: str, subject_id: str) -> Path:
    attribute = "trajectory" if kind == "trajectories" else kind
    return getattr(layout, attribute)(subject_id)


def validate_corpus(root: Path) -> ValidationReport:
    """Check subjects.csv and every per-subject file it implies."""
    layout = CorpusLayout(Path(root))
    report = ValidationReport()
    if not layout.subjects_csv.exists():
        report.violations.append(Violation(layout.subjects_csv, 0, "missing subjects.csv"))
        return report
    subjects_report = check_subjects(layout.subjects_csv)
    report.extend(subjects_report)
    if not subjects_report.ok:
        return report

    subject_ids = pd.read_csv(layout.subjects_csv, dtype=str, keep_default_na=False)["subject_id"].tolist()
    for row, subject_id in enumerate(subject_ids):
        for kind in REQUIRED_KINDS + OPTIONAL_KINDS:
            path = _kind_path(layout, kind, subject_id)
            if not path.exists():
                if kind in REQUIRED_KINDS:
                    report.violations.append(Violation(layout.subjects_csv, row + 2, f"subject {subject_id} has no {kind} file {path}"))
                continue
            report.extend(CHECKERS[kind](path, subject_id))

    known = set(subject_ids)
    for kind in REQUIRED_KINDS + OPTIONAL_KINDS:
        directory = layout.root / kind
        if not directory.is_dir():
            continue
        for path in sorted(directory.glob("*.csv")):
            if path.stem not in known:
                report.violations.append(Violation(path, 0, "file belongs to no subject listed in subjects.csv"))
    return report


def validate_inputs(paths: Sequence[Path] | Path) -> ValidationReport:
    """
    Validate corpus roots or individual input files.

    Directories are read as corpus roots; a single file is checked according
    to the directory it sits in (annotations/, frames/, ...) or, for
    subjects.csv, its name. Every violation carries its file and line.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    report = ValidationReport()
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            report.extend(validate_corpus(path))
        elif path.name == "subjects.csv":
            report.extend(check_subjects(path))
        elif path.parent.name in CHECKERS and path.exists():
            report.extend(CHECKERS[path.parent.name](path))
        else:
            report.violations.append(Violation(path, 0, "not a corpus directory or a recognised input file"))

    rows = sum(report.row_counts.values())
    if report.ok:
        _LOGGER.info("Validated {} files ({} rows); no violations.", len(report.row_counts), rows)
    else:
        _LOGGER.warning("Validation found {} violations in {} files.", len(report.violations), len(report.row_counts))
    return report
