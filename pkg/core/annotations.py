"""
Gold-standard construction and agreement statistics for rater annotations.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from affectfuse.affectfuse import logger as app_logger
from shared.label_sets import (
    CHANNEL_LABELS,
    DISCARDED,
    NEUTRAL,
    SEGMENT_MS,
    SEGMENT_STRIDE_MS,
    SILENCE,
)
from shared.records import AnnotationEvent, AudioSegment, FrameLabelTrack

_LOGGER = app_logger.get_logger()

DEFAULT_MAJORITY_FRACTION = 0.5
AVATAR_MAX_FRACTION = 1.0 / 3.0
NO_LABEL = -1

# Recorded in run metadata so gold standards can be traced to the rule used.
COMBINATION_RULE = "per-ms modal label among raters that labeled the ms; ties -> no label"


class AnnotationError(ValueError):
    """Raised for malformed annotation input."""


@dataclass(slots=True)
class ContingencyTable:
    """Audio-label x video-label counts with audio segments as units."""

    rows: Tuple[str, ...]
    cols: Tuple[str, ...]
    counts: np.ndarray
    skipped: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def percentages(self) -> np.ndarray:
        total = self.total
        if total == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts * (100.0 / total)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.percentages, index=list(self.rows), columns=list(self.cols))

    def __add__(self, other: "ContingencyTable") -> "ContingencyTable":
        if self.rows != other.rows or self.cols != other.cols:
            raise AnnotationError("cannot merge contingency tables with different label sets.")
        return ContingencyTable(self.rows, self.cols, self.counts + other.counts, self.skipped + other.skipped)


@dataclass(slots=True)
class ReductionResult:
    labels: List[str]
    kept_index: np.ndarray
    dropped: Dict[str, int] = field(default_factory=dict)


def check_no_overlap(events: Iterable[AnnotationEvent]) -> None:
    """Reject overlapping events of one rater on one channel."""
    by_track: Dict[Tuple[str, str], List[AnnotationEvent]] = {}
    for event in events:
        by_track.setdefault((event.rater_id, event.channel), []).append(event)

    for (rater, channel), track in by_track.items():
        ordered = sorted(track, key=lambda e: (e.start_ms, e.end_ms))
        for previous, current in zip(ordered, ordered[1:]):
            if current.start_ms < previous.end_ms:
                raise AnnotationError(
                    f"rater {rater} has overlapping {channel} events: "
                    f"[{previous.start_ms},{previous.end_ms}) {previous.label} and "
                    f"[{current.start_ms},{current.end_ms}) {current.label}."
                )


def rasterize(events: Iterable[AnnotationEvent], session_length_ms: int, vocabulary: Sequence[str]) -> np.ndarray:
    """Return one label code per millisecond (NO_LABEL where unlabeled)."""
    codes = np.full(session_length_ms, NO_LABEL, dtype=np.int8)
    index = {label: i for i, label in enumerate(vocabulary)}
    for event in events:
        start = max(0, event.start_ms)
        end = min(session_length_ms, event.end_ms)
        if end > start:
            codes[start:end] = index[event.label]
    return codes


def combine_raters(rater_codes: Sequence[np.ndarray], n_labels: int) -> np.ndarray:
    """Per-ms modal label across raters; ties and fully unlabeled ms give NO_LABEL."""
    if not rater_codes:
        raise AnnotationError("at least one rater is required.")
    length = len(rater_codes[0])
    votes = np.zeros((n_labels, length), dtype=np.int16)
    for codes in rater_codes:
        labeled = codes >= 0
        np.add.at(votes, (codes[labeled].astype(np.int64), np.nonzero(labeled)[0]), 1)

    best = votes.argmax(axis=0)
    top = votes.max(axis=0)
    n_top = (votes == top).sum(axis=0)
    combined = np.where((top > 0) & (n_top == 1), best, NO_LABEL)
    return combined.astype(np.int8)


def segment_count(session_length_ms: int) -> int:
    if session_length_ms < SEGMENT_MS:
        return 0
    return (session_length_ms - SEGMENT_MS) // SEGMENT_STRIDE_MS + 1


def _segment_labels(
    events_by_rater: Mapping[str, Sequence[AnnotationEvent]],
    session_length_ms: int,
    majority_fraction: float,
    channel: str,
) -> List[Optional[str]]:
    """Label per segment; None marks silence, DISCARDED a failed majority."""
    if not 0.0 < majority_fraction <= 1.0:
        raise AnnotationError(f"majority_fraction must lie in (0, 1], got {majority_fraction}.")
    if not events_by_rater:
        raise AnnotationError("events from at least one rater are required.")

    vocabulary = CHANNEL_LABELS[channel]
    all_events = [e for events in events_by_rater.values() for e in events if e.channel == channel]
    check_no_overlap(all_events)

    rater_codes = [
        rasterize([e for e in events if e.channel == channel], session_length_ms, vocabulary)
        for _, events in sorted(events_by_rater.items())
    ]
    combined = combine_raters(rater_codes, len(vocabulary))
    any_labeled = np.any(np.vstack(rater_codes) >= 0, axis=0)

    n_segments = segment_count(session_length_ms)
    starts = np.arange(n_segments, dtype=np.int64) * SEGMENT_STRIDE_MS
    ends = starts + SEGMENT_MS

    one_hot = np.zeros((len(vocabulary), session_length_ms + 1), dtype=np.int32)
    labeled = combined >= 0
    one_hot[combined[labeled].astype(np.int64), np.nonzero(labeled)[0] + 1] = 1
    cumulative = one_hot.cumsum(axis=1)
    counts = cumulative[:, ends] - cumulative[:, starts]

    speech_cumulative = np.concatenate([[0], np.cumsum(any_labeled, dtype=np.int64)])
    speech = speech_cumulative[ends] - speech_cumulative[starts]

    threshold = majority_fraction * SEGMENT_MS - 1e-9
    labels: List[Optional[str]] = []
    for s in range(n_segments):
        if speech[s] == 0:
            labels.append(None)
            continue
        column = counts[:, s]
        winner = int(column.argmax())
        unique_top = int((column == column[winner]).sum()) == 1
        if unique_top and column[winner] >= threshold:
            labels.append(vocabulary[winner])
        else:
            labels.append(DISCARDED)
    return labels


def build_audio_gold(
    events_by_rater: Mapping[str, Sequence[AnnotationEvent]],
    session_length_ms: int,
    majority_fraction: float = DEFAULT_MAJORITY_FRACTION,
    *,
    subject_id: str = "",
) -> List[AudioSegment]:
    """
    Cut a session into 3-s segments with a 1-s stride and label each one.

    Rater tracks are combined per millisecond first; the segment takes the
    combined label covering at least ``majority_fraction`` of its duration,
    ``discarded`` if none does and ``silence`` if no rater annotated speech
    anywhere inside it.
    """
    labels = _segment_labels(events_by_rater, session_length_ms, majority_fraction, "audio")
    segments = [
        AudioSegment(
            subject_id=subject_id,
            segment_index=i,
            start_ms=i * SEGMENT_STRIDE_MS,
            end_ms=i * SEGMENT_STRIDE_MS + SEGMENT_MS,
            label=SILENCE if label is None else label,
        )
        for i, label in enumerate(labels)
    ]
    tally = Counter(s.label for s in segments)
    _LOGGER.debug("Audio gold for {}: {} segments {}", subject_id or "<session>", len(segments), dict(tally))
    return segments


def build_vad_gold(
    events_by_rater: Mapping[str, Sequence[AnnotationEvent]],
    session_length_ms: int,
    majority_fraction: float = DEFAULT_MAJORITY_FRACTION,
) -> Dict[str, List[Optional[str]]]:
    """Dimensional gold standards per channel; None where silent or discarded."""
    result: Dict[str, List[Optional[str]]] = {}
    for channel in ("valence", "arousal", "dominance"):
        has_channel = any(e.channel == channel for events in events_by_rater.values() for e in events)
        if not has_channel:
            continue
        labels = _segment_labels(events_by_rater, session_length_ms, majority_fraction, channel)
        result[channel] = [None if label in (None, DISCARDED) else label for label in labels]
    return result


def attach_vad(segments: Sequence[AudioSegment], vad: Mapping[str, Sequence[Optional[str]]]) -> None:
    for channel, labels in vad.items():
        for segment in segments:
            label = labels[segment.segment_index] if segment.segment_index < len(labels) else None
            if label is not None:
                segment.vad[channel] = label


def filter_avatar_overlap(
    segments: Sequence[AudioSegment],
    avatar_intervals: Optional[Sequence[Tuple[int, int]]],
    max_fraction: float = AVATAR_MAX_FRACTION,
) -> List[AudioSegment]:
    """Keep segments where the avatar speaks at most ``max_fraction`` of the time."""
    if not avatar_intervals:
        return list(segments)
    horizon = max([s.end_ms for s in segments] + [end for _, end in avatar_intervals] + [0])
    speaking = np.zeros(horizon + 1, dtype=np.int64)
    for start, end in avatar_intervals:
        speaking[max(0, start) + 1 : max(0, end) + 1] = 1
    cumulative = speaking.cumsum()

    limit = max_fraction * SEGMENT_MS + 1e-9
    kept = [s for s in segments if cumulative[s.end_ms] - cumulative[s.start_ms] <= limit]
    if len(kept) < len(segments):
        _LOGGER.debug("Avatar filter removed {} of {} segments.", len(segments) - len(kept), len(segments))
    return kept


def _normalise_frame_label(value: Optional[str]) -> str:
    if value is None:
        return NEUTRAL
    if isinstance(value, float) and np.isnan(value):
        return NEUTRAL
    text = str(value).strip()
    return text or NEUTRAL


def build_video_gold(
    track_a: Sequence[Optional[str]],
    track_b: Sequence[Optional[str]],
    *,
    subject_id: str = "",
    fps: Fraction | int | str = 25,
) -> FrameLabelTrack:
    """Intersect two raters' frame labels; disagreement frames become ``discarded``."""
    if len(track_a) != len(track_b):
        raise AnnotationError(
            f"frame tracks differ in length: rater a has {len(track_a)} frames, rater b has {len(track_b)}."
        )
    labels = []
    for a, b in zip(track_a, track_b):
        a_label = _normalise_frame_label(a)
        b_label = _normalise_frame_label(b)
        labels.append(a_label if a_label == b_label else DISCARDED)
    return FrameLabelTrack(subject_id=subject_id, fps=Fraction(fps), labels=tuple(labels))


def cohen_kappa(track_a: Sequence, track_b: Sequence) -> float:
    """Cohen's kappa between two equally long label sequences."""
    if len(track_a) == 0 or len(track_b) == 0:
        raise AnnotationError("kappa needs non-empty label sequences.")
    if len(track_a) != len(track_b):
        raise AnnotationError(f"kappa needs equal lengths, got {len(track_a)} and {len(track_b)}.")

    a = np.asarray(track_a)
    b = np.asarray(track_b)
    _, codes = np.unique(np.concatenate([a.astype(str), b.astype(str)]), return_inverse=True)
    n = len(a)
    n_cat = int(codes.max()) + 1
    code_a, code_b = codes[:n], codes[n:]

    confusion = np.bincount(code_a * n_cat + code_b, minlength=n_cat * n_cat).reshape(n_cat, n_cat)
    p_o = np.trace(confusion) / n
    p_e = float(np.dot(confusion.sum(axis=1), confusion.sum(axis=0))) / (n * n)
    if 1.0 - p_e < 1e-12:
        return 1.0
    return float((p_o - p_e) / (1.0 - p_e))


def agreement_summary(tracks_by_rater: Mapping[str, Sequence]) -> Dict[str, object]:
    """Pairwise kappa for every rater pair plus their mean."""
    pairs: Dict[str, float] = {}
    for first, second in combinations(sorted(tracks_by_rater), 2):
        pairs[f"{first}~{second}"] = cohen_kappa(tracks_by_rater[first], tracks_by_rater[second])
    mean = float(np.mean(list(pairs.values()))) if pairs else float("nan")
    return {"pairs": pairs, "mean": mean}


def audio_rater_tracks(
    events_by_rater: Mapping[str, Sequence[AnnotationEvent]],
    session_length_ms: int,
    channel: str = "audio",
) -> Dict[str, np.ndarray]:
    """Millisecond-level code tracks per rater, ready for ``agreement_summary``."""
    vocabulary = CHANNEL_LABELS[channel]
    return {
        rater: rasterize([e for e in events if e.channel == channel], session_length_ms, vocabulary)
        for rater, events in events_by_rater.items()
    }


def contingency_audio_video(
    segments: Sequence[AudioSegment],
    frames: FrameLabelTrack | Mapping[str, FrameLabelTrack],
    keep_audio: Sequence[str],
    keep_video: Sequence[str],
) -> ContingencyTable:
    """
    Count (audio label, modal video label) pairs over audio segments.

    The modal video label is taken over the segment's frames whose label is in
    ``keep_video``; ties go to the label listed first. Segments that run past
    the end of the video, or have no valid frames, are skipped and tallied.
    """
    rows = tuple(keep_audio)
    cols = tuple(keep_video)
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    col_index = {label: j for j, label in enumerate(cols)}
    skipped = 0

    for segment in segments:
        if segment.label not in rows:
            continue
        track = frames if isinstance(frames, FrameLabelTrack) else frames.get(segment.subject_id)
        if track is None or len(track) == 0:
            skipped += 1
            continue
        times = track.frame_times_ms()
        video_end = times[-1] + 1000.0 / float(track.fps)
        if segment.end_ms > video_end + 1e-9:
            skipped += 1
            continue
        inside = np.nonzero((times >= segment.start_ms) & (times < segment.end_ms))[0]
        tally = np.zeros(len(cols), dtype=np.int64)
        for i in inside:
            j = col_index.get(track.labels[i])
            if j is not None:
                tally[j] += 1
        if tally.sum() == 0:
            skipped += 1
            continue
        counts[rows.index(segment.label), int(tally.argmax())] += 1

    if skipped:
        _LOGGER.info("Contingency table skipped {} of {} segments.", skipped, len(segments))
    return ContingencyTable(rows=rows, cols=cols, counts=counts, skipped=skipped)


def reduce_classes(labels: Sequence[Optional[str]], keep: Iterable[str]) -> ReductionResult:
    """Drop samples whose label is outside ``keep`` and count what was dropped."""
    keep_set = set(keep)
    if not keep_set:
        raise AnnotationError("keep must name at least one label.")
    kept_index = [i for i, label in enumerate(labels) if label in keep_set]
    dropped = Counter(str(label) for label in labels if label not in keep_set)
    if dropped:
        _LOGGER.debug("Class reduction dropped {}", dict(sorted(dropped.items())))
    return ReductionResult(
        labels=[labels[i] for i in kept_index],
        kept_index=np.asarray(kept_index, dtype=np.int64),
        dropped=dict(sorted(dropped.items())),
    )


def label_distribution(labels_by_group: Mapping[str, Sequence[str]], vocabulary: Sequence[str]) -> pd.DataFrame:
    """Counts per label (columns, in vocabulary order) per group (rows)."""
    table = {
        group: [sum(1 for label in labels if label == v) for v in vocabulary]
        for group, labels in labels_by_group.items()
    }
    return pd.DataFrame.from_dict(table, orient="index", columns=list(vocabulary))


def contingency_by_country(tables: Mapping[str, ContingencyTable], whole: str) -> pd.DataFrame:
    """
    Stack per-country tables, plus their sum under ``whole``, into one frame.

    Each country's cells are percentages of that country's own total; rows
    are keyed by ``country`` and ``audio_label``.
    """
    if not tables:
        return pd.DataFrame(columns=["country", "audio_label"])
    ordered = dict(tables)
    merged = None
    for table in tables.values():
        merged = table if merged is None else merged + table
    ordered[whole] = merged
    frames = [
        table.to_frame().rename_axis("audio_label").reset_index().assign(country=country, units=table.total)
        for country, table in ordered.items()
    ]
    frame = pd.concat(frames, ignore_index=True)
    return frame[["country", "audio_label", "units"] + list(merged.cols)]
