"""
Deterministic synthetic corpus generation.

A session is a run of speech and silence episodes of whole seconds. Each
episode carries an audio emotion (speech only), a video emotion and
dimensional labels; raters copy them with a controllable disagreement rate.
Gaze, head pose, face features and speech embeddings are drawn around
class-conditioned means, with effect sizes in units of ``noise_scale``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import lfilter

from affectfuse.affectfuse import logger as app_logger
from shared.label_sets import (
    AROUSAL_LABELS,
    CHANNEL_LABELS,
    COUNTRIES,
    DOMINANCE_LABELS,
    EMBEDDING_DIM,
    FACE_FRAME_DIM,
    NEUTRAL,
    SEGMENT_MS,
    SEGMENT_STRIDE_MS,
    VALENCE_LABELS,
)
from shared.records import AnnotationEvent, Trajectory

from . import feature_store
from .annotations import segment_count
from .attention import gaze_direction, gaze_points_on_plane
from .feature_store import CorpusLayout, SubjectInfo

_LOGGER = app_logger.get_logger()

DEFAULT_AUDIO_PRIORS: Mapping[str, float] = {"calm": 0.955, "pleased": 0.02, "puzzled": 0.025}
DEFAULT_VIDEO_PRIORS: Mapping[str, float] = {"neutral": 0.87, "happy": 0.02, "pensive": 0.11}
PRIOR_TOLERANCE = 1e-6

VAD_FROM_AUDIO: Mapping[str, Tuple[str, str, str]] = {
    "calm": ("neutral", "neutral", "neither"),
    "pleased": ("positive", "slightly_excited", "dominant"),
    "puzzled": ("neutral", "slightly_excited", "defensive"),
    "sad": ("negative", "neutral", "defensive"),
    "tense": ("negative", "excited", "dominant"),
}
VAD_NOISE = 0.2

COACH_DISTANCE_MM = 600.0
ORIGIN_JITTER_MM = 5.0
GLANCE_RATE = 0.15
GLANCE_DEG = 15.0
GLANCE_BLOCK_MS = 500
HEAD_AR = 0.9
AVATAR_MARGIN_MS = 500


class SynthSpecError(ValueError):
    """Raised for synthetic-corpus settings that cannot be realised."""


@dataclass(frozen=True)
class SyntheticSpec:
    countries: Mapping[str, int] = field(default_factory=lambda: {c: 10 for c in COUNTRIES})
    session_ms: int = 60_000
    fps: Fraction = Fraction(25)
    audio_priors: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_AUDIO_PRIORS))
    video_priors: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_VIDEO_PRIORS))
    speech_fraction: float = 0.5
    episode_min_s: int = 3
    episode_max_s: int = 6
    effect_audio: float = 3.0
    effect_video: float = 3.0
    noise_scale: float = 1.0
    disagreement_rate: float = 0.05
    n_audio_raters: int = 3
    face_dropout: float = 0.02
    avatar_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "fps", Fraction(self.fps))
        unknown = sorted(set(self.countries) - set(COUNTRIES))
        if unknown:
            raise SynthSpecError(f"unknown countries {unknown}; expected a subset of {COUNTRIES}.")
        if any(int(n) < 0 for n in self.countries.values()) or sum(int(n) for n in self.countries.values()) == 0:
            raise SynthSpecError(f"subject counts must be non-negative with at least one subject, got {dict(self.countries)}.")
        if self.session_ms < SEGMENT_MS or self.session_ms % SEGMENT_STRIDE_MS:
            raise SynthSpecError(f"session_ms must be a multiple of {SEGMENT_STRIDE_MS} and at least {SEGMENT_MS}, got {self.session_ms}.")
        if self.fps <= 0:
            raise SynthSpecError(f"fps must be positive, got {self.fps}.")
        _check_priors("audio", self.audio_priors)
        _check_priors("video", self.video_priors)
        if self.effect_audio < 0 or self.effect_video < 0:
            raise SynthSpecError(f"effect sizes must be >= 0, got audio={self.effect_audio}, video={self.effect_video}.")
        if self.noise_scale <= 0:
            raise SynthSpecError(f"noise_scale must be positive, got {self.noise_scale}.")
        for name in ("speech_fraction", "disagreement_rate", "face_dropout", "avatar_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SynthSpecError(f"{name} must lie in [0, 1], got {value}.")
        if not 1 <= self.episode_min_s <= self.episode_max_s:
            raise SynthSpecError(f"episode lengths must satisfy 1 <= min <= max, got {self.episode_min_s}..{self.episode_max_s}.")
        if self.n_audio_raters < 1:
            raise SynthSpecError(f"n_audio_raters must be at least 1, got {self.n_audio_raters}.")

    @property
    def n_frames(self) -> int:
        return int(Fraction(self.session_ms, 1000) * self.fps)

    def subject_plan(self) -> List[Tuple[str, str]]:
        plan = []
        for country in COUNTRIES:
            for k in range(int(self.countries.get(country, 0))):
                plan.append((f"{country}{k + 1:02d}", country))
        return plan


def _check_priors(label_type: str, priors: Mapping[str, float]) -> None:
    vocabulary = CHANNEL_LABELS[label_type]
    unknown = sorted(set(priors) - set(vocabulary))
    if unknown:
        raise SynthSpecError(f"{label_type} priors name unknown labels {unknown}; allowed {list(vocabulary)}.")
    values = np.array(list(priors.values()), dtype=float)
    if values.size == 0 or (values < 0).any():
        raise SynthSpecError(f"{label_type} priors must be non-negative and non-empty, got {dict(priors)}.")
    if abs(values.sum() - 1.0) > PRIOR_TOLERANCE:
        raise SynthSpecError(f"{label_type} priors sum to {values.sum():.6f}, expected 1.")


@dataclass(frozen=True, slots=True)
class Episode:
    start_ms: int
    end_ms: int
    speech: bool
    audio: Optional[str]
    video: str
    vad: Tuple[str, str, str]


@dataclass(slots=True)
class Patterns:
    """Orthonormal class directions shared by every subject of a corpus."""

    face_video: np.ndarray
    face_audio: np.ndarray
    face_speaking: np.ndarray
    embedding_audio: np.ndarray
    embedding_silence: np.ndarray
    gaze_video: np.ndarray
    head_audio: np.ndarray


@dataclass(slots=True)
class SynthResult:
    root: Path
    subjects: List[SubjectInfo]
    n_files: int


def _orthonormal(rng: np.random.Generator, dim: int, k: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    return q[:, :k]


def make_patterns(seed_seq: np.random.SeedSequence) -> Patterns:
    rng = np.random.default_rng(seed_seq)
    video = CHANNEL_LABELS["video"]
    audio = CHANNEL_LABELS["audio"]
    face = _orthonormal(rng, FACE_FRAME_DIM, len(video) + len(audio) + 1)
    embedding = _orthonormal(rng, EMBEDDING_DIM, len(audio) + 1)
    angles = 2.0 * np.pi * np.arange(len(video)) / len(video)
    return Patterns(
        face_video=face[:, : len(video)],
        face_audio=face[:, len(video) : len(video) + len(audio)],
        face_speaking=face[:, -1],
        embedding_audio=embedding[:, : len(audio)],
        embedding_silence=embedding[:, -1],
        gaze_video=np.stack([np.cos(angles), np.sin(angles)], axis=1),
        head_audio=_orthonormal(rng, 3, 3)[:, np.arange(len(audio)) % 3].T,
    )


def _draw(rng: np.random.Generator, priors: Mapping[str, float]) -> str:
    labels = list(priors)
    p = np.array([priors[label] for label in labels], dtype=float)
    return str(labels[int(rng.choice(len(labels), p=p / p.sum()))])


def _other(rng: np.random.Generator, label: str, vocabulary: Sequence[str]) -> str:
    choices = [v for v in vocabulary if v != label]
    return str(choices[int(rng.integers(len(choices)))])


def make_episodes(spec: SyntheticSpec, rng: np.random.Generator) -> List[Episode]:
    episodes: List[Episode] = []
    t = 0
    while t < spec.session_ms:
        length = 1000 * int(rng.integers(spec.episode_min_s, spec.episode_max_s + 1))
        end = min(t + length, spec.session_ms)
        speech = bool(rng.random() < spec.speech_fraction)
        audio = _draw(rng, spec.audio_priors) if speech else None
        video = _draw(rng, spec.video_priors)
        base = VAD_FROM_AUDIO.get(audio or "calm", VAD_FROM_AUDIO["calm"])
        vad = tuple(
            _other(rng, label, vocabulary) if rng.random() < VAD_NOISE else label
            for label, vocabulary in zip(base, (VALENCE_LABELS, AROUSAL_LABELS, DOMINANCE_LABELS))
        )
        episodes.append(Episode(t, end, speech, audio, video, vad))
        t = end
    return episodes


def rater_events(spec: SyntheticSpec, episodes: Sequence[Episode], rng: np.random.Generator) -> List[AnnotationEvent]:
    """Audio and dimensional events of every rater over the speech episodes."""
    events: List[AnnotationEvent] = []
    audio_vocabulary = list(spec.audio_priors)
    for r in range(spec.n_audio_raters):
        rater = f"r{r + 1}"
        for episode in episodes:
            if not episode.speech:
                continue
            label = episode.audio
            if rng.random() < spec.disagreement_rate and len(audio_vocabulary) > 1:
                label = _other(rng, label, audio_vocabulary)
            events.append(AnnotationEvent(rater, "audio", episode.start_ms, episode.end_ms, label))
            for channel, value in zip(("valence", "arousal", "dominance"), episode.vad):
                if rng.random() < spec.disagreement_rate:
                    value = _other(rng, value, CHANNEL_LABELS[channel])
                events.append(AnnotationEvent(rater, channel, episode.start_ms, episode.end_ms, value))
    return events


def frame_rater_labels(
    spec: SyntheticSpec,
    episodes: Sequence[Episode],
    frame_times: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[List[str], List[str]]:
    """Two raters' frame labels; neutral frames are left blank."""
    video_vocabulary = list(spec.video_priors)
    a: List[str] = []
    b: List[str] = []
    episode_of = _episode_index(episodes, frame_times)
    b_labels = []
    for episode in episodes:
        label = episode.video
        if rng.random() < spec.disagreement_rate and len(video_vocabulary) > 1:
            label = _other(rng, label, video_vocabulary)
        b_labels.append(label)
    for i in episode_of:
        label_a = episodes[i].video
        label_b = b_labels[i]
        a.append("" if label_a == NEUTRAL else label_a)
        b.append("" if label_b == NEUTRAL else label_b)
    return a, b


def _episode_index(episodes: Sequence[Episode], times_ms: np.ndarray) -> np.ndarray:
    starts = np.array([e.start_ms for e in episodes], dtype=float)
    return np.clip(np.searchsorted(starts, times_ms, side="right") - 1, 0, len(episodes) - 1)


def avatar_intervals(spec: SyntheticSpec, episodes: Sequence[Episode], rng: np.random.Generator) -> List[Tuple[int, int]]:
    """Coach speech placed inside silence episodes."""
    out = []
    for episode in episodes:
        if episode.speech or episode.end_ms - episode.start_ms <= 2 * AVATAR_MARGIN_MS:
            continue
        if rng.random() < spec.avatar_fraction:
            out.append((episode.start_ms + AVATAR_MARGIN_MS, episode.end_ms - AVATAR_MARGIN_MS))
    return out


def _ar_noise(rng: np.random.Generator, n: int, scale: float) -> np.ndarray:
    innovations = rng.standard_normal(n) * scale * np.sqrt(1.0 - HEAD_AR**2)
    return lfilter([1.0], [1.0, -HEAD_AR], innovations)


def make_trajectory(
    spec: SyntheticSpec,
    subject_id: str,
    episodes: Sequence[Episode],
    patterns: Patterns,
    rng: np.random.Generator,
) -> Trajectory:
    """
    Gaze fixed on the coach with occasional glances, offset per video class;
    head pose slowly varying around an offset per audio class.
    """
    n = spec.n_frames
    sigma = spec.noise_scale
    frame_idx = np.arange(n, dtype=np.int64)
    t_ms = np.array([int(round(Fraction(i * 1000) / spec.fps)) for i in range(n)], dtype=float)
    episode_of = _episode_index(episodes, t_ms)

    video_vocabulary = CHANNEL_LABELS["video"]
    audio_vocabulary = CHANNEL_LABELS["audio"]
    video_idx = np.array([video_vocabulary.index(episodes[i].video) for i in episode_of])
    audio_idx = np.array([audio_vocabulary.index(episodes[i].audio) if episodes[i].speech else -1 for i in episode_of])

    coach = np.array([rng.uniform(-5.0, 5.0), rng.uniform(-12.0, -6.0)])
    glance_blocks = int(np.ceil(spec.session_ms / GLANCE_BLOCK_MS)) + 1
    glancing = rng.random(glance_blocks) < GLANCE_RATE
    glance_offset = rng.uniform(-GLANCE_DEG, GLANCE_DEG, size=(glance_blocks, 2))
    block = (t_ms // GLANCE_BLOCK_MS).astype(np.int64)

    gaze = coach + spec.effect_video * sigma * patterns.gaze_video[video_idx] + rng.normal(0.0, sigma, size=(n, 2))
    gaze += np.where(glancing[block, None], glance_offset[block], 0.0)

    head = np.stack([_ar_noise(rng, n, sigma) for _ in range(3)], axis=1)
    speaking = audio_idx >= 0
    head[speaking] += spec.effect_audio * sigma * patterns.head_audio[audio_idx[speaking]]
    gaze += head[:, :2]

    origin = np.array([0.0, 0.0, COACH_DISTANCE_MM]) + rng.normal(0.0, ORIGIN_JITTER_MM, size=(n, 3))
    directions = gaze_direction(gaze)
    plane = np.full((n, 2), np.nan)
    for i in range(n):
        hit = gaze_points_on_plane(origin[i], directions[i])
        if hit is not None:
            plane[i] = hit

    detected = rng.random(n) >= spec.face_dropout
    gaze[~detected] = 0.0
    head[~detected] = 0.0
    plane[~detected] = 0.0
    return Trajectory(
        subject_id=subject_id,
        frame_idx=frame_idx,
        t_ms=t_ms,
        gaze=gaze,
        head=head,
        origin=origin,
        plane=np.nan_to_num(plane),
        detected=detected,
    )


def face_features(
    spec: SyntheticSpec,
    episodes: Sequence[Episode],
    frame_times: np.ndarray,
    patterns: Patterns,
    rng: np.random.Generator,
) -> np.ndarray:
    sigma = spec.noise_scale
    episode_of = _episode_index(episodes, frame_times)
    video_vocabulary = CHANNEL_LABELS["video"]
    audio_vocabulary = CHANNEL_LABELS["audio"]
    out = rng.normal(0.0, sigma, size=(len(frame_times), FACE_FRAME_DIM))
    for e, episode in enumerate(episodes):
        rows = episode_of == e
        mean = spec.effect_video * sigma * patterns.face_video[:, video_vocabulary.index(episode.video)]
        if episode.speech:
            mean = mean + spec.effect_audio * sigma * patterns.face_audio[:, audio_vocabulary.index(episode.audio)]
            mean = mean + sigma * patterns.face_speaking
        out[rows] += mean
    return out


def segment_embeddings(spec: SyntheticSpec, episodes: Sequence[Episode], patterns: Patterns, rng: np.random.Generator) -> np.ndarray:
    """One 1024D vector per segment, mixing episode means by their overlap with it."""
    sigma = spec.noise_scale
    audio_vocabulary = CHANNEL_LABELS["audio"]
    n_segments = segment_count(spec.session_ms)
    out = rng.normal(0.0, sigma, size=(n_segments, EMBEDDING_DIM))
    for s in range(n_segments):
        lo = s * SEGMENT_STRIDE_MS
        hi = lo + SEGMENT_MS
        for episode in episodes:
            overlap = min(hi, episode.end_ms) - max(lo, episode.start_ms)
            if overlap <= 0:
                continue
            if episode.speech:
                direction = spec.effect_audio * patterns.embedding_audio[:, audio_vocabulary.index(episode.audio)]
            else:
                direction = patterns.embedding_silence
            out[s] += (overlap / SEGMENT_MS) * sigma * direction
    return out


@dataclass
class CorpusWriter:
    """Write a synthetic corpus under ``root`` in the documented input layout."""

    root: Path

    def write(self, spec: SyntheticSpec) -> SynthResult:
        layout = CorpusLayout(Path(self.root))
        plan = spec.subject_plan()
        root_seq = np.random.SeedSequence(spec.seed)
        pattern_seq, subject_root = root_seq.spawn(2)
        patterns = make_patterns(pattern_seq)
        subjects: List[SubjectInfo] = []
        n_files = 0
        for (subject_id, country), seq in zip(plan, subject_root.spawn(len(plan))):
            info, written = self._write_subject(layout, spec, subject_id, country, patterns, seq)
            subjects.append(info)
            n_files += written
        feature_store.write_subjects(layout.subjects_csv, subjects)
        n_files += 1
        _LOGGER.info("Synthetic corpus: {} subjects, {} files under {}.", len(subjects), n_files, layout.root)
        return SynthResult(root=layout.root, subjects=subjects, n_files=n_files)

    @staticmethod
    def _write_subject(
        layout: CorpusLayout,
        spec: SyntheticSpec,
        subject_id: str,
        country: str,
        patterns: Patterns,
        seq: np.random.SeedSequence,
    ) -> Tuple[SubjectInfo, int]:
        episode_rng, rater_rng, motion_rng, face_rng, embed_rng = (np.random.default_rng(s) for s in seq.spawn(5))
        episodes = make_episodes(spec, episode_rng)
        glasses = int(episode_rng.integers(0, 3))

        feature_store.write_annotations(layout.annotations(subject_id), rater_events(spec, episodes, rater_rng))
        feature_store.write_avatar(layout.avatar(subject_id), avatar_intervals(spec, episodes, rater_rng))

        trajectory = make_trajectory(spec, subject_id, episodes, patterns, motion_rng)
        feature_store.write_trajectory(layout.trajectory(subject_id), trajectory)

        frame_times = np.arange(spec.n_frames, dtype=float) * (1000.0 / float(spec.fps))
        rater_a, rater_b = frame_rater_labels(spec, episodes, frame_times, rater_rng)
        feature_store.write_frame_labels(layout.frames(subject_id), subject_id, spec.fps, rater_a, rater_b)

        face = face_features(spec, episodes, frame_times, patterns, face_rng)
        detected = np.nonzero(trajectory.detected)[0]
        feature_store.write_face(layout.face(subject_id), subject_id, detected, face[detected])

        embeddings = segment_embeddings(spec, episodes, patterns, embed_rng)
        feature_store.write_embeddings(layout.embeddings(subject_id), subject_id, range(len(embeddings)), embeddings)
        _LOGGER.debug("Synthesised {} ({}): {} episodes, {} frames.", subject_id, country, len(episodes), spec.n_frames)
        return SubjectInfo(subject_id, country, spec.session_ms, glasses), 6


def spec_from_dict(data: Mapping[str, object], *, seed: Optional[int] = None) -> SyntheticSpec:
    """Build a spec from a ``synth`` config section; ``seed`` overrides the section's."""
    fields = dict(data)
    if "fps" in fields:
        fields["fps"] = Fraction(str(fields["fps"]))
    if seed is not None:
        fields["seed"] = seed
    try:
        return SyntheticSpec(**fields)
    except TypeError as exc:
        raise SynthSpecError(f"invalid synth settings: {exc}") from exc


def synth_corpus(spec: SyntheticSpec, root: Path) -> SynthResult:
    return CorpusWriter(Path(root)).write(spec)
