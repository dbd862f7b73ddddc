"""
Label vocabularies and feature widths shared across the pipeline.
"""

from __future__ import annotations

from typing import Dict, Tuple

# Audio segment labels. "discarded" and "silence" are produced by the gold
# standard, never by raters.
AUDIO_EMOTIONS: Tuple[str, ...] = ("calm", "pleased", "puzzled", "sad", "tense")
AUDIO_SEGMENT_LABELS: Tuple[str, ...] = AUDIO_EMOTIONS + ("discarded", "silence")

VIDEO_EMOTIONS: Tuple[str, ...] = ("happy", "pensive", "surprised", "angry", "sad", "other")
VIDEO_FRAME_LABELS: Tuple[str, ...] = ("neutral",) + VIDEO_EMOTIONS + ("discarded",)

VALENCE_LABELS: Tuple[str, ...] = ("positive", "neutral", "negative")
AROUSAL_LABELS: Tuple[str, ...] = ("excited", "slightly_excited", "neutral")
DOMINANCE_LABELS: Tuple[str, ...] = ("dominant", "neither", "defensive")

# Rater vocabularies per annotation channel.
CHANNEL_LABELS: Dict[str, Tuple[str, ...]] = {
    "audio": AUDIO_EMOTIONS,
    "video": ("neutral",) + VIDEO_EMOTIONS,
    "valence": VALENCE_LABELS,
    "arousal": AROUSAL_LABELS,
    "dominance": DOMINANCE_LABELS,
}
VAD_CHANNELS: Tuple[str, ...] = ("valence", "arousal", "dominance")

REDUCED_AUDIO: Tuple[str, ...] = ("calm", "pleased", "puzzled")
REDUCED_VIDEO: Tuple[str, ...] = ("neutral", "happy", "pensive")

COUNTRIES: Tuple[str, ...] = ("SP", "FR", "NO")
WHOLE = "WH"

DISCARDED = "discarded"
SILENCE = "silence"
NEUTRAL = "neutral"

SEGMENT_MS = 3000
SEGMENT_STRIDE_MS = 1000

FACE_FRAME_DIM = 256
FACE_SEGMENT_DIM = 2 * FACE_FRAME_DIM
EMBEDDING_DIM = 1024
ENRICHED_DIM = 1031
GAZE_DIM = 228

# Feature width per modality and label type.
MODALITY_WIDTHS: Dict[str, Dict[str, int]] = {
    "audio": {"A": ENRICHED_DIM, "F": FACE_SEGMENT_DIM, "G": GAZE_DIM},
    "video": {"A": ENRICHED_DIM, "F": FACE_FRAME_DIM, "G": GAZE_DIM},
}
MODALITY_ORDER: Tuple[str, ...] = ("A", "F", "G")


def reduced_labels(label_type: str) -> Tuple[str, ...]:
    """Return the three-class vocabulary used for training a label type."""
    if label_type == "audio":
        return REDUCED_AUDIO
    if label_type == "video":
        return REDUCED_VIDEO
    raise ValueError(f"label_type must be 'audio' or 'video', got {label_type!r}.")
