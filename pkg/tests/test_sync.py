import numpy as np
import pytest

from core.sync import (
    SchemaMismatchError,
    SubjectStreams,
    SyncError,
    align_window_to_segment,
    assemble_dataset,
    check_columns,
    expected_width,
    frame_to_nearest,
    segment_face_central_frames,
    segment_face_stats,
)
from shared.records import AudioSegment, FeatureWindow, FrameLabelTrack


def _window(center, span=1500):
    start = max(center - span // 2, 0)
    return FeatureWindow("SP01", center, span, start, center + span // 2, (), 1.0)


def _segment(index, label):
    return AudioSegment("SP01", index, index * 1000, index * 1000 + 3000, label)


def test_window_centered_on_segment_is_selected():
    windows = [_window(750), _window(1500), _window(2250)]
    assert align_window_to_segment(windows, _segment(0, "calm")) == 1


def test_equidistant_windows_resolve_to_the_earlier():
    windows = [_window(1000), _window(2000)]
    assert align_window_to_segment(windows, _segment(0, "calm")) == 0


def test_windows_outside_the_segment_are_ignored():
    windows = [_window(5000), _window(6000)]
    assert align_window_to_segment(windows, _segment(0, "calm")) is None
    assert align_window_to_segment([], _segment(0, "calm")) is None


def test_frame_matches_nearest_segment():
    assert frame_to_nearest(1499.0, [], [1500.0, 2500.0]) == (None, 0)


def test_equidistant_frame_takes_earlier_center():
    assert frame_to_nearest(2000.0, [1500.0, 2500.0], [1500.0, 2500.0]) == (0, 0)


def test_frame_after_last_segment_is_unmatched():
    assert frame_to_nearest(3100.0, [3000.0], [1500.0]) == (0, None)
    assert frame_to_nearest(4000.0, [3000.0], [1500.0]) == (None, None)


def test_segment_face_stats_mean_then_sd():
    frames = np.vstack([np.zeros(256), np.full(256, 2.0)])
    stats = segment_face_stats(frames)
    assert stats.shape == (512,)
    assert np.all(stats[:256] == 1.0) and np.all(stats[256:] == 1.0)
    with pytest.raises(SyncError):
        segment_face_stats(np.zeros((0, 256)))


def test_central_frames_pick_nearest_to_each_second_middle():
    times = np.arange(75) * 40.0
    features = np.repeat(np.arange(75, dtype=float)[:, None], 256, axis=1)
    picked = segment_face_central_frames(times, features, _segment(0, "calm"))
    assert picked.shape == (768,)
    assert [picked[0], picked[256], picked[512]] == [12.0, 37.0, 62.0]


def test_central_frames_need_a_face_in_every_second():
    times = np.arange(75) * 40.0
    features = np.zeros((75, 256))
    features[25:50] = np.nan
    assert segment_face_central_frames(times, features, _segment(0, "calm")) is None


def test_check_columns_describes_the_mismatch():
    with pytest.raises(SchemaMismatchError) as info:
        check_columns("gaze.csv", ["a", "b", "c"], ["a", "c", "b"])
    assert info.value.reordered
    assert "position 1" in str(info.value)
    with pytest.raises(SchemaMismatchError) as info:
        check_columns("gaze.csv", ["a", "b"], ["a"])
    assert info.value.missing == ["b"]
    check_columns("gaze.csv", ["a"], ["a"])


def _subject(n_frames=150, frame_label="neutral"):
    segments = [_segment(0, "calm"), _segment(1, "pleased"), _segment(2, "sad"), _segment(3, "silence")]
    windows = [_window(c) for c in range(0, 6001, 500)]
    return SubjectStreams(
        subject_id="SP01",
        country="SP",
        segments=segments,
        frames=FrameLabelTrack("SP01", 25, [frame_label] * n_frames),
        audio_features={0: np.ones(1031), 1: np.full(1031, 2.0), 2: np.zeros(1031)},
        face_features=np.ones((n_frames, 256)),
        gaze_windows=windows,
        gaze_vectors=np.zeros((len(windows), 228)),
    )


def test_audio_rows_keep_reduced_speech_segments():
    matrix = assemble_dataset([_subject()], "audio", ["G", "A", "F"])
    assert matrix.modalities == ("A", "F", "G")
    assert [row.audio_label for row in matrix.rows] == ["calm", "pleased"]
    assert [row.video_label for row in matrix.rows] == ["neutral", "neutral"]
    assert matrix.features().shape == (2, 1031 + 512 + 228)
    assert matrix.schema["widths"] == {"A": 1031, "F": 512, "G": 228}
    assert len(matrix.schema["columns"]) == 1771
    assert matrix.retention["fraction"] == 1.0


def test_rows_missing_a_block_are_dropped_and_counted():
    subject = _subject()
    del subject.audio_features[1]
    matrix = assemble_dataset([subject], "audio", ["A", "G"])
    assert [row.audio_label for row in matrix.rows] == ["calm"]
    assert matrix.retention["missing_A"] == 1.0
    assert matrix.retention["fraction"] == 0.5


def test_video_rows_split_by_speaking_status():
    subject = _subject(frame_label="happy")
    counts = {f: len(assemble_dataset([subject], "video", ["F"], f)) for f in ("all", "speech", "silence")}
    assert counts == {"all": 150, "speech": 101, "silence": 49}


def test_video_rows_carry_segment_audio_label():
    matrix = assemble_dataset([_subject(n_frames=25, frame_label="happy")], "video", ["A", "F"])
    assert set(matrix.labels()) == {"happy"}
    assert {row.audio_label for row in matrix.rows} == {"calm"}
    assert matrix.features().shape == (25, 1031 + 256)


def test_wrong_block_width_is_a_schema_mismatch():
    subject = _subject()
    subject.audio_features[0] = np.zeros(1000)
    with pytest.raises(SchemaMismatchError):
        assemble_dataset([subject], "audio", ["A"])


def test_bad_requests_are_rejected():
    with pytest.raises(SyncError):
        assemble_dataset([_subject()], "text", ["A"])
    with pytest.raises(SyncError):
        assemble_dataset([_subject()], "audio", ["A", "X"])
    with pytest.raises(SyncError):
        assemble_dataset([_subject()], "audio", [])


def test_empty_matrix_keeps_its_width():
    matrix = assemble_dataset([_subject()], "audio", ["A", "F"], "silence")
    assert matrix.features().shape == (0, 1031 + 512)


@pytest.mark.parametrize(
    "label_type, pooling, width",
    [("audio", "mean_sd", 1771), ("audio", "central", 1031 + 768 + 228), ("video", "mean_sd", 1031 + 256 + 228)],
)
def test_expected_width(label_type, pooling, width):
    assert expected_width(label_type, "AFG", pooling) == width
