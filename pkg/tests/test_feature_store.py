from fractions import Fraction

import numpy as np
import pytest

from core import feature_store
from core.feature_store import CorpusLayout, WorkLayout, matrix_name
from core.sync import SchemaMismatchError, SubjectStreams, assemble_dataset
from shared.records import AudioSegment, FeatureWindow, FrameLabelTrack


def test_reader_names_missing_columns(tmp_path):
    path = tmp_path / "subjects.csv"
    path.write_text("subject_id,country,session_ms\nSP01,SP,6000\n", encoding="utf-8")
    with pytest.raises(SchemaMismatchError) as info:
        feature_store.read_subjects(path)
    assert info.value.missing == ["glasses"]


def test_frame_labels_keep_rational_fps_and_blanks(tmp_path):
    path = tmp_path / "frames.csv"
    feature_store.write_frame_labels(path, "SP01", Fraction(30000, 1001), ["", "happy"], ["", "pensive"])
    assert path.read_text(encoding="utf-8").splitlines()[0] == "#fps=30000/1001"
    fps, rater_a, rater_b = feature_store.read_frame_labels(path)
    assert fps == Fraction(30000, 1001)
    assert rater_a == ["", "happy"]
    assert rater_b == ["", "pensive"]


def test_face_rows_absent_from_file_read_as_nan(tmp_path):
    path = tmp_path / "face.csv"
    feature_store.write_face(path, "SP01", [0, 2], np.ones((2, 256)))
    face = feature_store.read_face(path, 4)
    assert face.shape == (4, 256)
    assert np.isfinite(face[[0, 2]]).all()
    assert np.isnan(face[[1, 3]]).all()


def test_vad_gold_blank_cells_mean_no_label(tmp_path):
    path = tmp_path / "vad.csv"
    feature_store.write_vad_gold(path, "SP01", {"valence": ["positive", None]}, 2)
    vad = feature_store.read_vad_gold(path)
    assert vad["valence"] == ["positive", None]
    assert vad["arousal"] == [None, None]
    assert feature_store.read_vad_gold(tmp_path / "absent.csv") == {}


def test_window_read_back_clips_start_at_zero(tmp_path):
    path = tmp_path / "windows" / "SP01.csv"
    feature_store.write_window_features(path, "SP01", [0, 500, 1000], np.zeros((3, 228)), window_ms=1500)
    sidecar = feature_store.read_json(feature_store.sidecar_path(path))
    assert sidecar["names"]["f_0"].startswith("gaze_")
    assert sidecar["names"]["f_227"] == "glasses_flag"
    assert sidecar["window_ms"] == 1500
    windows, vectors = feature_store.read_window_features(path)
    assert [(w.start_ms, w.end_ms) for w in windows] == [(0, 750), (0, 1250), (250, 1750)]
    assert vectors.shape == (3, 228)


def test_window_read_back_clips_end_at_the_video_end(tmp_path):
    path = tmp_path / "windows" / "SP01.csv"
    vectors = np.zeros((3, 228))
    feature_store.write_window_features(path, "SP01", [500, 1000, 1500], vectors, window_ms=1500, video_bounds_ms=(0.0, 2000.0))
    sidecar = feature_store.read_json(feature_store.sidecar_path(path))
    assert (sidecar["video_start_ms"], sidecar["video_end_ms"]) == (0.0, 2000.0)
    windows, _ = feature_store.read_window_features(path)
    assert [(w.start_ms, w.end_ms) for w in windows] == [(0, 1250), (250, 1750), (750, 2000)]
    assert windows[-1].span_ms == 1250


def test_embeddings_read_back_bit_for_bit(tmp_path):
    path = tmp_path / "SP01_embeddings.csv"
    values = np.random.default_rng(11).normal(size=(3, 1024)) * np.array([1e-9, 1.0, 1e6])[:, None]
    feature_store.write_embeddings(path, "SP01", [0, 1, 2], values)
    restored = feature_store.read_embeddings(path)
    assert all(np.array_equal(restored[i], values[i]) for i in range(3))


def test_matrix_file_restores_rows_and_schema(tmp_path):
    segments = [AudioSegment("FR01", 0, 0, 3000, "calm"), AudioSegment("FR01", 1, 1000, 4000, "puzzled")]
    subject = SubjectStreams(
        subject_id="FR01",
        country="FR",
        segments=segments,
        frames=FrameLabelTrack("FR01", 25, ["discarded"] * 100),
        audio_features={0: np.arange(1031.0), 1: -np.arange(1031.0)},
        gaze_windows=[FeatureWindow("FR01", 1500, 1500, 750, 2250, (), 1.0), FeatureWindow("FR01", 2500, 1500, 1750, 3250, (), 1.0)],
        gaze_vectors=np.vstack([np.zeros(228), np.ones(228)]),
    )
    matrix = assemble_dataset([subject], "audio", ["A", "G"])
    path = WorkLayout(tmp_path).matrix(matrix_name("audio", matrix.modalities, "all"))
    feature_store.write_matrix(path, matrix)
    assert path.name == "audio_A+G_all.csv"

    restored = feature_store.read_matrix(path)
    assert restored.modalities == ("A", "G")
    assert restored.labels().tolist() == ["calm", "puzzled"]
    assert [row.video_label for row in restored.rows] == [None, None]
    assert np.array_equal(restored.features(), matrix.features())
    assert restored.retention == matrix.retention


def test_matrix_width_must_match_its_columns(tmp_path):
    segments = [AudioSegment("FR01", 0, 0, 3000, "calm")]
    subject = SubjectStreams("FR01", "FR", segments, audio_features={0: np.zeros(1031)})
    matrix = assemble_dataset([subject], "audio", ["A"])
    matrix.schema["columns"] = matrix.schema["columns"][:-1]
    with pytest.raises(SchemaMismatchError):
        feature_store.write_matrix(tmp_path / "m.csv", matrix)


def test_layouts_place_files_per_kind(tmp_path):
    corpus = CorpusLayout(tmp_path)
    work = WorkLayout(tmp_path / "work")
    assert corpus.trajectory("SP01") == tmp_path / "trajectories" / "SP01.csv"
    assert work.distribution_csv("video") == tmp_path / "work" / "gold" / "distribution_video.csv"
    assert work.report("audio-A-WH").parent == work.reports_dir
