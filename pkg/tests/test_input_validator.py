import shutil

import pytest

from core.input_validator import (
    check_annotations,
    check_frames,
    check_subjects,
    check_trajectory,
    validate_corpus,
    validate_inputs,
)


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def corpus_copy(tmp_path, small_corpus):
    target = tmp_path / "corpus"
    shutil.copytree(small_corpus, target)
    return target


def test_shuffled_header_is_reported_on_line_one(tmp_path):
    path = _write(tmp_path / "annotations" / "SP01.csv", "channel,rater_id,start_ms,end_ms,label\naudio,r1,0,3000,calm\n")
    report = check_annotations(path)
    assert len(report.violations) == 1
    violation = report.violations[0]
    assert violation.line == 1
    assert "column order differs" in violation.message


def test_unknown_label_names_its_line(tmp_path):
    text = "rater_id,channel,start_ms,end_ms,label\nr1,audio,0,3000,calm\nr1,audio,3000,6000,furious\n"
    report = check_annotations(_write(tmp_path / "a.csv", text))
    assert [v.line for v in report.violations] == [3]
    assert "furious" in report.violations[0].message


def test_reversed_event_interval_is_reported(tmp_path):
    text = "rater_id,channel,start_ms,end_ms,label\nr1,valence,3000,1000,positive\n"
    report = check_annotations(_write(tmp_path / "a.csv", text))
    assert [v.line for v in report.violations] == [2]


def test_frames_need_an_fps_line(tmp_path):
    text = "subject_id,frame_idx,label_rater_a,label_rater_b\nSP01,0,,\n"
    report = check_frames(_write(tmp_path / "f.csv", text))
    assert report.violations[0].line == 1
    assert "#fps=" in report.violations[0].message


def test_frame_labels_are_checked_after_the_fps_line(tmp_path):
    text = "#fps=25\nsubject_id,frame_idx,label_rater_a,label_rater_b\nSP01,0,,\nSP01,1,happy,bored\n"
    report = check_frames(_write(tmp_path / "f.csv", text), "SP01")
    assert [v.line for v in report.violations] == [4]
    assert report.row_counts[str(tmp_path / "f.csv")] == 2


def test_non_increasing_timestamps_are_reported(tmp_path):
    header = "subject_id,frame_idx,t_ms,gaze_x,gaze_y,head_yaw,head_pitch,head_roll,origin_x,origin_y,origin_z,plane_x,plane_y,detected\n"
    rows = "SP01,0,0,0,0,0,0,0,0,0,600,0,0,1\nSP01,1,40,0,0,0,0,0,0,0,600,0,0,1\nSP01,2,40,0,0,0,0,0,0,0,600,0,0,1\n"
    report = check_trajectory(_write(tmp_path / "t.csv", header + rows))
    assert [v.line for v in report.violations] == [4]


def test_invalid_utf8_is_reported(tmp_path):
    path = tmp_path / "subjects.csv"
    path.write_bytes(b"subject_id,country,session_ms,glasses\nSP\xff01,SP,6000,0\n")
    report = check_subjects(path)
    assert report.violations[0].line == 2
    assert "UTF-8" in report.violations[0].message


def test_bad_subject_rows(tmp_path):
    text = "subject_id,country,session_ms,glasses\nSP01,SP,6000,0\nSP01,DE,six,3\n"
    report = check_subjects(_write(tmp_path / "subjects.csv", text))
    assert {v.line for v in report.violations} == {3}
    assert len(report.violations) == 4


def test_missing_required_file_is_reported(corpus_copy):
    (corpus_copy / "face" / "NO02.csv").unlink()
    report = validate_corpus(corpus_copy)
    assert len(report.violations) == 1
    assert "has no face file" in report.violations[0].message


def test_missing_avatar_file_is_allowed(corpus_copy):
    (corpus_copy / "avatar" / "SP01.csv").unlink()
    assert validate_corpus(corpus_copy).ok


def test_stray_file_is_reported(corpus_copy):
    shutil.copy(corpus_copy / "embeddings" / "SP01.csv", corpus_copy / "embeddings" / "XX99.csv")
    report = validate_corpus(corpus_copy)
    assert [v.path.name for v in report.violations] == ["XX99.csv"]


def test_validate_inputs_accepts_single_files(small_corpus):
    report = validate_inputs([small_corpus / "annotations" / "SP01.csv", small_corpus / "subjects.csv"])
    assert report.ok
    assert len(report.row_counts) == 2


def test_validate_inputs_rejects_unknown_paths(tmp_path):
    report = validate_inputs(tmp_path / "nowhere.csv")
    assert not report.ok
    assert report.violations[0].line == 0
