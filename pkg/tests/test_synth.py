from fractions import Fraction

import numpy as np
import pytest

from core import feature_store
from core.annotations import agreement_summary, audio_rater_tracks
from core.digest import digest_tree
from core.feature_store import CorpusLayout
from core.input_validator import validate_corpus
from core.synth import SynthSpecError, SyntheticSpec, spec_from_dict, synth_corpus


def test_same_seed_gives_identical_files(tmp_path, small_spec):
    synth_corpus(small_spec, tmp_path / "a")
    synth_corpus(small_spec, tmp_path / "b")
    assert digest_tree(tmp_path / "a") == digest_tree(tmp_path / "b")


def test_different_seed_changes_the_corpus(tmp_path, small_spec):
    synth_corpus(small_spec, tmp_path / "a")
    other = SyntheticSpec(countries=dict(small_spec.countries), session_ms=small_spec.session_ms, seed=4)
    synth_corpus(other, tmp_path / "b")
    assert digest_tree(tmp_path / "a") != digest_tree(tmp_path / "b")


def test_generated_corpus_passes_validation(small_corpus):
    report = validate_corpus(small_corpus)
    assert report.ok, [str(v) for v in report.violations]


def test_subjects_file_lists_every_subject(small_corpus, small_spec):
    subjects = feature_store.read_subjects(CorpusLayout(small_corpus).subjects_csv)
    assert [s.subject_id for s in subjects] == ["SP01", "SP02", "FR01", "FR02", "NO01", "NO02"]
    assert {s.session_ms for s in subjects} == {small_spec.session_ms}
    assert all(s.glasses in (0, 1, 2) for s in subjects)


def test_trajectory_covers_the_session(small_corpus, small_spec):
    trajectory = feature_store.read_trajectory(CorpusLayout(small_corpus).trajectory("FR01"))
    assert len(trajectory) == small_spec.n_frames == 300
    assert np.all(np.diff(trajectory.t_ms) > 0)


def test_raters_agree_perfectly_without_disagreement(tmp_path):
    spec = SyntheticSpec(countries={"SP": 1}, session_ms=9_000, speech_fraction=1.0, disagreement_rate=0.0, seed=5)
    synth_corpus(spec, tmp_path)
    layout = CorpusLayout(tmp_path)
    events = feature_store.read_annotations(layout.annotations("SP01"))
    assert agreement_summary(audio_rater_tracks(events, spec.session_ms))["mean"] == 1.0
    _, rater_a, rater_b = feature_store.read_frame_labels(layout.frames("SP01"))
    assert rater_a == rater_b


@pytest.mark.parametrize(
    "changes",
    [
        {"countries": {"DE": 3}},
        {"session_ms": 2500},
        {"audio_priors": {"calm": 0.5, "pleased": 0.4}},
        {"video_priors": {"furious": 1.0}},
        {"disagreement_rate": 1.5},
        {"episode_min_s": 5, "episode_max_s": 3},
    ],
)
def test_unrealisable_settings_are_rejected(changes):
    with pytest.raises(SynthSpecError):
        SyntheticSpec(**changes)


def test_spec_from_dict_parses_rational_fps_and_seed():
    spec = spec_from_dict({"fps": "30000/1001", "session_ms": 6000, "seed": 1}, seed=9)
    assert spec.fps == Fraction(30000, 1001)
    assert spec.seed == 9
    assert spec.n_frames == 179


def test_spec_from_dict_rejects_unknown_keys():
    with pytest.raises(SynthSpecError):
        spec_from_dict({"subjects": 4})
