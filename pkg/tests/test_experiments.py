import pytest

from core.experiments import (
    all_modality_sets,
    build_matrix,
    default_budget,
    default_epochs,
    experiment_name,
    parse_modalities,
)


def test_seven_modality_sets_in_canonical_order():
    sets = all_modality_sets()
    assert len(sets) == 7
    assert sets[0] == ("A",) and sets[-1] == ("A", "F", "G")


@pytest.mark.parametrize("text, expected", [("G+A", ("A", "G")), ("a,f", ("A", "F")), (" F ", ("F",))])
def test_parse_modalities(text, expected):
    assert parse_modalities(text) == expected


def test_parse_modalities_rejects_unknown():
    with pytest.raises(ValueError):
        parse_modalities("A+T")
    with pytest.raises(ValueError):
        parse_modalities("")


def test_budgets_and_epochs():
    assert default_budget("audio", "SP") == 5418
    assert default_budget("audio", "NO") == 234
    assert default_budget("video", "FR") == 7500
    assert default_budget("audio", "FR", {"audio": 640}) == 640
    assert default_budget("audio", "FR", {"audio": {"FR": 100, "WH": 300}}) == 100
    assert default_budget("audio", "SP", {"audio": {"FR": 100, "WH": 300}}) == 300
    assert default_epochs("audio", "NO") == 200
    assert default_epochs("video", "NO") == 100
    assert default_epochs("video", "NO", {"default": 5}) == 5
    assert default_epochs("audio", "SP", {"audio:SP": 7, "default": 5}) == 7


def test_experiment_names():
    assert experiment_name("audio", ("A", "F"), "WH", "WH", "all", "all") == "audio-A+F-WH"
    assert experiment_name("audio", ("A",), "WH", "SP", "all", "all") == "audio-A-WH-to-SP"
    assert experiment_name("video", ("G",), "FR", "FR", "speech", "silence") == "video-G-FR-speech-to-silence"


def test_full_experiment_matrix():
    specs = build_matrix({})
    assert len(specs) == 7 * 7 + 7 * (7 + 4 * 3 * 2 + 3 * 3 * 2)
    assert len({s.name for s in specs}) == len(specs)
    audio = [s for s in specs if s.label_type == "audio"]
    assert all((s.train_speaking, s.test_speaking) == ("all", "all") for s in audio)


def test_configured_experiment_matrix():
    specs = build_matrix(
        {
            "label_types": ["audio"],
            "modality_sets": ["A", "A+F"],
            "countries": ["SP", "WH"],
            "cross_country": True,
            "budgets": {"audio": 640},
        }
    )
    assert [s.name for s in specs] == [
        "audio-A-SP",
        "audio-A-WH",
        "audio-A-WH-to-SP",
        "audio-A+F-SP",
        "audio-A+F-WH",
        "audio-A+F-WH-to-SP",
    ]
    assert {s.budget for s in specs} == {640}
    assert specs[0].epochs == 100


def test_speaking_regimes_also_run_from_the_whole_corpus():
    specs = build_matrix({"label_types": ["video"], "modality_sets": ["F"]})
    regimes = [s for s in specs if (s.train_speaking, s.test_speaking) != ("all", "all")]
    whole_to_country = [s for s in regimes if s.train_country == "WH" and s.test_country != "WH"]
    assert len(regimes) == 4 * 3 * 2 + 3 * 3 * 2
    assert len(whole_to_country) == 18
    assert {s.test_country for s in whole_to_country} == {"SP", "FR", "NO"}
    assert "video-F-WH-to-SP-speech-to-silence" in {s.name for s in whole_to_country}


def test_whole_to_country_regimes_need_cross_country():
    specs = build_matrix({"label_types": ["video"], "modality_sets": ["F"], "cross_country": False})
    regimes = [s for s in specs if (s.train_speaking, s.test_speaking) != ("all", "all")]
    assert len(regimes) == 4 * 3 * 2
    assert all(s.train_country == s.test_country for s in specs)
