import json
from pathlib import Path

import pytest

from core.settings import build_pipeline_config, load_pipeline_config
from shared.config_schema import ConfigValidationError, load_and_validate_config, validate_config

EXAMPLE_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "example.json"


def _config(**sections):
    return build_pipeline_config(validate_config(sections, base_dir=Path("/base")))


def test_defaults_apply_without_a_file():
    config = load_pipeline_config()
    assert config.seed == 0
    assert config.evaluation.folds == 10
    assert config.evaluation.validation_fraction == 0.1
    assert config.train.arch == "100-20"
    assert config.trajectories.median_width == 5
    assert config.attention.bandwidth is None
    assert len(config.enrichment.heads) == 4


def test_example_config_loads():
    config = load_pipeline_config(EXAMPLE_CONFIG)
    assert config.seed == 7
    assert config.evaluation.folds == 5
    assert config.train.budget == 640
    assert config.corpus_dir.is_absolute()
    assert config.corpus_dir.resolve() == (EXAMPLE_CONFIG.parent.parent / "runs" / "corpus").resolve()


def test_relative_paths_resolve_against_the_config_file(tmp_path):
    path = tmp_path / "conf" / "run.json"
    path.parent.mkdir()
    path.write_text(json.dumps({"paths": {"corpus": "data", "work": "/abs/work"}}), encoding="utf-8")
    normalized = load_and_validate_config(path)
    assert normalized["paths"]["corpus"] == str(tmp_path / "conf" / "data")
    assert normalized["paths"]["work"] == "/abs/work"


def test_seed_override_wins():
    assert load_pipeline_config(EXAMPLE_CONFIG, seed=11).seed == 11


def test_dropout_above_the_safe_bound_is_clamped(warnings_logged):
    config = _config(train={"dropout": 0.95})
    assert config.train.dropout == 0.9
    assert any("train.dropout" in m for m in warnings_logged)


def test_validation_fraction_is_clamped(warnings_logged):
    assert _config(evaluation={"validation_fraction": 0.8}).evaluation.validation_fraction == 0.5
    assert any("evaluation.validation_fraction" in m for m in warnings_logged)


def test_even_median_width_is_widened(warnings_logged):
    assert _config(trajectories={"median_width": 6}).trajectories.median_width == 7
    assert any("even" in m for m in warnings_logged)


def test_unknown_architecture_falls_back(warnings_logged):
    config = _config(train={"arch": "3-layer", "candidates": ["S", "100-20"]})
    assert config.train.arch == "100-20"
    assert any("3-layer" in m for m in warnings_logged)


def test_custom_heads_are_parsed():
    heads = [
        {"name": "valence", "channel": "valence", "groups": {"neg": ["negative"], "pos": ["positive"]}, "output": "logits"},
    ]
    config = _config(enrichment={"heads": heads, "target_width": 1026})
    assert [h.name for h in config.enrichment.heads] == ["valence"]
    assert config.enrichment.target_width == 1026


def test_metadata_records_design_choices():
    metadata = _config(attention={"weight_formula": "literal"}).metadata()
    assert metadata["weight_formula"] == "literal"
    assert metadata["eye_model"] == "subtract"


@pytest.mark.parametrize(
    "raw, fragment",
    [
        ({"plugins": {}}, "unknown config sections"),
        ({"seed": -1}, "seed"),
        ({"seed": True}, "seed must be an integer"),
        ({"synth": {"audio_priors": {"calm": 0.5, "pleased": 0.2}}}, "must sum to 1"),
        ({"synth": {"countries": {"DE": 3}}}, "synth.countries"),
        ({"trajectories": {"eye_model": "lens"}}, "trajectories.eye_model"),
        ({"trajectories": {"window_ms": 400, "min_span_ms": 500}}, "at least min_span_ms"),
        ({"attention": {"bandwidth": 0}}, "attention.bandwidth"),
        ({"train": {"candidates": []}}, "train.candidates"),
        ({"evaluation": {"folds": 1}}, "evaluation.folds"),
        ({"experiments": {"modality_sets": ["A+T"]}}, "experiments.modality_sets"),
        ({"experiments": {"cross_country": "yes"}}, "cross_country"),
        ({"logging": {"level": "LOUD"}}, "logging.level"),
    ],
)
def test_invalid_configs_are_rejected(raw, fragment):
    with pytest.raises(ConfigValidationError, match=fragment):
        validate_config(raw)


def test_invalid_json_is_rejected(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\"seed\": 1,", encoding="utf-8")
    with pytest.raises(ConfigValidationError, match="not valid JSON"):
        load_pipeline_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigValidationError, match="not found"):
        load_pipeline_config(tmp_path / "absent.json")


def test_root_must_be_an_object():
    with pytest.raises(ConfigValidationError):
        validate_config([1, 2])
