"""
Pipeline configuration schema validation shared by the CLI and the library.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from .label_sets import CHANNEL_LABELS, COUNTRIES, MODALITY_ORDER, WHOLE


class ConfigValidationError(ValueError):
    """Raised when a pipeline config is missing required data or is malformed."""


@dataclass(frozen=True)
class ConfigConstraints:
    """Enumerations and fixed limits as simple dataclass constants."""

    eye_models: tuple = ("subtract", "rotation")
    bandwidth_rules: tuple = ("nn_median", "knn_quantile")
    weight_formulas: tuple = ("repaired", "literal")
    face_poolings: tuple = ("mean_sd", "central")
    bky_groupings: tuple = ("test_country", "label_and_country", "all")
    label_types: tuple = ("audio", "video")
    log_levels: tuple = ("DEBUG", "INFO", "WARNING", "ERROR")
    prior_tolerance: float = 1e-6


SECTIONS = (
    "seed",
    "paths",
    "logging",
    "synth",
    "annotations",
    "trajectories",
    "attention",
    "sync",
    "enrichment",
    "train",
    "evaluation",
    "experiments",
)


def load_and_validate_config(path: Path) -> Dict[str, Any]:
    """
    Load a JSON pipeline config and validate it against the expected schema.

    Returns a normalized dictionary with defaults applied. Relative
    ``paths`` entries are resolved against the directory holding the file.
    """
    path = Path(path)
    try:
        contents = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigValidationError(f"Config file not found: {path}") from exc
    except OSError as exc:
        raise ConfigValidationError(f"Unable to read config: {path}") from exc

    try:
        raw = json.loads(contents)
    except json.JSONDecodeError as exc:
        raise ConfigValidationError(f"Config is not valid JSON: {exc}") from exc

    return validate_config(raw, base_dir=path.resolve().parent)


def validate_config(raw: Any, *, base_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Validate an already-parsed config object; see ``load_and_validate_config``."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigValidationError("Config root must be a JSON object.")
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigValidationError(f"unknown config sections {unknown}; expected some of {list(SECTIONS)}.")

    constraints = ConfigConstraints()
    base = base_dir or Path.cwd()

    normalized = {
        "seed": _require_int(raw.get("seed"), field="seed", default=0, minimum=0),
        "paths": _validate_paths(_section(raw, "paths"), base),
        "logging": _validate_logging(_section(raw, "logging"), constraints),
        "synth": _validate_synth(_section(raw, "synth"), constraints),
        "annotations": _validate_annotations(_section(raw, "annotations")),
        "trajectories": _validate_trajectories(_section(raw, "trajectories"), constraints),
        "attention": _validate_attention(_section(raw, "attention"), constraints),
        "sync": _validate_sync(_section(raw, "sync"), constraints),
        "enrichment": _validate_enrichment(_section(raw, "enrichment")),
        "train": _validate_train(_section(raw, "train")),
        "evaluation": _validate_evaluation(_section(raw, "evaluation"), constraints),
        "experiments": _validate_experiments(_section(raw, "experiments"), constraints),
    }
    return normalized


def _section(raw: Mapping[str, Any], name: str) -> Dict[str, Any]:
    value = raw.get(name)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigValidationError(f"{name} must be a JSON object.")
    return value


def _validate_paths(section: Mapping[str, Any], base: Path) -> Dict[str, str]:
    out = {}
    for key, default in (("corpus", "corpus"), ("work", "work")):
        value = _require_string(section.get(key, default), field=f"paths.{key}", required=True)
        path = Path(value)
        out[key] = str(path if path.is_absolute() else (base / path))
    return out


def _validate_logging(section: Mapping[str, Any], constraints: ConfigConstraints) -> Dict[str, Any]:
    level = _require_string(section.get("level", "INFO"), field="logging.level", required=True).upper()
    _require_choice(level, constraints.log_levels, field="logging.level")
    log_file = section.get("file")
    if log_file is not None:
        log_file = _require_string(log_file, field="logging.file", required=True)
    return {"level": level, "file": log_file}


def _validate_priors(value: Any, *, field: str, vocabulary: Sequence[str], tolerance: float) -> Optional[Dict[str, float]]:
    if value is None:
        return None
    if not isinstance(value, dict) or not value:
        raise ConfigValidationError(f"{field} must be a non-empty object of label: probability.")
    priors = {}
    for label, p in value.items():
        _require_choice(label, vocabulary, field=f"{field} label")
        priors[label] = _require_float(p, field=f"{field}.{label}", minimum=0.0)
    total = sum(priors.values())
    if abs(total - 1.0) > tolerance:
        raise ConfigValidationError(f"{field} must sum to 1, got {total:.6f}.")
    return priors


def _validate_synth(section: Mapping[str, Any], constraints: ConfigConstraints) -> Dict[str, Any]:
    out: Dict[str, Any] = dict(section)
    countries = section.get("countries")
    if countries is not None:
        if not isinstance(countries, dict):
            raise ConfigValidationError("synth.countries must be an object of country: subject count.")
        for country, count in countries.items():
            _require_choice(country, COUNTRIES, field="synth.countries")
            _require_int(count, field=f"synth.countries.{country}", minimum=0)
    for key, label_type in (("audio_priors", "audio"), ("video_priors", "video")):
        priors = _validate_priors(
            section.get(key),
            field=f"synth.{key}",
            vocabulary=CHANNEL_LABELS[label_type],
            tolerance=constraints.prior_tolerance,
        )
        if priors is not None:
            out[key] = priors
    for key in ("effect_audio", "effect_video"):
        if key in section:
            out[key] = _require_float(section[key], field=f"synth.{key}", minimum=0.0)
    if "session_ms" in section:
        out["session_ms"] = _require_int(section["session_ms"], field="synth.session_ms", minimum=1)
    return out


def _validate_annotations(section: Mapping[str, Any]) -> Dict[str, Any]:
    return {
        "majority_fraction": _require_float(section.get("majority_fraction", 0.5), field="annotations.majority_fraction", minimum=0.0),
        "avatar_max_fraction": _require_float(section.get("avatar_max_fraction", 1.0 / 3.0), field="annotations.avatar_max_fraction", minimum=0.0),
    }


def _validate_trajectories(section: Mapping[str, Any], constraints: ConfigConstraints) -> Dict[str, Any]:
    out = {
        "median_width": _require_int(section.get("median_width", 5), field="trajectories.median_width", minimum=1),
        "max_eye_deg": _require_float(section.get("max_eye_deg", 40.0), field="trajectories.max_eye_deg", minimum=0.0, strict=True),
        "max_eye_speed": _require_float(section.get("max_eye_speed", 860.0), field="trajectories.max_eye_speed", minimum=0.0, strict=True),
        "max_head_speed": _require_float(section.get("max_head_speed", 700.0), field="trajectories.max_head_speed", minimum=0.0, strict=True),
        "window_ms": _require_int(section.get("window_ms", 1500), field="trajectories.window_ms", minimum=1),
        "center_stride_ms": _require_int(section.get("center_stride_ms", 500), field="trajectories.center_stride_ms", minimum=1),
        "min_span_ms": _require_int(section.get("min_span_ms", 500), field="trajectories.min_span_ms", minimum=0),
        "max_invalid": _require_float(section.get("max_invalid", 0.5), field="trajectories.max_invalid", minimum=0.0),
        "eye_model": _require_choice(section.get("eye_model", "subtract"), constraints.eye_models, field="trajectories.eye_model"),
    }
    if out["window_ms"] < out["min_span_ms"]:
        raise ConfigValidationError(
            f"trajectories.window_ms ({out['window_ms']}) must be at least min_span_ms ({out['min_span_ms']})."
        )
    return out


def _validate_attention(section: Mapping[str, Any], constraints: ConfigConstraints) -> Dict[str, Any]:
    bandwidth = section.get("bandwidth")
    if bandwidth is not None:
        bandwidth = _require_float(bandwidth, field="attention.bandwidth", minimum=0.0, strict=True)
    return {
        "bandwidth": bandwidth,
        "bandwidth_rule": _require_choice(section.get("bandwidth_rule", "nn_median"), constraints.bandwidth_rules, field="attention.bandwidth_rule"),
        "weight_formula": _require_choice(section.get("weight_formula", "repaired"), constraints.weight_formulas, field="attention.weight_formula"),
        "prefilter_iqr_factor": _require_float(section.get("prefilter_iqr_factor", 3.0), field="attention.prefilter_iqr_factor", minimum=0.0, strict=True),
    }


def _validate_sync(section: Mapping[str, Any], constraints: ConfigConstraints) -> Dict[str, Any]:
    return {
        "face_pooling": _require_choice(section.get("face_pooling", "mean_sd"), constraints.face_poolings, field="sync.face_pooling"),
    }


def _validate_enrichment(section: Mapping[str, Any]) -> Dict[str, Any]:
    heads = section.get("heads")
    if heads is not None:
        if not isinstance(heads, list) or not heads:
            raise ConfigValidationError("enrichment.heads must be a non-empty list of head objects.")
        for i, head in enumerate(heads):
            if not isinstance(head, dict):
                raise ConfigValidationError(f"enrichment.heads[{i}] must be an object.")
            _require_string(head.get("name"), field=f"enrichment.heads[{i}].name", required=True)
            _require_choice(head.get("channel"), tuple(CHANNEL_LABELS), field=f"enrichment.heads[{i}].channel")
            if not isinstance(head.get("groups"), dict) or len(head["groups"]) < 2:
                raise ConfigValidationError(f"enrichment.heads[{i}].groups must map at least two classes to label lists.")
    return {
        "steps": _require_int(section.get("steps", 5000), field="enrichment.steps", minimum=1),
        "target_width": _require_int(section.get("target_width", 1031), field="enrichment.target_width", minimum=1),
        "heads": heads,
    }


def _validate_train(section: Mapping[str, Any]) -> Dict[str, Any]:
    candidates = section.get("candidates", ["100-20"])
    if not isinstance(candidates, list) or not candidates:
        raise ConfigValidationError("train.candidates must be a non-empty list of architectures.")
    steps = section.get("steps")
    if steps is not None:
        steps = _require_int(steps, field="train.steps", minimum=1)
    return {
        "learning_rate": _require_float(section.get("learning_rate", 1e-4), field="train.learning_rate", minimum=0.0, strict=True),
        "batch_size": _require_int(section.get("batch_size", 64), field="train.batch_size", minimum=1),
        "epochs": _require_int(section.get("epochs", 100), field="train.epochs", minimum=1),
        "budget": _require_int(section.get("budget", 7500), field="train.budget", minimum=1),
        "dropout": _require_float(section.get("dropout", 0.5), field="train.dropout", minimum=0.0),
        "arch": _require_string(section.get("arch", "100-20"), field="train.arch", required=True),
        "candidates": [_require_string(c, field="train.candidates", required=True) for c in candidates],
        "steps": steps,
    }


def _validate_evaluation(section: Mapping[str, Any], constraints: ConfigConstraints) -> Dict[str, Any]:
    return {
        "folds": _require_int(section.get("folds", 10), field="evaluation.folds", minimum=2),
        "runs": _require_int(section.get("runs", 3), field="evaluation.runs", minimum=1),
        "validation_fraction": _require_float(section.get("validation_fraction", 0.1), field="evaluation.validation_fraction", minimum=0.0, strict=True),
        "q": _require_float(section.get("q", 0.05), field="evaluation.q", minimum=0.0, strict=True),
        "bky_grouping": _require_choice(section.get("bky_grouping", "test_country"), constraints.bky_groupings, field="evaluation.bky_grouping"),
    }


def _validate_experiments(section: Mapping[str, Any], constraints: ConfigConstraints) -> Dict[str, Any]:
    out: Dict[str, Any] = dict(section)
    label_types = section.get("label_types", list(constraints.label_types))
    out["label_types"] = [_require_choice(t, constraints.label_types, field="experiments.label_types") for t in _require_list(label_types, field="experiments.label_types")]
    countries = section.get("countries", list(COUNTRIES) + [WHOLE])
    out["countries"] = [_require_choice(c, COUNTRIES + (WHOLE,), field="experiments.countries") for c in _require_list(countries, field="experiments.countries")]
    modality_sets = section.get("modality_sets")
    if modality_sets is not None:
        for text in _require_list(modality_sets, field="experiments.modality_sets"):
            parts = [p.strip().upper() for p in _require_string(text, field="experiments.modality_sets", required=True).replace(",", "+").split("+") if p.strip()]
            bad = sorted(set(parts) - set(MODALITY_ORDER))
            if bad or not parts:
                raise ConfigValidationError(f"experiments.modality_sets entry {text!r} must combine {list(MODALITY_ORDER)}.")
    for key in ("cross_country", "speaking_regimes"):
        if key in section and not isinstance(section[key], bool):
            raise ConfigValidationError(f"experiments.{key} must be true or false.")
    return out


def _require_list(value: Any, *, field: str) -> List[Any]:
    if not isinstance(value, list) or not value:
        raise ConfigValidationError(f"{field} must be a non-empty list.")
    return value


def _require_choice(value: Any, allowed: Sequence[str], *, field: str) -> str:
    if not isinstance(value, str) or value not in allowed:
        raise ConfigValidationError(f"{field} must be one of: {', '.join(allowed)}; got {value!r}.")
    return value


def _require_string(value: Any, *, field: str, required: bool) -> str:
    if value is None:
        if required:
            raise ConfigValidationError(f"{field} is required.")
        return ""
    if not isinstance(value, str):
        raise ConfigValidationError(f"{field} must be a string.")
    stripped = value.strip()
    if required and stripped == "":
        raise ConfigValidationError(f"{field} must be a non-empty string.")
    return stripped


def _require_int(value: Any, *, field: str, default: Optional[int] = None, minimum: Optional[int] = None) -> int:
    if value is None:
        if default is None:
            raise ConfigValidationError(f"{field} is required.")
        return default
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigValidationError(f"{field} must be an integer.")
    if minimum is not None and value < minimum:
        raise ConfigValidationError(f"{field} must be at least {minimum}, got {value}.")
    return value


def _require_float(value: Any, *, field: str, minimum: Optional[float] = None, strict: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(f"{field} must be a number.")
    number = float(value)
    if minimum is not None and (number < minimum or (strict and number == minimum)):
        relation = "greater than" if strict else "at least"
        raise ConfigValidationError(f"{field} must be {relation} {minimum}, got {value}.")
    return number
