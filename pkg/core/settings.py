"""
Typed pipeline settings built from a validated config.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from affectfuse.affectfuse import logger as app_logger
from shared.config_schema import load_and_validate_config, validate_config

from .classifier import ARCH_ALIASES, ARCHITECTURES, TrainConfig
from .enrichment import DEFAULT_HEADS, HeadSpec, head_from_dict

_LOGGER = app_logger.get_logger()

_MIN_MAJORITY_FRACTION = 0.01
_MAX_DROPOUT = 0.9
_MIN_VALIDATION_FRACTION = 0.05
_MAX_VALIDATION_FRACTION = 0.5
_MAX_Q = 0.5


@dataclass(frozen=True)
class AnnotationSettings:
    majority_fraction: float = 0.5
    avatar_max_fraction: float = 1.0 / 3.0


@dataclass(frozen=True)
class TrajectorySettings:
    median_width: int = 5
    max_eye_deg: float = 40.0
    max_eye_speed: float = 860.0
    max_head_speed: float = 700.0
    window_ms: int = 1500
    center_stride_ms: int = 500
    min_span_ms: int = 500
    max_invalid: float = 0.5
    eye_model: str = "subtract"


@dataclass(frozen=True)
class AttentionSettings:
    bandwidth: Optional[float] = None
    bandwidth_rule: str = "nn_median"
    weight_formula: str = "repaired"
    prefilter_iqr_factor: float = 3.0


@dataclass(frozen=True)
class EnrichmentSettings:
    steps: int = 5000
    target_width: int = 1031
    heads: Tuple[HeadSpec, ...] = DEFAULT_HEADS


@dataclass(frozen=True)
class TrainSettings:
    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 100
    budget: int = 7500
    dropout: float = 0.5
    arch: str = "100-20"
    candidates: Tuple[str, ...] = ("100-20",)
    steps: Optional[int] = None

    def train_config(self, *, epochs: Optional[int] = None, budget: Optional[int] = None) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=epochs or self.epochs,
            budget=budget or self.budget,
            steps=self.steps,
            dropout_rate=self.dropout,
        )


@dataclass(frozen=True)
class EvalSettings:
    folds: int = 10
    runs: int = 3
    validation_fraction: float = 0.1
    q: float = 0.05
    bky_grouping: str = "test_country"


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    corpus_dir: Path = Path("corpus")
    work_dir: Path = Path("work")
    log_level: str = "INFO"
    log_file: Optional[Path] = None
    face_pooling: str = "mean_sd"
    synth: Mapping[str, Any] = field(default_factory=dict)
    annotations: AnnotationSettings = AnnotationSettings()
    trajectories: TrajectorySettings = TrajectorySettings()
    attention: AttentionSettings = AttentionSettings()
    enrichment: EnrichmentSettings = EnrichmentSettings()
    train: TrainSettings = TrainSettings()
    evaluation: EvalSettings = EvalSettings()
    experiments: Mapping[str, Any] = field(default_factory=dict)
    source: Mapping[str, Any] = field(default_factory=dict)

    def metadata(self) -> Dict[str, Any]:
        """Design choices recorded alongside every run."""
        return {
            "eye_model": self.trajectories.eye_model,
            "median_width": self.trajectories.median_width,
            "bandwidth_rule": self.attention.bandwidth_rule,
            "weight_formula": self.attention.weight_formula,
            "face_pooling": self.face_pooling,
            "bky_grouping": self.evaluation.bky_grouping,
        }


def _clamp(value: float, low: float, high: float, name: str) -> float:
    if value < low or value > high:
        _LOGGER.warning("Config value {}={} is outside [{}, {}]. Clamping to safe bounds.", name, value, low, high)
    return max(low, min(high, value))


def _odd_width(width: int) -> int:
    if width % 2 == 0:
        _LOGGER.warning("Median filter width {} is even; using {}.", width, width + 1)
        return width + 1
    return width


def _resolve_arch(name: str) -> str:
    arch = ARCH_ALIASES.get(name, name)
    if arch not in ARCHITECTURES:
        _LOGGER.warning("Unknown architecture {!r}; falling back to 100-20.", name)
        return "100-20"
    return arch


def build_pipeline_config(normalized: Mapping[str, Any]) -> PipelineConfig:
    """Turn a normalized config dictionary into frozen settings, clamping soft ranges."""
    ann = normalized["annotations"]
    traj = normalized["trajectories"]
    att = normalized["attention"]
    enr = normalized["enrichment"]
    tr = normalized["train"]
    ev = normalized["evaluation"]
    log_file = normalized["logging"].get("file")
    heads = tuple(head_from_dict(h) for h in enr["heads"]) if enr["heads"] else DEFAULT_HEADS
    return PipelineConfig(
        seed=int(normalized["seed"]),
        corpus_dir=Path(normalized["paths"]["corpus"]),
        work_dir=Path(normalized["paths"]["work"]),
        log_level=normalized["logging"]["level"],
        log_file=Path(log_file) if log_file else None,
        face_pooling=normalized["sync"]["face_pooling"],
        synth=dict(normalized["synth"]),
        annotations=AnnotationSettings(
            majority_fraction=_clamp(ann["majority_fraction"], _MIN_MAJORITY_FRACTION, 1.0, "annotations.majority_fraction"),
            avatar_max_fraction=_clamp(ann["avatar_max_fraction"], 0.0, 1.0, "annotations.avatar_max_fraction"),
        ),
        trajectories=TrajectorySettings(
            median_width=_odd_width(traj["median_width"]),
            max_eye_deg=traj["max_eye_deg"],
            max_eye_speed=traj["max_eye_speed"],
            max_head_speed=traj["max_head_speed"],
            window_ms=traj["window_ms"],
            center_stride_ms=traj["center_stride_ms"],
            min_span_ms=traj["min_span_ms"],
            max_invalid=_clamp(traj["max_invalid"], 0.0, 1.0, "trajectories.max_invalid"),
            eye_model=traj["eye_model"],
        ),
        attention=AttentionSettings(
            bandwidth=att["bandwidth"],
            bandwidth_rule=att["bandwidth_rule"],
            weight_formula=att["weight_formula"],
            prefilter_iqr_factor=att["prefilter_iqr_factor"],
        ),
        enrichment=EnrichmentSettings(steps=enr["steps"], target_width=enr["target_width"], heads=heads),
        train=TrainSettings(
            learning_rate=tr["learning_rate"],
            batch_size=tr["batch_size"],
            epochs=tr["epochs"],
            budget=tr["budget"],
            dropout=_clamp(tr["dropout"], 0.0, _MAX_DROPOUT, "train.dropout"),
            arch=_resolve_arch(tr["arch"]),
            candidates=tuple(_resolve_arch(c) for c in tr["candidates"]),
            steps=tr["steps"],
        ),
        evaluation=EvalSettings(
            folds=ev["folds"],
            runs=ev["runs"],
            validation_fraction=_clamp(
                ev["validation_fraction"], _MIN_VALIDATION_FRACTION, _MAX_VALIDATION_FRACTION, "evaluation.validation_fraction"
            ),
            q=_clamp(ev["q"], 1e-6, _MAX_Q, "evaluation.q"),
            bky_grouping=ev["bky_grouping"],
        ),
        experiments=dict(normalized["experiments"]),
        source=dict(normalized),
    )


def load_pipeline_config(path: Optional[Path] = None, *, seed: Optional[int] = None) -> PipelineConfig:
    """Read and validate ``path`` (defaults apply when None); ``seed`` overrides the root seed."""
    normalized = load_and_validate_config(Path(path)) if path is not None else validate_config({})
    if seed is not None:
        normalized = dict(normalized, seed=int(seed))
    return build_pipeline_config(normalized)
