"""
Expansion of the experiment matrix: label types x modality sets x country
subsets, cross-country tests and, for video, speaking regimes within a
country and from the whole corpus to each country.
"""

from __future__ import annotations

from itertools import combinations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from shared.label_sets import COUNTRIES, MODALITY_ORDER, WHOLE

from .evaluation import ExperimentSpec

DEFAULT_EPOCHS = 100
EPOCH_OVERRIDES: Dict[Tuple[str, str], int] = {("audio", "NO"): 200}
AUDIO_BUDGETS: Dict[str, int] = {"SP": 5418, "FR": 2556, "NO": 234, WHOLE: 10494}
VIDEO_BUDGET = 7500

TRAIN_REGIMES = ("all", "speech", "silence")
TEST_REGIMES = ("speech", "silence")


def all_modality_sets() -> List[Tuple[str, ...]]:
    out: List[Tuple[str, ...]] = []
    for size in range(1, len(MODALITY_ORDER) + 1):
        out.extend(combinations(MODALITY_ORDER, size))
    return out


def parse_modalities(text: str) -> Tuple[str, ...]:
    parts = [p.strip().upper() for p in text.replace(",", "+").split("+") if p.strip()]
    unknown = sorted(set(parts) - set(MODALITY_ORDER))
    if unknown or not parts:
        raise ValueError(f"modality set {text!r} must combine {MODALITY_ORDER}; unknown {unknown}.")
    return tuple(m for m in MODALITY_ORDER if m in parts)


def default_budget(label_type: str, train_country: str, budgets: Optional[Mapping[str, object]] = None) -> int:
    if budgets and label_type in budgets:
        value = budgets[label_type]
        if isinstance(value, Mapping):
            return int(value.get(train_country, value.get(WHOLE, VIDEO_BUDGET)))
        return int(value)
    if label_type == "audio":
        return AUDIO_BUDGETS[train_country]
    return VIDEO_BUDGET


def default_epochs(label_type: str, train_country: str, overrides: Optional[Mapping[str, int]] = None) -> int:
    key = f"{label_type}:{train_country}"
    if overrides and key in overrides:
        return int(overrides[key])
    if overrides and "default" in overrides:
        return int(overrides["default"])
    return EPOCH_OVERRIDES.get((label_type, train_country), DEFAULT_EPOCHS)


def experiment_name(label_type: str, modalities: Sequence[str], train_country: str, test_country: str, train_speaking: str, test_speaking: str) -> str:
    name = f"{label_type}-{'+'.join(modalities)}-{train_country}"
    if test_country != train_country:
        name += f"-to-{test_country}"
    if (train_speaking, test_speaking) != ("all", "all"):
        name += f"-{train_speaking}-to-{test_speaking}"
    return name


def build_matrix(settings: Mapping[str, object]) -> List[ExperimentSpec]:
    """
    Expand an ``experiments`` config section into experiment specs.

    Recognised keys: ``label_types``, ``modality_sets`` (strings such as
    "A+F"), ``countries``, ``cross_country``, ``speaking_regimes``,
    ``epochs`` (``"default"`` or ``"<label_type>:<country>"`` keys) and
    ``budgets`` (per label type, an int or a per-country mapping).
    """
    label_types = list(settings.get("label_types", ("audio", "video")))
    raw_sets = settings.get("modality_sets")
    modality_sets = [parse_modalities(s) for s in raw_sets] if raw_sets else all_modality_sets()
    countries = list(settings.get("countries", COUNTRIES + (WHOLE,)))
    cross_country = bool(settings.get("cross_country", True))
    speaking = bool(settings.get("speaking_regimes", True))
    epochs = settings.get("epochs")
    budgets = settings.get("budgets")

    specs: List[ExperimentSpec] = []
    seen = set()

    def add(label_type: str, mods: Tuple[str, ...], train_c: str, test_c: str, train_s: str, test_s: str) -> None:
        name = experiment_name(label_type, mods, train_c, test_c, train_s, test_s)
        if name in seen:
            return
        seen.add(name)
        specs.append(
            ExperimentSpec(
                name=name,
                label_type=label_type,
                modalities=mods,
                train_country=train_c,
                test_country=test_c,
                train_speaking=train_s,
                test_speaking=test_s,
                epochs=default_epochs(label_type, train_c, epochs),
                budget=default_budget(label_type, train_c, budgets),
            )
        )

    for label_type in label_types:
        for mods in modality_sets:
            for country in countries:
                add(label_type, mods, country, country, "all", "all")
            if cross_country and WHOLE in countries:
                for country in countries:
                    if country != WHOLE:
                        add(label_type, mods, WHOLE, country, "all", "all")
            if speaking and label_type == "video":
                for country in countries:
                    for train_s in TRAIN_REGIMES:
                        for test_s in TEST_REGIMES:
                            add(label_type, mods, country, country, train_s, test_s)
                if cross_country and WHOLE in countries:
                    for country in countries:
                        if country == WHOLE:
                            continue
                        for train_s in TRAIN_REGIMES:
                            for test_s in TEST_REGIMES:
                                add(label_type, mods, WHOLE, country, train_s, test_s)
    return specs
