import json

import numpy as np
import pytest

from affectfuse.main import main
from core.evaluation import EvalReport

UNIFORM_AUDIO = {"calm": 0.34, "pleased": 0.33, "puzzled": 0.33}
UNIFORM_VIDEO = {"neutral": 0.34, "happy": 0.33, "pensive": 0.33}
UNIMODAL = ("A", "F", "G")


def _evaluate(root, *, effect, seed, modality_sets, folds=3, runs=1):
    """Synthesise a corpus with the given class effect and return UAR per experiment name."""
    root.mkdir(parents=True, exist_ok=True)
    config = root / "run.json"
    config.write_text(
        json.dumps(
            {
                "seed": seed,
                "paths": {"corpus": "corpus", "work": "work"},
                "logging": {"level": "WARNING", "file": str(root / "logs" / "run.log")},
                "synth": {
                    "countries": {"SP": 4, "FR": 4, "NO": 4},
                    "session_ms": 120000,
                    "audio_priors": UNIFORM_AUDIO,
                    "video_priors": UNIFORM_VIDEO,
                    "effect_audio": effect,
                    "effect_video": effect,
                },
                "enrichment": {"steps": 100},
                "train": {"learning_rate": 0.001, "budget": 640, "steps": 400, "candidates": ["100-20"]},
                "evaluation": {"folds": folds, "runs": runs},
                "experiments": {
                    "label_types": ["audio", "video"],
                    "countries": ["WH"],
                    "modality_sets": list(modality_sets),
                    "cross_country": False,
                    "speaking_regimes": False,
                    "budgets": {"audio": 640, "video": 640},
                },
            }
        ),
        encoding="utf-8",
    )
    base = ["--config", str(config)]
    for command in (["synth"], ["goldstd"], ["gazefeat"], ["eval"]):
        assert main(base + command) == 0, command
    reports = [EvalReport.from_dict(json.loads(p.read_text(encoding="utf-8"))) for p in (root / "work" / "reports").glob("*.json")]
    return {report.spec.name: report.uar_mean for report in reports}


@pytest.mark.slow
def test_strong_effects_are_recognised_and_fusion_keeps_up(tmp_path):
    uar = _evaluate(tmp_path, effect=5.0, seed=11, modality_sets=UNIMODAL + ("A+F+G",))
    for label_type in ("audio", "video"):
        fused = uar[f"{label_type}-A+F+G-WH"]
        assert fused >= 0.90, (label_type, uar)
        assert fused >= max(uar[f"{label_type}-{m}-WH"] for m in UNIMODAL) - 0.02, (label_type, uar)


@pytest.mark.slow
def test_without_an_effect_recognition_stays_at_chance(tmp_path):
    runs = [_evaluate(tmp_path / f"seed{seed}", effect=0.0, seed=seed, modality_sets=["A+F+G"], runs=2) for seed in range(5)]
    for label_type in ("audio", "video"):
        mean = float(np.mean([uar[f"{label_type}-A+F+G-WH"] for uar in runs]))
        assert 0.28 <= mean <= 0.38, (label_type, runs)
