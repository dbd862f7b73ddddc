import json

import numpy as np
import pandas as pd
import pytest

from affectfuse.main import build_parser, main
from core import feature_store
from core.digest import compute_config_digest
from shared.records import Trajectory

UNIFORM_AUDIO = {"calm": 0.34, "pleased": 0.33, "puzzled": 0.33}
UNIFORM_VIDEO = {"neutral": 0.34, "happy": 0.33, "pensive": 0.33}


def _write_config(path, **overrides):
    config = {
        "seed": 5,
        "paths": {"corpus": "corpus", "work": "work"},
        "logging": {"level": "WARNING", "file": str(path.parent / "logs" / "run.log")},
        "synth": {"countries": {"SP": 2, "FR": 2, "NO": 2}, "session_ms": 12000},
    }
    config.update(overrides)
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


def test_subcommand_is_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_common_options_are_accepted_after_the_subcommand(tmp_path):
    args = build_parser().parse_args(["validate", "--seed", "3", str(tmp_path)])
    assert args.seed == 3
    assert args.paths == [str(tmp_path)]


def test_synth_then_validate(tmp_path, capsys):
    config = _write_config(tmp_path / "run.json")
    assert main(["--config", str(config), "synth"]) == 0
    corpus = tmp_path / "corpus"
    assert (corpus / "subjects.csv").exists()
    manifest = json.loads((corpus / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 5
    assert manifest["config_digest"] == compute_config_digest(manifest["config"])
    assert (tmp_path / "logs" / "run.log").exists()

    assert main(["--config", str(config), "validate"]) == 0
    assert "OK:" in capsys.readouterr().out


def test_seed_flag_changes_the_corpus(tmp_path):
    config = _write_config(tmp_path / "run.json")
    assert main(["--config", str(config), "synth", "--out", str(tmp_path / "a")]) == 0
    assert main(["--config", str(config), "--seed", "6", "synth", "--out", str(tmp_path / "b")]) == 0
    a = json.loads((tmp_path / "a" / "manifest.json").read_text(encoding="utf-8"))["files"]
    b = json.loads((tmp_path / "b" / "manifest.json").read_text(encoding="utf-8"))["files"]
    assert a["trajectories/SP01.csv"] != b["trajectories/SP01.csv"]


def test_validation_failures_exit_with_one(tmp_path, capsys):
    bad = tmp_path / "annotations" / "SP01.csv"
    bad.parent.mkdir()
    bad.write_text("rater_id,channel,start_ms,end_ms,label\nr1,audio,0,3000,furious\n", encoding="utf-8")
    assert main(["--log-file", str(tmp_path / "cli.log"), "validate", str(bad)]) == 1
    assert "furious" in capsys.readouterr().out


def test_bad_config_exits_with_one(tmp_path, capsys):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"evaluation": {"folds": 1}}), encoding="utf-8")
    assert main(["--config", str(config), "synth"]) == 1
    assert "evaluation.folds" in capsys.readouterr().err


def test_unexpected_failures_exit_with_two(tmp_path):
    config = _write_config(tmp_path / "run.json")
    assert main(["--config", str(config), "train", "--matrix", str(tmp_path / "absent.csv")]) == 2


def test_gazefeat_counts_windows_without_a_coach_estimate(tmp_path):
    config = _write_config(tmp_path / "run.json")
    n = 250
    t = np.arange(n) * 40.0
    trajectory = Trajectory(
        subject_id="SP01",
        frame_idx=np.arange(n),
        t_ms=t,
        gaze=np.column_stack([2.0 * np.sin(t / 700.0), np.cos(t / 900.0)]),
        head=np.column_stack([np.sin(t / 1100.0), np.zeros(n), np.zeros(n)]),
        origin=np.tile([0.0, 0.0, 1.0], (n, 1)),
        plane=np.full((n, 2), np.nan),
        detected=np.ones(n, dtype=bool),
    )
    source = feature_store.write_trajectory(tmp_path / "SP01.csv", trajectory)
    args = ["--config", str(config), "gazefeat", "--input", str(source), "--window-ms", "1500", "--center-stride-ms", "500"]
    assert main(args) == 0

    work = tmp_path / "work"
    windows, vectors = feature_store.read_window_features(work / "gaze" / "windows" / "SP01.csv")
    assert len(windows) > 0
    manifest = json.loads((work / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["metadata"]["unweighted_windows"] == len(windows)
    assert windows[-1].end_ms == 10000


@pytest.mark.slow
def test_full_pipeline_on_a_synthetic_corpus(tmp_path):
    config = _write_config(
        tmp_path / "run.json",
        synth={
            "countries": {"SP": 3, "FR": 3, "NO": 3},
            "session_ms": 60000,
            "audio_priors": UNIFORM_AUDIO,
            "video_priors": UNIFORM_VIDEO,
        },
        enrichment={"steps": 30},
        train={"learning_rate": 0.001, "budget": 60, "steps": 30},
        evaluation={"folds": 2, "runs": 1},
        experiments={
            "label_types": ["audio", "video"],
            "countries": ["WH"],
            "modality_sets": ["A", "G", "A+F+G"],
            "cross_country": False,
            "speaking_regimes": False,
            "budgets": {"audio": 60, "video": 60},
        },
    )
    base = ["--config", str(config)]
    work = tmp_path / "work"
    for command in (["synth"], ["validate"], ["goldstd"], ["kappa"], ["gazefeat"]):
        assert main(base + command) == 0, command

    contingency = pd.read_csv(work / "gold" / "contingency.csv")
    assert set(contingency["country"]) == {"SP", "FR", "NO", "WH"}
    assert set(pd.read_csv(work / "kappa" / "agreement.csv")["scope"]) == {"subject", "country_mean"}
    assert len(list((work / "gaze" / "windows").glob("*.csv"))) == 9

    assert main(base + ["sync", "--label-type", "audio", "--modalities", "A+G"]) == 0
    matrix = feature_store.read_matrix(work / "matrices" / "audio_A+G_all.csv")
    assert matrix.features().shape[1] == 1031 + 228
    assert main(base + ["train", "--matrix", str(work / "matrices" / "audio_A+G_all.csv")]) == 0
    assert (work / "models" / "audio_A+G_all.json").exists()

    assert main(base + ["eval"]) == 0
    reports = sorted(p.stem for p in (work / "reports").glob("*.json"))
    assert reports == sorted(f"{t}-{m}-WH" for t in ("audio", "video") for m in ("A", "G", "A+F+G"))
    report = json.loads((work / "reports" / "audio-A-WH.json").read_text(encoding="utf-8"))
    assert len(report["uar_by_eval"]) == 2
    assert report["metadata"]["enrichment_heads"] == "per_fold"

    assert main(base + ["stats"]) == 0
    assert len(pd.read_csv(work / "stats" / "comparisons.csv")) == 6
    assert main(base + ["report"]) == 0
    assert (work / "report" / "charts" / "WH.svg").exists()
    assert json.loads((work / "manifest.json").read_text(encoding="utf-8"))["command"] == "report"
