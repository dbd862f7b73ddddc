import pandas as pd
import pytest

from core.evaluation import EvalReport, ExperimentSpec
from core.report import ReportError, comparisons_table, report_render, results_table, series_label
from core.significance import pairwise_comparisons


def _report(name, label_type="audio", modalities=("A",), train="SP", test="SP", uars=(0.5, 0.7)):
    spec = ExperimentSpec(name, label_type, tuple(modalities), train_country=train, test_country=test)
    classes = ("calm", "pleased", "puzzled")
    return EvalReport(
        spec=spec,
        classes=classes,
        arch="100-20",
        uar_by_eval={f"r0f{i}": u for i, u in enumerate(uars)},
        confusions={f"r0f{i}": [[2, 0, 0], [0, 1, 1], [0, 0, 2]] for i in range(len(uars))},
    )


def test_results_table_reports_percentages():
    table = results_table(_report("audio-A-SP"))
    row = table.iloc[0]
    assert list(table.columns[:2]) == ["Experiment", "Modalities"]
    assert row["Calm Accuracy"] == 100.0
    assert row["Pleased Accuracy"] == 50.0
    assert row["Average Accuracy"] == 60.0
    assert row["SEM"] == 10.0
    assert row["Evaluations"] == 2


def test_series_label_names_transfer_and_regimes():
    assert series_label(_report("x", train="WH", test="SP")) == "audio (trained WH)"
    spec = ExperimentSpec("y", "video", ("G",), "FR", "FR", "speech", "silence")
    assert series_label(EvalReport(spec=spec, classes=("neutral", "happy", "pensive"), arch="100-20")) == "video speech->silence"


def test_single_report_renders_one_table_and_one_chart(tmp_path):
    result = report_render([_report("audio-A-SP")], tmp_path)
    assert [p.name for p in result.tables] == ["audio-A-SP.csv"]
    assert [p.name for p in result.charts] == ["SP.svg"]
    assert pd.read_csv(result.summary).shape[0] == 1


def test_rendering_is_byte_identical(tmp_path):
    reports = [
        _report("audio-A-SP"),
        _report("audio-A+F-SP", modalities=("A", "F"), uars=(0.6, 0.8)),
        _report("audio-A-WH-to-SP", train="WH"),
        _report("audio-A-FR", train="FR", test="FR", uars=(0.4, 0.4)),
    ]
    first = report_render(reports, tmp_path / "one")
    second = report_render(list(reversed(reports)), tmp_path / "two")
    assert [p.name for p in first.charts] == ["SP.svg", "FR.svg"]
    for a, b in zip(first.tables + first.charts + [first.summary], second.tables + second.charts + [second.summary]):
        assert a.read_bytes() == b.read_bytes()


def test_nothing_to_render(tmp_path):
    with pytest.raises(ReportError):
        report_render([], tmp_path)


def test_comparisons_table_columns():
    strong = _report("audio-A+F-SP", modalities=("A", "F"), uars=(0.9, 0.92))
    weak = _report("audio-A-SP", uars=(0.4, 0.45))
    table = comparisons_table(pairwise_comparisons([strong, weak]))
    assert list(table.columns) == ["group", "experiment_a", "experiment_b", "mean_diff", "t", "p", "p_adjusted", "reject", "degenerate"]
    assert len(table) == 1
