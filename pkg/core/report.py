"""
Result tables and bar charts for a set of experiment reports.

Rendering is deterministic: the same reports give byte-identical CSV and
SVG files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from affectfuse.affectfuse import logger as app_logger
from shared.label_sets import WHOLE

from .evaluation import EvalReport
from .significance import Comparison

_LOGGER = app_logger.get_logger()

SVG_HASH_SALT = "affectfuse"
FIGURE_SIZE = (8.0, 4.5)
PERCENT_DECIMALS = 2
RC_PARAMS = {
    "svg.hashsalt": SVG_HASH_SALT,
    "svg.fonttype": "path",
    "font.family": "DejaVu Sans",
    "font.size": 9,
}


class ReportError(ValueError):
    """Raised when there is nothing to render."""


@dataclass(slots=True)
class RenderResult:
    tables: List[Path] = field(default_factory=list)
    charts: List[Path] = field(default_factory=list)
    summary: Path | None = None


def _accuracy_header(label: str) -> str:
    return f"{label.capitalize()} Accuracy"


def _percent(value: float) -> float:
    return round(100.0 * float(value), PERCENT_DECIMALS) if np.isfinite(value) else float("nan")


def results_table(report: EvalReport) -> pd.DataFrame:
    """One-row table: per-class accuracies, then average accuracy (UAR) and its SEM, in percent."""
    row: Dict[str, object] = {"Experiment": report.spec.name, "Modalities": report.spec.modality_key}
    for label, accuracy in report.class_accuracy.items():
        row[_accuracy_header(label)] = _percent(accuracy)
    row["Average Accuracy"] = _percent(report.uar_mean)
    row["SEM"] = _percent(report.uar_sem)
    row["Evaluations"] = report.n_evaluations
    return pd.DataFrame([row])


def series_label(report: EvalReport) -> str:
    spec = report.spec
    label = spec.label_type
    if spec.train_country != spec.test_country:
        label += f" (trained {spec.train_country})"
    if (spec.train_speaking, spec.test_speaking) != ("all", "all"):
        label += f" {spec.train_speaking}->{spec.test_speaking}"
    return label


def _chart_groups(reports: Sequence[EvalReport]) -> Dict[str, List[EvalReport]]:
    by_country: Dict[str, List[EvalReport]] = {}
    for report in reports:
        by_country.setdefault(report.spec.test_country, []).append(report)
    order = {c: i for i, c in enumerate(("SP", "FR", "NO", WHOLE))}
    return dict(sorted(by_country.items(), key=lambda item: order.get(item[0], len(order))))


def country_chart(country: str, reports: Sequence[EvalReport], path: Path) -> Path:
    """Grouped bars of UAR per modality set, one bar per label-type series, SEM whiskers."""
    modality_keys = sorted({r.spec.modality_key for r in reports}, key=lambda k: (len(k), k))
    series = sorted({series_label(r) for r in reports})
    values: Dict[Tuple[str, str], EvalReport] = {(series_label(r), r.spec.modality_key): r for r in reports}

    with matplotlib.rc_context(RC_PARAMS):
        fig = Figure(figsize=FIGURE_SIZE)
        ax = fig.subplots()
        x = np.arange(len(modality_keys))
        width = 0.8 / max(len(series), 1)
        for i, name in enumerate(series):
            means = [100.0 * values[(name, k)].uar_mean if (name, k) in values else np.nan for k in modality_keys]
            sems = [100.0 * values[(name, k)].uar_sem if (name, k) in values else 0.0 for k in modality_keys]
            ax.bar(x + (i - (len(series) - 1) / 2.0) * width, means, width, yerr=np.nan_to_num(sems), capsize=2, label=name)
        ax.set_xticks(x)
        ax.set_xticklabels(modality_keys)
        ax.set_ylabel("UAR (%)")
        ax.set_ylim(0.0, 100.0)
        ax.axhline(100.0 / 3.0, color="grey", linewidth=0.8, linestyle="--")
        ax.set_title(f"Test set: {country}")
        ax.legend(loc="upper left", fontsize=7)
        fig.tight_layout()
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "affectfuse"})
    return path


def report_render(reports: Sequence[EvalReport], out_dir: Path) -> RenderResult:
    """Write one results table per experiment, a summary table and one chart per test country."""
    if not reports:
        raise ReportError("report_render needs at least one experiment report.")
    out_dir = Path(out_dir)
    result = RenderResult()
    ordered = sorted(reports, key=lambda r: r.spec.name)

    tables = []
    for report in ordered:
        table = results_table(report)
        path = out_dir / "tables" / f"{report.spec.name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, lineterminator="\n")
        result.tables.append(path)
        tables.append(table)

    summary = pd.concat(tables, ignore_index=True, sort=False)
    result.summary = out_dir / "summary.csv"
    summary.to_csv(result.summary, index=False, lineterminator="\n")

    for country, group in _chart_groups(ordered).items():
        result.charts.append(country_chart(country, group, out_dir / "charts" / f"{country}.svg"))
    _LOGGER.info("Rendered {} tables and {} charts into {}.", len(result.tables), len(result.charts), out_dir)
    return result


def comparisons_table(comparisons: Sequence[Comparison]) -> pd.DataFrame:
    columns = ["group", "experiment_a", "experiment_b", "mean_diff", "t", "p", "p_adjusted", "reject", "degenerate"]
    return pd.DataFrame([[getattr(c, name) for name in columns] for c in comparisons], columns=columns)
