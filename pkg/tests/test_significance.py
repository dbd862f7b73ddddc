import math

import numpy as np
import pytest

from core.evaluation import EvalReport, ExperimentSpec, eval_key
from core.significance import (
    SignificanceError,
    bky_fdr,
    corrected_ttest,
    naive_ttest,
    pairwise_comparisons,
)

EXAMPLE_P = [0.001, 0.008, 0.039, 0.041, 0.042, 0.06, 0.074, 0.205, 0.212, 0.216]


def _diffs(mean, sd, n=30, seed=0):
    z = np.random.default_rng(seed).normal(size=n)
    z = (z - z.mean()) / z.std(ddof=1)
    return mean + sd * z


def test_zero_differences_give_p_one():
    result = corrected_ttest(np.zeros(30), 9.0, 1.0)
    assert result.p == 1.0 and result.t == 0.0


def test_constant_nonzero_differences_are_degenerate():
    result = corrected_ttest(np.full(30, 0.1), 9.0, 1.0)
    assert result.degenerate
    assert result.p == 0.0
    assert math.isinf(result.t)


def test_corrected_t_hand_evaluation():
    result = corrected_ttest(_diffs(0.02, 0.03), 9.0, 1.0)
    assert result.t == pytest.approx(0.02 / math.sqrt((1 / 30 + 1 / 9) * 0.0009), abs=1e-9)
    assert result.t == pytest.approx(1.75, abs=0.01)
    assert 0.05 < result.p < 0.1


def test_corrected_t_never_exceeds_naive_t():
    rng = np.random.default_rng(1)
    for _ in range(50):
        d = rng.normal(rng.uniform(-0.05, 0.05), rng.uniform(0.01, 0.1), size=30)
        ratio = rng.uniform(0.05, 1.0)
        assert abs(corrected_ttest(d, 1.0, ratio).t) <= abs(naive_ttest(d).t)
        assert corrected_ttest(d, 1.0, ratio).p >= naive_ttest(d).p


def test_ttest_input_checks():
    with pytest.raises(SignificanceError):
        corrected_ttest([0.1], 9.0, 1.0)
    with pytest.raises(SignificanceError):
        corrected_ttest([0.1, 0.2], 0.0, 1.0)
    with pytest.raises(SignificanceError):
        corrected_ttest([0.1, np.nan], 9.0, 1.0)


def test_bky_extremes():
    none = bky_fdr(np.ones(8))
    assert not none.reject.any()
    assert none.m0[None] == 8
    everything = bky_fdr(np.zeros(8))
    assert everything.reject.all()
    assert everything.m0[None] == 0


def test_bky_example_rejects_the_two_smallest():
    result = bky_fdr(EXAMPLE_P, q=0.05)
    assert result.reject.tolist() == [True, True] + [False] * 8
    assert result.m0[None] == 8


def test_bky_matches_statsmodels_two_stage():
    multitest = pytest.importorskip("statsmodels.stats.multitest")
    expected, *_ = multitest.fdrcorrection_twostage(np.array(EXAMPLE_P), alpha=0.05, method="bky")
    assert bky_fdr(EXAMPLE_P, q=0.05).reject.tolist() == expected.tolist()

    rng = np.random.default_rng(2)
    for _ in range(100):
        m = int(rng.integers(2, 40))
        p = np.where(rng.random(m) < 0.4, rng.beta(0.3, 8.0, size=m), rng.random(m))
        expected, *_ = multitest.fdrcorrection_twostage(p, alpha=0.05, method="bky")
        assert bky_fdr(p, q=0.05).reject.tolist() == expected.tolist()


def test_bky_runs_separately_per_group():
    p = EXAMPLE_P + [0.9, 0.95]
    groups = ["SP"] * 10 + ["FR"] * 2
    result = bky_fdr(p, groups=groups)
    assert result.reject[:10].tolist() == bky_fdr(EXAMPLE_P).reject.tolist()
    assert not result.reject[10:].any()
    assert set(result.m0) == {"SP", "FR"}


def test_adjusted_p_values_agree_with_decisions():
    result = bky_fdr(EXAMPLE_P, q=0.05)
    assert (result.adjusted[result.reject] <= 0.05 + 1e-12).all()
    assert ((result.adjusted >= 0) & (result.adjusted <= 1)).all()

    rng = np.random.default_rng(8)
    for _ in range(200):
        m = int(rng.integers(2, 40))
        p = np.where(rng.random(m) < 0.5, rng.beta(0.3, 8.0, size=m), rng.random(m))
        result = bky_fdr(p, q=0.05)
        assert ((result.adjusted <= 0.05 * (1 + 1e-9)) == result.reject).all()


def test_bky_input_checks():
    with pytest.raises(SignificanceError):
        bky_fdr([0.1, 1.5])
    with pytest.raises(SignificanceError):
        bky_fdr([0.1], q=0.0)
    with pytest.raises(SignificanceError):
        bky_fdr([0.1, 0.2], groups=["SP"])


def _report(name, level, test_country="WH", seed=0):
    uars = level + np.random.default_rng(seed).normal(0.0, 0.01, size=30)
    keys = [eval_key(run, fold) for run in range(3) for fold in range(10)]
    return EvalReport(
        spec=ExperimentSpec(name, "audio", ("A",), test_country=test_country),
        classes=("calm", "pleased", "puzzled"),
        arch="100-20",
        uar_by_eval=dict(zip(keys, uars.tolist())),
        train_sizes=[900] * 30,
        test_sizes=[100] * 30,
    )


def test_pairwise_comparisons_pair_reports_on_the_same_test_set():
    reports = [_report("strong", 0.8, seed=1), _report("weak", 0.5, seed=2), _report("other", 0.6, "SP", seed=3)]
    comparisons = pairwise_comparisons(reports)
    assert len(comparisons) == 1
    only = comparisons[0]
    assert (only.experiment_a, only.experiment_b) == ("strong", "weak")
    assert only.group == "WH"
    assert only.mean_diff == pytest.approx(0.3, abs=0.02)
    assert only.reject


def test_pairwise_comparisons_without_pairs():
    assert pairwise_comparisons([_report("alone", 0.7)]) == []
