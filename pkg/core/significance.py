"""
Corrected repeated k-fold t-test and two-stage adaptive FDR control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from affectfuse.affectfuse import logger as app_logger

_LOGGER = app_logger.get_logger()

DEFAULT_Q = 0.05
VARIANCE_DDOF = 1


class SignificanceError(ValueError):
    """Raised for invalid test input."""


@dataclass(frozen=True, slots=True)
class TTestResult:
    t: float
    p: float
    n: int
    mean: float
    degenerate: bool = False


@dataclass(slots=True)
class BKYResult:
    """Decisions plus adjusted p-values; ``m0`` is the per-group null-count estimate."""

    reject: np.ndarray
    adjusted: np.ndarray
    m0: Dict[Hashable, int]


def corrected_ttest(paired_diffs: Sequence[float], n_train: float, n_test: float) -> TTestResult:
    """
    Paired t-test with the variance inflated by 1/J + n_test/n_train.

    J is the number of differences (folds times runs) and the p-value is
    two-sided with J - 1 degrees of freedom. Zero variance gives p = 1 for a
    zero mean and p = 0 (flagged degenerate) otherwise.
    """
    d = np.asarray(paired_diffs, dtype=float)
    if d.size < 2:
        raise SignificanceError(f"the corrected t-test needs at least 2 differences, got {d.size}.")
    if n_train <= 0 or n_test <= 0:
        raise SignificanceError(f"n_train and n_test must be positive, got {n_train} and {n_test}.")
    if not np.isfinite(d).all():
        raise SignificanceError("paired differences must be finite.")
    j = d.size
    mean = float(d.mean())
    var = float(d.var(ddof=VARIANCE_DDOF))
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, p=1.0, n=j, mean=mean)
        _LOGGER.warning("Corrected t-test on {} identical non-zero differences; p set to 0.", j)
        return TTestResult(t=math.copysign(math.inf, mean), p=0.0, n=j, mean=mean, degenerate=True)
    t = mean / math.sqrt((1.0 / j + n_test / n_train) * var)
    p = float(2.0 * stats.t.sf(abs(t), df=j - 1))
    return TTestResult(t=float(t), p=min(p, 1.0), n=j, mean=mean)


def naive_ttest(paired_diffs: Sequence[float]) -> TTestResult:
    """Classical paired t statistic, for comparison with the corrected one."""
    d = np.asarray(paired_diffs, dtype=float)
    if d.size < 2:
        raise SignificanceError(f"the paired t-test needs at least 2 differences, got {d.size}.")
    var = float(d.var(ddof=VARIANCE_DDOF))
    mean = float(d.mean())
    if var == 0.0:
        return TTestResult(t=0.0 if mean == 0 else math.copysign(math.inf, mean), p=1.0 if mean == 0 else 0.0, n=d.size, mean=mean)
    t = mean / math.sqrt(var / d.size)
    return TTestResult(t=float(t), p=float(2.0 * stats.t.sf(abs(t), df=d.size - 1)), n=d.size, mean=mean)


def _check_pvalues(pvalues: Sequence[float]) -> np.ndarray:
    p = np.asarray(pvalues, dtype=float).ravel()
    bad = ~np.isfinite(p) | (p < 0) | (p > 1)
    if bad.any():
        raise SignificanceError(f"p-values must lie in [0, 1]; invalid at positions {np.nonzero(bad)[0].tolist()}.")
    return p


def step_up(pvalues: np.ndarray, level: float) -> np.ndarray:
    """Linear step-up: reject the k smallest p where k is the largest with p_(k) <= k level / m."""
    m = pvalues.size
    reject = np.zeros(m, dtype=bool)
    if m == 0:
        return reject
    order = np.argsort(pvalues, kind="stable")
    below = pvalues[order] <= level * np.arange(1, m + 1) / m
    if below.any():
        k = int(np.nonzero(below)[0].max()) + 1
        reject[order[:k]] = True
    return reject


def step_up_adjusted(pvalues: np.ndarray) -> np.ndarray:
    m = pvalues.size
    if m == 0:
        return pvalues.copy()
    order = np.argsort(pvalues, kind="stable")
    scaled = pvalues[order] * m / np.arange(1, m + 1)
    monotone = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.empty(m)
    adjusted[order] = np.minimum(monotone, 1.0)
    return adjusted


def _two_stage(p: np.ndarray, q: float) -> Tuple[np.ndarray, int, float]:
    """Decisions, the null-count estimate m - r1 and the step-up level that made the decisions."""
    m = p.size
    q_prime = q / (1.0 + q)
    first = step_up(p, q_prime)
    r1 = int(first.sum())
    if r1 == 0 or r1 == m:
        return first, m - r1, q_prime
    level = q_prime * m / (m - r1)
    return step_up(p, level), m - r1, level


def bky_fdr(
    pvalues: Sequence[float],
    q: float = DEFAULT_Q,
    groups: Optional[Sequence[Hashable]] = None,
) -> BKYResult:
    """
    Two-stage adaptive step-up, run separately inside each group.

    Stage one is a step-up at q / (1 + q); with r1 of m rejected (0 < r1 < m)
    stage two repeats it at that level times m / (m - r1). ``m0`` reports
    m - r1 per group. Adjusted p-values are the step-up adjusted ones scaled
    by q over the level that made the decisions, so a hypothesis is rejected
    exactly when its adjusted p is at most q.
    """
    if not 0.0 < q < 1.0:
        raise SignificanceError(f"q must lie in (0, 1), got {q}.")
    p = _check_pvalues(pvalues)
    keys = list(groups) if groups is not None else [None] * p.size
    if len(keys) != p.size:
        raise SignificanceError(f"{p.size} p-values but {len(keys)} group keys.")

    reject = np.zeros(p.size, dtype=bool)
    adjusted = np.ones(p.size)
    m0_by_group: Dict[Hashable, int] = {}
    for key in dict.fromkeys(keys):
        members = np.array([i for i, k in enumerate(keys) if k == key], dtype=np.int64)
        sub = p[members]
        decisions, m0, level = _two_stage(sub, q)
        reject[members] = decisions
        adjusted[members] = np.minimum(step_up_adjusted(sub) * q / level, 1.0)
        m0_by_group[key] = m0
    return BKYResult(reject=reject, adjusted=adjusted, m0=m0_by_group)


@dataclass(frozen=True, slots=True)
class Comparison:
    group: str
    experiment_a: str
    experiment_b: str
    mean_diff: float
    t: float
    p: float
    p_adjusted: float
    reject: bool
    degenerate: bool


def pairwise_comparisons(
    reports: Sequence,
    *,
    q: float = DEFAULT_Q,
    group_key: Callable[[object], str] = lambda r: r.spec.test_country,
) -> List[Comparison]:
    """
    Compare every pair of experiments evaluated on the same test set.

    Reports pair up when they share label type, test country and test
    speaking regime and carry the same number of evaluations; differences are
    taken run by run and fold by fold. Decisions are FDR-controlled per group.
    """
    buckets: Dict[tuple, List] = {}
    for report in reports:
        buckets.setdefault(report.spec.test_set_key(), []).append(report)

    pending = []
    for key in sorted(buckets, key=str):
        members = sorted(buckets[key], key=lambda r: r.spec.name)
        for a, b in combinations(members, 2):
            shared = sorted(set(a.uar_by_eval) & set(b.uar_by_eval))
            if len(shared) < 2:
                _LOGGER.warning("Skipping {} vs {}: fewer than 2 shared evaluations.", a.spec.name, b.spec.name)
                continue
            diffs = [a.uar_by_eval[k] - b.uar_by_eval[k] for k in shared]
            n_train = float(np.mean([a.mean_train_size, b.mean_train_size]))
            n_test = float(np.mean([a.mean_test_size, b.mean_test_size]))
            result = corrected_ttest(diffs, max(n_train, 1.0), max(n_test, 1.0))
            pending.append((str(group_key(a)), a.spec.name, b.spec.name, result))

    if not pending:
        return []
    fdr = bky_fdr([r.p for _, _, _, r in pending], q=q, groups=[g for g, _, _, _ in pending])
    return [
        Comparison(
            group=group,
            experiment_a=name_a,
            experiment_b=name_b,
            mean_diff=result.mean,
            t=result.t,
            p=result.p,
            p_adjusted=float(fdr.adjusted[i]),
            reject=bool(fdr.reject[i]),
            degenerate=result.degenerate,
        )
        for i, (group, name_a, name_b, result) in enumerate(pending)
    ]
