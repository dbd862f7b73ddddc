"""
Subject-independent repeated cross-validation: fold plans, UAR, model
selection and experiment runs.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from affectfuse.affectfuse import logger as app_logger
from shared.label_sets import COUNTRIES, MODALITY_ORDER, WHOLE, reduced_labels
from shared.records import SampleMatrix

from .classifier import ARCH_ALIASES, TrainConfig, fit_classifier, predict

_LOGGER = app_logger.get_logger()

N_FOLDS = 10
N_RUNS = 3
VALIDATION_FRACTION = 0.1
SPEAKING_REGIMES = ("all", "speech", "silence")

Predictor = Callable[[np.ndarray], np.ndarray]
Trainer = Callable[[str, np.ndarray, np.ndarray, Sequence[str], int], Predictor]
FoldRefit = Callable[[np.ndarray, int, Sequence[str]], np.ndarray]


class FoldPlanError(ValueError):
    """Raised when subjects cannot be split into the requested folds."""


class MetricError(ValueError):
    """Raised for a confusion matrix that admits no recall."""


@dataclass(slots=True)
class FoldPlan:
    """
    Subject-to-fold assignment made per country.

    The whole-corpus plan is the union of the country plans, so fold f of
    WH tests exactly the subjects tested in fold f of each country.
    """

    k: int
    seed: int
    fold_of: Dict[str, int]
    country_of: Dict[str, str]

    def _in_scope(self, subject: str, country: str) -> bool:
        return country == WHOLE or self.country_of[subject] == country

    def test_subjects(self, fold: int, country: str = WHOLE) -> List[str]:
        return sorted(s for s, f in self.fold_of.items() if f == fold and self._in_scope(s, country))

    def train_subjects(self, fold: int, country: str = WHOLE) -> List[str]:
        return sorted(s for s, f in self.fold_of.items() if f != fold and self._in_scope(s, country))

    def to_dict(self) -> Dict[str, object]:
        return {"k": self.k, "seed": self.seed, "fold_of": dict(sorted(self.fold_of.items())), "country_of": dict(sorted(self.country_of.items()))}


def make_folds(subjects: Mapping[str, str], k: int = N_FOLDS, seed: int = 0) -> FoldPlan:
    """Shuffle each country's subjects and deal them round-robin into k folds."""
    if k < 2:
        raise FoldPlanError(f"k must be at least 2, got {k}.")
    by_country: Dict[str, List[str]] = {}
    for subject, country in subjects.items():
        by_country.setdefault(country, []).append(subject)
    short = {c: len(s) for c, s in by_country.items() if len(s) < k}
    if short:
        raise FoldPlanError(f"each country needs at least {k} subjects for {k} folds; got {short}.")

    fold_of: Dict[str, int] = {}
    countries = sorted(by_country)
    for country, child in zip(countries, np.random.SeedSequence(seed).spawn(len(countries))):
        rng = np.random.default_rng(child)
        shuffled = rng.permutation(sorted(by_country[country]))
        for position, subject in enumerate(shuffled):
            fold_of[str(subject)] = position % k
    return FoldPlan(k=k, seed=seed, fold_of=fold_of, country_of=dict(subjects))


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> np.ndarray:
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return matrix


def per_class_recall(confusion: np.ndarray) -> np.ndarray:
    """Recall per class, NaN for classes without true samples."""
    cm = np.asarray(confusion, dtype=float)
    support = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(support > 0, np.diag(cm) / np.where(support > 0, support, 1.0), np.nan)


def uar(confusion: np.ndarray) -> float:
    """Mean recall over the classes present in the test split."""
    cm = np.asarray(confusion, dtype=float)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise MetricError(f"confusion matrix must be square, got shape {cm.shape}.")
    if cm.sum() == 0:
        raise MetricError("confusion matrix is all zeros.")
    return float(np.nanmean(per_class_recall(cm)))


@dataclass(frozen=True, slots=True)
class ExperimentSpec:
    name: str
    label_type: str
    modalities: Tuple[str, ...]
    train_country: str = WHOLE
    test_country: str = WHOLE
    train_speaking: str = "all"
    test_speaking: str = "all"
    epochs: Optional[int] = None
    budget: Optional[int] = None

    def __post_init__(self) -> None:
        for country in (self.train_country, self.test_country):
            if country not in COUNTRIES and country != WHOLE:
                raise ValueError(f"country must be one of {COUNTRIES + (WHOLE,)}, got {country!r}.")
        for regime in (self.train_speaking, self.test_speaking):
            if regime not in SPEAKING_REGIMES:
                raise ValueError(f"speaking regime must be one of {SPEAKING_REGIMES}, got {regime!r}.")
        if not self.modalities or set(self.modalities) - set(MODALITY_ORDER):
            raise ValueError(f"modalities must be a non-empty subset of {MODALITY_ORDER}, got {self.modalities}.")

    @property
    def modality_key(self) -> str:
        return "+".join(m for m in MODALITY_ORDER if m in self.modalities)

    def test_set_key(self) -> Tuple[str, str, str]:
        return (self.label_type, self.test_country, self.test_speaking)

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "ExperimentSpec":
        values = dict(data)
        values["modalities"] = tuple(values["modalities"])
        return cls(**values)


@dataclass(slots=True)
class EvalReport:
    """Outcome of one experiment over every run and fold."""

    spec: ExperimentSpec
    classes: Tuple[str, ...]
    arch: str
    uar_by_eval: Dict[str, float] = field(default_factory=dict)
    confusions: Dict[str, List[List[int]]] = field(default_factory=dict)
    train_sizes: List[int] = field(default_factory=list)
    test_sizes: List[int] = field(default_factory=list)
    skipped: List[str] = field(default_factory=list)
    selection: Dict[str, float] = field(default_factory=dict)
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def uars(self) -> np.ndarray:
        return np.array([self.uar_by_eval[k] for k in sorted(self.uar_by_eval)], dtype=float)

    @property
    def n_evaluations(self) -> int:
        return len(self.uar_by_eval)

    @property
    def uar_mean(self) -> float:
        return float(self.uars.mean()) if self.n_evaluations else float("nan")

    @property
    def uar_sem(self) -> float:
        """Sample SD of the evaluations over the square root of their number."""
        n = self.n_evaluations
        if n < 2:
            return float("nan") if n == 0 else 0.0
        return float(self.uars.std(ddof=1) / np.sqrt(n))

    @property
    def class_accuracy(self) -> Dict[str, float]:
        if not self.confusions:
            return {c: float("nan") for c in self.classes}
        recalls = np.vstack([per_class_recall(np.asarray(cm)) for cm in self.confusions.values()])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            means = np.nanmean(recalls, axis=0)
        return {c: float(v) for c, v in zip(self.classes, means)}

    @property
    def mean_train_size(self) -> float:
        return float(np.mean(self.train_sizes)) if self.train_sizes else 0.0

    @property
    def mean_test_size(self) -> float:
        return float(np.mean(self.test_sizes)) if self.test_sizes else 0.0

    def to_dict(self) -> Dict[str, object]:
        spec = asdict(self.spec)
        spec["modalities"] = list(self.spec.modalities)
        return {
            "spec": spec,
            "classes": list(self.classes),
            "arch": self.arch,
            "uar_by_eval": dict(sorted(self.uar_by_eval.items())),
            "confusions": dict(sorted(self.confusions.items())),
            "train_sizes": list(self.train_sizes),
            "test_sizes": list(self.test_sizes),
            "skipped": list(self.skipped),
            "selection": dict(self.selection),
            "summary": {"uar_mean": self.uar_mean, "uar_sem": self.uar_sem, "class_accuracy": self.class_accuracy},
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "EvalReport":
        return cls(
            spec=ExperimentSpec.from_dict(data["spec"]),
            classes=tuple(data["classes"]),
            arch=str(data["arch"]),
            uar_by_eval={str(k): float(v) for k, v in dict(data["uar_by_eval"]).items()},
            confusions={str(k): v for k, v in dict(data.get("confusions", {})).items()},
            train_sizes=[int(v) for v in data.get("train_sizes", [])],
            test_sizes=[int(v) for v in data.get("test_sizes", [])],
            skipped=list(data.get("skipped", [])),
            selection={str(k): float(v) for k, v in dict(data.get("selection", {})).items()},
            metadata=dict(data.get("metadata", {})),
        )


def eval_key(run: int, fold: int) -> str:
    return f"r{run}_f{fold:02d}"


def mlp_trainer(config: TrainConfig) -> Trainer:
    """Trainer that fits the numpy MLP and predicts through its stored normaliser."""

    def _train(arch: str, x: np.ndarray, y: np.ndarray, classes: Sequence[str], seed: int) -> Predictor:
        model = fit_classifier(x, list(y), classes, arch, config, seed).model
        return lambda features: predict(model, features)

    return _train


def _row_mask(matrix: SampleMatrix, subjects: Sequence[str], country: str, speaking: str) -> np.ndarray:
    wanted = set(subjects)
    mask = np.array([s in wanted for s in matrix.subjects()], dtype=bool)
    if country != WHOLE:
        mask &= matrix.countries() == country
    if speaking == "speech":
        mask &= matrix.speaking()
    elif speaking == "silence":
        mask &= ~matrix.speaking()
    labels = matrix.labels()
    mask &= np.array([label is not None for label in labels], dtype=bool)
    return mask


def model_select(
    splits: Sequence[Tuple[np.ndarray, np.ndarray, np.ndarray]],
    candidates: Sequence[str],
    classes: Sequence[str],
    trainer: Trainer,
    seed: int,
    validation_fraction: float = VALIDATION_FRACTION,
) -> Tuple[str, Dict[str, float]]:
    """
    Pick the candidate with the best mean validation UAR over the folds.

    Each split is (features, labels, subjects) of one fold's training part;
    a random subject-level fraction of it is held out for validation.
    """
    candidates = [ARCH_ALIASES.get(c, c) for c in candidates]
    if not candidates:
        raise ValueError("model selection needs at least one candidate.")
    if len(candidates) == 1:
        return candidates[0], {candidates[0]: float("nan")}
    if not 0.0 < validation_fraction < 1.0:
        raise ValueError(f"validation fraction must lie in (0, 1), got {validation_fraction}.")

    index = {c: i for i, c in enumerate(classes)}
    scores: Dict[str, List[float]] = {c: [] for c in candidates}
    fold_seeds = np.random.SeedSequence(seed).spawn(len(splits))
    for fold, ((x, y, subjects), fold_seed) in enumerate(zip(splits, fold_seeds)):
        rng = np.random.default_rng(fold_seed)
        unique = np.array(sorted(set(subjects.tolist())), dtype=object)
        n_val = max(1, int(round(validation_fraction * len(unique))))
        if len(unique) < 2:
            _LOGGER.warning("Fold {} has a single training subject; skipped in model selection.", fold)
            continue
        held_out = set(rng.choice(unique, size=min(n_val, len(unique) - 1), replace=False).tolist())
        val = np.array([s in held_out for s in subjects], dtype=bool)
        y_val = np.array([index[label] for label in y[val]], dtype=np.int64)
        absent = [c for c in classes if c not in set(y[val].tolist())]
        if absent:
            _LOGGER.warning("Validation split of fold {} has no samples of {}; excluded from its UAR.", fold, absent)
        train_seed = int(rng.integers(2**31))
        for candidate in candidates:
            predictor = trainer(candidate, x[~val], y[~val], classes, train_seed)
            scores[candidate].append(uar(confusion_matrix(y_val, predictor(x[val]), len(classes))))

    means = {c: float(np.mean(v)) if v else float("nan") for c, v in scores.items()}
    ranked = sorted(candidates, key=lambda c: (-np.nan_to_num(means[c], nan=-1.0), candidates.index(c)))
    _LOGGER.info("Model selection: {} (validation UAR {}).", ranked[0], {c: round(v, 4) for c, v in means.items()})
    return ranked[0], means


def run_experiment(
    matrix: SampleMatrix,
    spec: ExperimentSpec,
    plan: FoldPlan,
    *,
    trainer: Trainer,
    candidates: Sequence[str] = ("100-20",),
    n_runs: int = N_RUNS,
    seed: int = 0,
    validation_fraction: float = VALIDATION_FRACTION,
    refit: Optional[FoldRefit] = None,
) -> EvalReport:
    """
    Evaluate one experiment on every fold of the shared plan, ``n_runs`` times.

    Training rows come from the fold's training subjects in the training
    country and speaking regime; test rows from the fold's test subjects in
    the test country and regime. Empty folds are skipped with a warning.

    When the experiment uses A and ``refit`` is given, fold f's rows pass
    through ``refit(rows, f, subjects outside fold f)`` first, so features
    learned from labels only ever see the fold's training subjects.
    """
    if matrix.label_type != spec.label_type:
        raise ValueError(f"matrix holds {matrix.label_type} rows but the experiment needs {spec.label_type}.")
    classes = reduced_labels(spec.label_type)
    features = matrix.features(spec.modalities)
    labels = matrix.labels()
    subjects = matrix.subjects()
    index = {c: i for i, c in enumerate(classes)}

    def fold_rows(fold: int, mask: np.ndarray) -> np.ndarray:
        rows = features[mask]
        if refit is None or "A" not in spec.modalities:
            return rows
        return refit(rows, fold, plan.train_subjects(fold))

    selection_seed, *run_seeds = np.random.SeedSequence(seed).spawn(n_runs + 1)
    splits = []
    for fold in range(plan.k):
        mask = _row_mask(matrix, plan.train_subjects(fold, spec.train_country), spec.train_country, spec.train_speaking)
        if mask.any():
            splits.append((fold_rows(fold, mask), labels[mask], subjects[mask]))
    arch, selection = model_select(
        splits, candidates, classes, trainer, int(selection_seed.generate_state(1)[0]), validation_fraction
    )

    report = EvalReport(spec=spec, classes=tuple(classes), arch=arch, selection=selection)
    for run, run_seed in enumerate(run_seeds):
        fold_seeds = run_seed.generate_state(plan.k)
        for fold in range(plan.k):
            key = eval_key(run, fold)
            train_mask = _row_mask(matrix, plan.train_subjects(fold, spec.train_country), spec.train_country, spec.train_speaking)
            test_mask = _row_mask(matrix, plan.test_subjects(fold, spec.test_country), spec.test_country, spec.test_speaking)
            if not test_mask.any() or not train_mask.any():
                _LOGGER.warning("{} {}: empty {} split, skipped.", spec.name, key, "test" if not test_mask.any() else "training")
                report.skipped.append(key)
                continue
            predictor = trainer(arch, fold_rows(fold, train_mask), labels[train_mask], classes, int(fold_seeds[fold]))
            y_true = np.array([index[label] for label in labels[test_mask]], dtype=np.int64)
            cm = confusion_matrix(y_true, predictor(fold_rows(fold, test_mask)), len(classes))
            report.uar_by_eval[key] = uar(cm)
            report.confusions[key] = cm.tolist()
            report.train_sizes.append(int(train_mask.sum()))
            report.test_sizes.append(int(test_mask.sum()))

    _LOGGER.info(
        "{}: UAR {:.4f} +/- {:.4f} over {} evaluations ({} skipped).",
        spec.name,
        report.uar_mean,
        report.uar_sem,
        report.n_evaluations,
        len(report.skipped),
    )
    return report
