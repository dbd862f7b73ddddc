"""
Speech enrichment: small classifier heads trained on segment embeddings whose
logits are appended to the embedding itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from affectfuse.affectfuse import logger as app_logger
from shared.label_sets import EMBEDDING_DIM, ENRICHED_DIM

from .classifier import MLPModel, TrainConfig, encode_labels, init_model, mlp_logits, train

_LOGGER = app_logger.get_logger()

HEAD_HIDDEN = 64
HEAD_LEARNING_RATE = 1e-3
HEAD_STEPS = 5000
HEAD_BATCH = 64
MINORITY_WEIGHT = 4.0
HEAD_OUTPUTS = ("logits", "log_odds")


class EnrichmentWidthError(ValueError):
    """Raised when the configured heads do not fill the declared feature width."""


@dataclass(frozen=True, slots=True)
class HeadSpec:
    """
    One enrichment head.

    ``groups`` maps each head class to the source labels it absorbs; source
    labels outside every group do not train the head. A two-class head with
    ``output="log_odds"`` contributes the single value z1 - z0.
    """

    name: str
    channel: str
    groups: Tuple[Tuple[str, Tuple[str, ...]], ...]
    output: str = "logits"

    def __post_init__(self) -> None:
        if self.output not in HEAD_OUTPUTS:
            raise EnrichmentWidthError(f"head {self.name}: output must be one of {HEAD_OUTPUTS}, got {self.output!r}.")
        if len(self.groups) < 2:
            raise EnrichmentWidthError(f"head {self.name} needs at least two classes.")
        if self.output == "log_odds" and len(self.groups) != 2:
            raise EnrichmentWidthError(f"head {self.name}: log_odds output needs exactly two classes.")

    @property
    def classes(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.groups)

    @property
    def width(self) -> int:
        return 1 if self.output == "log_odds" else len(self.groups)

    def map_label(self, label: Optional[str]) -> Optional[str]:
        for name, members in self.groups:
            if label in members:
                return name
        return None


DEFAULT_HEADS: Tuple[HeadSpec, ...] = (
    HeadSpec("categorical", "audio", (("calm", ("calm",)), ("pleased", ("pleased",)), ("puzzled", ("puzzled",)))),
    HeadSpec("valence", "valence", (("positive", ("positive",)), ("other", ("neutral", "negative")))),
    HeadSpec("arousal", "arousal", (("neutral", ("neutral",)), ("aroused", ("excited", "slightly_excited"))), "log_odds"),
    HeadSpec("dominance", "dominance", (("neither", ("neither",)), ("other", ("dominant", "defensive"))), "log_odds"),
)


def head_from_dict(data: Mapping[str, object]) -> HeadSpec:
    groups = tuple((str(name), tuple(members)) for name, members in dict(data["groups"]).items())
    return HeadSpec(str(data["name"]), str(data["channel"]), groups, str(data.get("output", "logits")))


@dataclass(slots=True)
class EnrichmentHeads:
    specs: Tuple[HeadSpec, ...]
    models: List[MLPModel]
    train_accuracy: Dict[str, float] = field(default_factory=dict)

    @property
    def width(self) -> int:
        return sum(spec.width for spec in self.specs)


def check_head_widths(specs: Sequence[HeadSpec], target_width: int = ENRICHED_DIM, input_width: int = EMBEDDING_DIM) -> None:
    total = sum(spec.width for spec in specs)
    if input_width + total != target_width:
        report = ", ".join(f"{spec.name}={spec.width}" for spec in specs)
        raise EnrichmentWidthError(
            f"head outputs sum to {total} ({report}) but {target_width} - {input_width} = "
            f"{target_width - input_width} are needed."
        )


def init_heads(specs: Sequence[HeadSpec], seed: int, *, zero_output: bool = False) -> EnrichmentHeads:
    seeds = np.random.SeedSequence(seed).generate_state(len(specs))
    models = [
        init_model(
            (EMBEDDING_DIM, HEAD_HIDDEN, len(spec.groups)),
            int(s),
            dropout_rate=0.0,
            zero_output=zero_output,
            classes=spec.classes,
        )
        for spec, s in zip(specs, seeds)
    ]
    return EnrichmentHeads(specs=tuple(specs), models=models)


def _minority_weights(encoded: np.ndarray, n_classes: int) -> Dict[int, float]:
    counts = np.bincount(encoded, minlength=n_classes)
    majority = int(np.argmax(counts))
    return {c: (1.0 if c == majority else MINORITY_WEIGHT) for c in range(n_classes) if counts[c] > 0}


def fit_heads(
    embeddings: np.ndarray,
    labels: Mapping[str, Sequence[Optional[str]]],
    specs: Sequence[HeadSpec],
    seed: int,
    *,
    steps: int = HEAD_STEPS,
) -> EnrichmentHeads:
    """
    Train every head on the segments whose source label maps into it.

    Minority classes are drawn four times as often as the head's largest
    class.
    """
    x = np.asarray(embeddings, dtype=float)
    heads = init_heads(specs, seed)
    train_seeds = np.random.SeedSequence(seed).spawn(len(specs))
    for spec, model, train_seed in zip(heads.specs, heads.models, train_seeds):
        if spec.channel not in labels:
            raise EnrichmentWidthError(f"head {spec.name} needs {spec.channel} labels, which were not supplied.")
        mapped = [spec.map_label(label) for label in labels[spec.channel]]
        rows = np.array([i for i, m in enumerate(mapped) if m is not None], dtype=np.int64)
        if rows.size == 0:
            _LOGGER.warning("Head {} has no training segments; it stays at its initial weights.", spec.name)
            continue
        encoded = encode_labels([mapped[i] for i in rows], spec.classes)
        weights = _minority_weights(encoded, len(spec.groups))
        config = TrainConfig(
            learning_rate=HEAD_LEARNING_RATE,
            batch_size=HEAD_BATCH,
            budget=HEAD_BATCH * 100,
            oversample={spec.classes[c]: w for c, w in weights.items()},
            steps=steps,
        )
        train(model, x[rows], encoded, config, int(train_seed.generate_state(1)[0]))
        accuracy = float(np.mean(np.argmax(mlp_logits(model, x[rows]), axis=1) == encoded))
        heads.train_accuracy[spec.name] = accuracy
        _LOGGER.info("Enrichment head {} trained on {} segments; train accuracy {:.3f}.", spec.name, rows.size, accuracy)
    return heads


def head_outputs(heads: EnrichmentHeads, embeddings: np.ndarray) -> np.ndarray:
    x = np.asarray(embeddings, dtype=float)
    blocks = []
    for spec, model in zip(heads.specs, heads.models):
        logits = mlp_logits(model, x)
        if spec.output == "log_odds":
            logits = logits[:, 1:2] - logits[:, 0:1]
        blocks.append(logits)
    return np.hstack(blocks) if blocks else np.zeros((len(x), 0))


def enrich(heads: EnrichmentHeads, embeddings: np.ndarray, target_width: int = ENRICHED_DIM) -> np.ndarray:
    """Append head outputs to the embeddings and check the declared width."""
    x = np.atleast_2d(np.asarray(embeddings, dtype=float))
    if x.shape[1] != EMBEDDING_DIM:
        raise EnrichmentWidthError(f"embeddings have {x.shape[1]} dimensions, expected {EMBEDDING_DIM}.")
    check_head_widths(heads.specs, target_width)
    out = np.hstack([x, head_outputs(heads, x)])
    if out.shape[1] != target_width:
        raise EnrichmentWidthError(f"enriched width {out.shape[1]} differs from declared {target_width}.")
    return out


def speech_enrichment(
    embeddings: np.ndarray,
    labels: Mapping[str, Sequence[Optional[str]]],
    head_config: Sequence[HeadSpec] = DEFAULT_HEADS,
    seed: int = 0,
    *,
    target_width: int = ENRICHED_DIM,
    steps: int = HEAD_STEPS,
) -> Tuple[np.ndarray, EnrichmentHeads]:
    """Train the heads on per-segment embeddings and return the enriched features."""
    check_head_widths(head_config, target_width)
    heads = fit_heads(embeddings, labels, head_config, seed, steps=steps)
    return enrich(heads, embeddings, target_width), heads


@dataclass(slots=True)
class SegmentCorpus:
    """Per-segment embeddings of every subject with the labels the heads train on."""

    subjects: np.ndarray
    embeddings: np.ndarray
    labels: Dict[str, List[Optional[str]]]

    def __post_init__(self) -> None:
        self.subjects = np.asarray(self.subjects, dtype=object)
        self.embeddings = np.asarray(self.embeddings, dtype=float).reshape(len(self.subjects), EMBEDDING_DIM)
        for channel, values in self.labels.items():
            if len(values) != len(self.subjects):
                raise EnrichmentWidthError(f"{channel} has {len(values)} labels for {len(self.subjects)} segments.")

    def __len__(self) -> int:
        return len(self.subjects)

    def subset(self, subject_ids: Sequence[str]) -> Tuple[np.ndarray, Dict[str, List[Optional[str]]]]:
        rows = np.nonzero(np.isin(self.subjects, list(subject_ids)))[0]
        return self.embeddings[rows], {channel: [values[i] for i in rows] for channel, values in self.labels.items()}


class FoldEnrichment:
    """
    Enrichment heads refitted for each fold on that fold's training subjects.

    ``refresh`` recomputes the head-output columns of enriched rows (A block
    first) with heads that never saw a label of the fold's test subjects.
    Heads are cached per fold and training set, so every experiment sharing
    a fold plan reuses them.
    """

    def __init__(
        self,
        corpus: SegmentCorpus,
        head_config: Sequence[HeadSpec] = DEFAULT_HEADS,
        seed: int = 0,
        *,
        target_width: int = ENRICHED_DIM,
        steps: int = HEAD_STEPS,
    ):
        check_head_widths(head_config, target_width)
        self.corpus = corpus
        self.specs = tuple(head_config)
        self.seed = int(seed)
        self.target_width = target_width
        self.steps = steps
        self._heads: Dict[Tuple[int, Tuple[str, ...]], EnrichmentHeads] = {}

    def heads_for(self, fold: int, train_subjects: Sequence[str]) -> EnrichmentHeads:
        key = (int(fold), tuple(sorted(train_subjects)))
        if key not in self._heads:
            x, labels = self.corpus.subset(key[1])
            seed = int(np.random.SeedSequence([self.seed, key[0]]).generate_state(1)[0])
            _LOGGER.info("Fitting enrichment heads for fold {} on {} segments of {} subjects.", fold, len(x), len(key[1]))
            self._heads[key] = fit_heads(x, labels, self.specs, seed, steps=self.steps)
        return self._heads[key]

    def refresh(self, features: np.ndarray, fold: int, train_subjects: Sequence[str]) -> np.ndarray:
        out = np.array(features, dtype=float, copy=True)
        if out.ndim != 2 or out.shape[1] < self.target_width:
            raise EnrichmentWidthError(f"rows of shape {out.shape} do not start with a {self.target_width}-wide A block.")
        heads = self.heads_for(fold, train_subjects)
        out[:, EMBEDDING_DIM : self.target_width] = head_outputs(heads, out[:, :EMBEDDING_DIM])
        return out
