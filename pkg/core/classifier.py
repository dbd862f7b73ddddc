"""
Two-hidden-layer MLP classifiers in numpy: min-max normalisation, balanced
sampling, inverted dropout and Adam.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from affectfuse.affectfuse import logger as app_logger

_LOGGER = app_logger.get_logger()

MODEL_FORMAT_VERSION = 1

ARCHITECTURES: Dict[str, Tuple[int, int]] = {
    "100-20": (100, 20),
    "200-40": (200, 40),
    "500-100": (500, 100),
}
ARCH_ALIASES = {"L": "100-20", "M": "200-40", "H": "500-100"}

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
INIT_SCHEME = "he_uniform"


class ModelShapeError(ValueError):
    """Raised when inputs or parameters do not match the layer widths."""


class SamplerError(ValueError):
    """Raised for an unsatisfiable sampling request."""


class TrainingDivergedError(RuntimeError):
    """Raised when the loss stops being finite."""

    def __init__(self, epoch: int, step: int, loss: float, grad_norm: float):
        self.epoch = epoch
        self.step = step
        self.loss = loss
        self.grad_norm = grad_norm
        super().__init__(
            f"training diverged at epoch {epoch}, step {step}: loss={loss}, gradient norm={grad_norm}."
        )


def resolve_arch(arch: str) -> Tuple[int, int]:
    name = ARCH_ALIASES.get(arch, arch)
    if name not in ARCHITECTURES:
        raise ModelShapeError(
            f"unknown architecture {arch!r}; expected one of {sorted(ARCHITECTURES)} or {sorted(ARCH_ALIASES)}."
        )
    return ARCHITECTURES[name]


@dataclass(slots=True)
class Normalizer:
    """Per-feature min-max map fitted on a training split."""

    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Normalizer":
        x = np.asarray(features, dtype=float)
        if x.ndim != 2 or len(x) == 0:
            raise ModelShapeError(f"normalizer needs a non-empty 2D matrix, got shape {x.shape}.")
        return cls(minimum=x.min(axis=0), maximum=x.max(axis=0))

    def apply(self, features: np.ndarray) -> np.ndarray:
        """(x - min) / (max - min) without clamping; constant training columns map to 0."""
        x = np.asarray(features, dtype=float)
        if x.shape[-1] != self.minimum.size:
            raise ModelShapeError(f"normalizer fitted on {self.minimum.size} features, got {x.shape[-1]}.")
        span = self.maximum - self.minimum
        constant = span == 0
        out = (x - self.minimum) / np.where(constant, 1.0, span)
        return np.where(constant, 0.0, out)

    def to_dict(self) -> Dict[str, List[float]]:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[float]]) -> "Normalizer":
        return cls(minimum=np.asarray(data["min"], dtype=float), maximum=np.asarray(data["max"], dtype=float))


@dataclass(slots=True)
class MLPModel:
    """
    Fully connected ReLU network ending in a softmax layer.

    ``widths`` runs from the input dimension to the number of classes; the
    final MLPs use [d_in, h1, h2, n_classes] and the enrichment heads
    [1024, 64, n_logits].
    """

    widths: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    dropout_rate: float = 0.5
    rng_seed: int = 0
    classes: Tuple[str, ...] = ()
    normalizer: Optional[Normalizer] = None
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def d_in(self) -> int:
        return self.widths[0]

    @property
    def n_classes(self) -> int:
        return self.widths[-1]

    def parameters(self) -> List[np.ndarray]:
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


def init_model(
    widths: Sequence[int],
    seed: int,
    *,
    dropout_rate: float = 0.5,
    zero_output: bool = False,
    classes: Sequence[str] = (),
) -> MLPModel:
    """He-uniform weights (limit sqrt(6 / fan_in)) and zero biases."""
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or any(w <= 0 for w in widths):
        raise ModelShapeError(f"layer widths must be positive and at least two, got {widths}.")
    if not 0.0 <= dropout_rate < 1.0:
        raise ModelShapeError(f"dropout rate must be in [0, 1), got {dropout_rate}.")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for layer, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        last = layer == len(widths) - 2
        if last and zero_output:
            w = np.zeros((fan_in, fan_out))
        else:
            limit = math.sqrt(6.0 / fan_in)
            w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return MLPModel(
        widths=widths,
        weights=weights,
        biases=biases,
        dropout_rate=dropout_rate,
        rng_seed=int(seed),
        classes=tuple(classes),
        metadata={"init": INIT_SCHEME, "zero_output": zero_output},
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _as_batch(model: MLPModel, x: np.ndarray) -> np.ndarray:
    batch = np.atleast_2d(np.asarray(x, dtype=float))
    if batch.shape[1] != model.d_in:
        raise ModelShapeError(f"model expects {model.d_in} input features, got {batch.shape[1]}.")
    return batch


def _forward(
    model: MLPModel, x: np.ndarray, train_mode: bool, rng: Optional[np.random.Generator]
) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray], List[Optional[np.ndarray]]]:
    activations = [x]
    pre_activations: List[np.ndarray] = []
    masks: List[Optional[np.ndarray]] = []
    h = x
    n_layers = len(model.weights)
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        pre_activations.append(z)
        if layer == n_layers - 1:
            return z, activations, pre_activations, masks
        h = np.maximum(z, 0.0)
        mask = None
        if train_mode and model.dropout_rate > 0:
            if rng is None:
                raise ValueError("training-mode forward needs a random generator for dropout.")
            keep = 1.0 - model.dropout_rate
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
        masks.append(mask)
        activations.append(h)
    raise AssertionError("unreachable")


def mlp_logits(model: MLPModel, x: np.ndarray) -> np.ndarray:
    logits, _, _, _ = _forward(model, _as_batch(model, x), False, None)
    return logits


def mlp_forward(
    model: MLPModel, x: np.ndarray, train_mode: bool = False, rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    """Class probabilities; inverted dropout is applied only in training mode."""
    batch = _as_batch(model, x)
    logits, _, _, _ = _forward(model, batch, train_mode, rng)
    probs = softmax(logits)
    return probs[0] if np.asarray(x).ndim == 1 else probs


def loss_and_grads(
    model: MLPModel,
    x: np.ndarray,
    y: np.ndarray,
    *,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, List[np.ndarray]]:
    """Mean cross-entropy and its gradients, ordered like ``model.parameters()``."""
    batch = _as_batch(model, x)
    targets = np.asarray(y, dtype=np.int64)
    logits, activations, pre_activations, masks = _forward(model, batch, train_mode, rng)
    probs = softmax(logits)
    n = len(batch)
    loss = float(-np.mean(np.log(np.clip(probs[np.arange(n), targets], 1e-300, None))))

    delta = probs.copy()
    delta[np.arange(n), targets] -= 1.0
    delta /= n
    grads: List[np.ndarray] = [np.empty(0)] * (2 * len(model.weights))
    for layer in range(len(model.weights) - 1, -1, -1):
        grads[2 * layer] = activations[layer].T @ delta
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer == 0:
            break
        delta = delta @ model.weights[layer].T
        mask = masks[layer - 1]
        if mask is not None:
            delta = delta * mask
        delta = delta * (pre_activations[layer - 1] > 0)
    return loss, grads


def gradient_check(model: MLPModel, x: np.ndarray, y: np.ndarray, eps: float = 1e-6) -> List[float]:
    """Per-tensor relative error between analytic and central-difference gradients."""
    _, analytic = loss_and_grads(model, x, y)
    errors = []
    for param, grad in zip(model.parameters(), analytic):
        numeric = np.zeros_like(param)
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            original = param[idx]
            param[idx] = original + eps
            plus, _ = loss_and_grads(model, x, y)
            param[idx] = original - eps
            minus, _ = loss_and_grads(model, x, y)
            param[idx] = original
            numeric[idx] = (plus - minus) / (2 * eps)
        denom = max(np.linalg.norm(grad) + np.linalg.norm(numeric), 1e-12)
        errors.append(float(np.linalg.norm(grad - numeric) / denom))
    return errors


@dataclass(slots=True)
class Adam:
    learning_rate: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


@dataclass(slots=True)
class TrainConfig:
    """Optimisation settings; ``steps`` caps the number of updates when set."""

    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 100
    budget: int = 7500
    oversample: Dict[str, float] = field(default_factory=dict)
    steps: Optional[int] = None
    dropout_rate: float = 0.5

    def __post_init__(self) -> None:
        if self.budget <= 0:
            raise SamplerError(f"per-epoch sample budget must be positive, got {self.budget}.")
        if self.batch_size <= 0 or self.epochs <= 0 or self.learning_rate <= 0:
            raise ValueError(
                f"batch_size, epochs and learning_rate must be positive; got {self.batch_size}, "
                f"{self.epochs}, {self.learning_rate}."
            )
        if self.steps is not None and self.steps <= 0:
            raise ValueError(f"steps must be positive when set, got {self.steps}.")


@dataclass(slots=True)
class TrainResult:
    model: MLPModel
    loss_curve: List[float]
    first_batch_loss: float
    steps: int


def balanced_sampler(
    labels: Sequence,
    per_epoch_budget: int,
    oversample: Optional[Mapping[object, float]] = None,
    seed: Union[int, np.random.Generator, None] = None,
    *,
    classes: Optional[Sequence] = None,
) -> np.ndarray:
    """
    One epoch of sample indices.

    The budget is split over classes in proportion to their draw weight
    (1 unless ``oversample`` says otherwise), so classes are drawn equally
    often by default. Within a class, indices are consumed from reshuffled
    permutations, so a class with n members and quota q uses each index
    q/n times rounded up or down. The stream is shuffled before returning.
    """
    if per_epoch_budget <= 0:
        raise SamplerError(f"per-epoch budget must be positive, got {per_epoch_budget}.")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    y = np.asarray(labels, dtype=object)
    weights = dict(oversample or {})
    if any(f <= 0 for f in weights.values()):
        raise SamplerError(f"oversample factors must be positive, got {weights}.")

    present = list(dict.fromkeys(y.tolist()))
    wanted = list(classes) if classes is not None else sorted(present, key=str)
    members = {c: np.nonzero(y == c)[0] for c in wanted}
    empty = [c for c in wanted if len(members[c]) == 0 and weights.get(c, 1.0) > 0]
    if empty:
        raise SamplerError(f"classes {empty} have no samples but a non-zero share of the budget.")

    share = np.array([weights.get(c, 1.0) for c in wanted], dtype=float)
    exact = per_epoch_budget * share / share.sum()
    quotas = np.floor(exact).astype(np.int64)
    remainder = per_epoch_budget - int(quotas.sum())
    if remainder:
        order = rng.permutation(len(wanted))
        fractions = (exact - quotas)[order]
        quotas[order[np.argsort(-fractions, kind="stable")[:remainder]]] += 1

    stream = []
    for c, quota in zip(wanted, quotas):
        idx = members[c]
        reps = int(np.ceil(quota / len(idx))) if quota else 0
        drawn = np.concatenate([rng.permutation(idx) for _ in range(reps)]) if reps else np.zeros(0, dtype=np.int64)
        stream.append(drawn[:quota])
    out = np.concatenate(stream).astype(np.int64)
    return out[rng.permutation(len(out))]


def train(
    model: MLPModel,
    features: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig,
    seed: int,
) -> TrainResult:
    """
    Adam on cross-entropy, one sampler budget per epoch.

    ``features`` must already be normalised and ``targets`` encoded as
    0..C-1; the per-epoch mean loss is recorded. The model is updated in
    place and returned in the result.
    """
    x = _as_batch(model, features)
    y = np.asarray(targets, dtype=np.int64)
    if len(x) != len(y):
        raise ModelShapeError(f"{len(x)} feature rows but {len(y)} targets.")
    if len(y) and (y.min() < 0 or y.max() >= model.n_classes):
        raise ModelShapeError(f"targets must lie in 0..{model.n_classes - 1}.")
    sampler_seed, dropout_seed = np.random.SeedSequence(seed).spawn(2)
    sampler_rng = np.random.default_rng(sampler_seed)
    dropout_rng = np.random.default_rng(dropout_seed)
    weights = {model.classes.index(c) if c in model.classes else c: f for c, f in config.oversample.items()}

    optimizer = Adam(config.learning_rate)
    params = model.parameters()
    loss_curve: List[float] = []
    first_batch_loss = float("nan")
    step = 0
    epochs = config.epochs
    if config.steps is not None:
        epochs = int(math.ceil(config.steps * config.batch_size / config.budget))
    for epoch in range(epochs):
        order = balanced_sampler(y, config.budget, weights, sampler_rng)
        batch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads = loss_and_grads(model, x[batch], y[batch], train_mode=True, rng=dropout_rng)
            if step == 0:
                first_batch_loss = loss
            if not np.isfinite(loss):
                grad_norm = float(math.sqrt(sum(float(np.sum(g * g)) for g in grads)))
                raise TrainingDivergedError(epoch, step, loss, grad_norm)
            optimizer.step(params, grads)
            batch_losses.append(loss)
            step += 1
            if config.steps is not None and step >= config.steps:
                break
        loss_curve.append(float(np.mean(batch_losses)))
        if config.steps is not None and step >= config.steps:
            break
    _LOGGER.debug("Trained {} for {} epochs ({} steps); final loss {:.4f}.", model.widths, len(loss_curve), step, loss_curve[-1])
    model.metadata.update(
        {
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "epochs": len(loss_curve),
            "budget": config.budget,
            "adam": {"beta1": ADAM_BETA1, "beta2": ADAM_BETA2, "eps": ADAM_EPS},
            "train_seed": int(seed),
        }
    )
    return TrainResult(model=model, loss_curve=loss_curve, first_batch_loss=first_batch_loss, steps=step)


def fit_classifier(
    features: np.ndarray,
    labels: Sequence[str],
    classes: Sequence[str],
    arch: str,
    config: TrainConfig,
    seed: int,
) -> TrainResult:
    """Fit a normaliser on the training rows, then initialise and train an MLP."""
    h1, h2 = resolve_arch(arch)
    normalizer = Normalizer.fit(features)
    encoded = encode_labels(labels, classes)
    init_seed, train_seed = np.random.SeedSequence(seed).generate_state(2)
    model = init_model(
        (np.asarray(features).shape[1], h1, h2, len(classes)),
        int(init_seed),
        dropout_rate=config.dropout_rate,
        classes=classes,
    )
    model.normalizer = normalizer
    model.metadata["arch"] = ARCH_ALIASES.get(arch, arch)
    return train(model, normalizer.apply(features), encoded, config, int(train_seed))


def encode_labels(labels: Sequence[str], classes: Sequence[str]) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    unknown = sorted({str(label) for label in labels if label not in index})
    if unknown:
        raise ModelShapeError(f"labels {unknown} are not among the model classes {list(classes)}.")
    return np.array([index[label] for label in labels], dtype=np.int64)


def predict(model: MLPModel, features: np.ndarray) -> np.ndarray:
    """Predicted class indices; the stored normaliser is applied first."""
    x = np.asarray(features, dtype=float)
    if model.normalizer is not None:
        x = model.normalizer.apply(x)
    return np.argmax(mlp_forward(model, np.atleast_2d(x)), axis=1)


def model_to_dict(model: MLPModel) -> Dict[str, object]:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "widths": list(model.widths),
        "dropout_rate": model.dropout_rate,
        "rng_seed": model.rng_seed,
        "classes": list(model.classes),
        "normalizer": model.normalizer.to_dict() if model.normalizer is not None else None,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "metadata": model.metadata,
    }


def model_from_dict(data: Mapping[str, object]) -> MLPModel:
    version = data.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelShapeError(f"unsupported model format version {version!r}.")
    widths = tuple(int(w) for w in data["widths"])
    weights = [np.asarray(w, dtype=float).reshape(a, b) for w, a, b in zip(data["weights"], widths[:-1], widths[1:])]
    biases = [np.asarray(b, dtype=float).reshape(-1) for b in data["biases"]]
    for b, width in zip(biases, widths[1:]):
        if b.size != width:
            raise ModelShapeError(f"bias of width {b.size} does not match layer width {width}.")
    normalizer = data.get("normalizer")
    return MLPModel(
        widths=widths,
        weights=weights,
        biases=biases,
        dropout_rate=float(data["dropout_rate"]),
        rng_seed=int(data["rng_seed"]),
        classes=tuple(data.get("classes", ())),
        normalizer=Normalizer.from_dict(normalizer) if normalizer else None,
        metadata=dict(data.get("metadata", {})),
    )


def save_model(model: MLPModel, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model), indent=1, sort_keys=True), encoding="utf-8")


def load_model(path: Path) -> MLPModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
