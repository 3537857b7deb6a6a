"""From-scratch multinomial logistic regression over window features.

Kept deliberately small: full-batch gradient descent on softmax
cross-entropy with L2 on the weights (bias excluded), a train-set-only
standardizer, and JSON persistence. Class count is the gain table size
plus one for the no-good-gain marker.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DivergenceError, ModelFormatError, UsageError
from .signalgen import WindowSample

log = logging.getLogger(__name__)

MODEL_SCHEMA = "agcml.model.v1"

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class FeatureScaler:
    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.mean) != len(self.std):
            raise UsageError("scaler mean/std length mismatch")
        if any(s < STD_FLOOR for s in self.std):
            raise UsageError(f"scaler std below floor {STD_FLOOR}")

    @property
    def dim(self) -> int:
        return len(self.mean)

    @classmethod
    def fit(cls, features: np.ndarray) -> "FeatureScaler":
        """Train-set-only statistics; constant features get the std floor
        so they standardize to exactly 0."""
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        std = np.where(std < STD_FLOOR, STD_FLOOR, std)
        return cls(mean=tuple(float(m) for m in mean), std=tuple(float(s) for s in std))

    @classmethod
    def identity(cls, dim: int) -> "FeatureScaler":
        return cls(mean=(0.0,) * dim, std=(1.0,) * dim)

    def transform(self, features: np.ndarray) -> np.ndarray:
        if features.shape[-1] != self.dim:
            raise UsageError(
                f"feature dim {features.shape[-1]} does not match scaler dim {self.dim}"
            )
        return (features - np.asarray(self.mean)) / np.asarray(self.std)


FeatureInput = Union[WindowSample, Sequence[float], np.ndarray]


def _raw_features(window: FeatureInput) -> np.ndarray:
    if isinstance(window, WindowSample):
        return np.asarray(window.features, dtype=float)
    return np.asarray(window, dtype=float)


def encode_features(window: FeatureInput, scaler: FeatureScaler) -> np.ndarray:
    """Flattened (packet-major, metric-minor) window, standardized."""
    return scaler.transform(_raw_features(window))


def _feature_matrix(samples: Sequence[WindowSample]) -> np.ndarray:
    return np.asarray([s.features for s in samples], dtype=float)


def _labels(samples: Sequence[WindowSample]) -> np.ndarray:
    return np.asarray([s.label for s in samples], dtype=int)


@dataclass(frozen=True)
class TrainParams:
    learning_rate: float = 0.5
    epochs: int = 2000
    l2: float = 1e-4
    seed: int = 0
    init_scale: float = 0.01
    # Per-class loss weights: None = uniform, "balanced" = inverse class
    # frequency on the training set, or an explicit per-class tuple.
    # Balanced is the default: the gain classes between full-scale blocker
    # and no blocker are rare in the pattern mix but are exactly the ones
    # the runtime must get right, and uniform weighting starves them.
    class_weights: Union[None, str, tuple[float, ...]] = "balanced"

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise UsageError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise UsageError("epochs must be >= 1")
        if self.l2 < 0:
            raise UsageError("l2 must be >= 0")
        if isinstance(self.class_weights, str) and self.class_weights != "balanced":
            raise UsageError(
                f"class_weights must be None, 'balanced' or a tuple, got {self.class_weights!r}"
            )


@dataclass(frozen=True)
class TrainedModel:
    scaler: FeatureScaler
    weights: tuple[tuple[float, ...], ...]  # class-major: (classes, features)
    bias: tuple[float, ...]
    class_count: int
    gain_count: int
    window_len: int
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.weights) != self.class_count or len(self.bias) != self.class_count:
            raise UsageError("weight/bias rows must match class count")
        if any(len(row) != self.scaler.dim for row in self.weights):
            raise UsageError("weight columns must match scaler dim")

    def weight_matrix(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def bias_vector(self) -> np.ndarray:
        return np.asarray(self.bias, dtype=float)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _scores(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w.T + b


def loss_and_grad(
    x: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
    l2: float,
    sample_weights: Optional[np.ndarray] = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Weighted mean cross-entropy plus 0.5*l2*||w||^2 and its gradient."""
    n = x.shape[0]
    probs = softmax(_scores(x, w, b))
    if sample_weights is None:
        sample_weights = np.ones(n)
    total = sample_weights.sum()
    picked = np.clip(probs[np.arange(n), y], 1e-300, None)
    data_loss = float((-np.log(picked) * sample_weights).sum() / total)
    loss = data_loss + 0.5 * l2 * float((w * w).sum())

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta *= (sample_weights / total)[:, None]
    grad_w = delta.T @ x + l2 * w
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def train(
    train_samples: Sequence[WindowSample],
    val_samples: Sequence[WindowSample],
    params: TrainParams,
    gain_count: int,
    window_len: int,
) -> tuple[TrainedModel, list[tuple[int, float, float]]]:
    """Full-batch gradient descent; returns the model snapshotted at the
    best validation accuracy epoch plus the (epoch, train_loss,
    val_accuracy) curve. Deterministic per seed."""
    if not train_samples:
        raise UsageError("empty training set")
    class_count = gain_count + 1

    x = _feature_matrix(train_samples)
    y = _labels(train_samples)
    if y.min() < 0 or y.max() >= class_count:
        raise UsageError(f"labels outside 0..{class_count - 1}")
    missing = sorted(set(range(class_count)) - set(int(c) for c in np.unique(y)))
    if missing:
        log.warning("training set has no samples for classes %s", missing)

    scaler = FeatureScaler.fit(x)
    xs = scaler.transform(x)

    sample_weights: Optional[np.ndarray] = None
    if params.class_weights == "balanced":
        counts = np.bincount(y, minlength=class_count).astype(float)
        present = counts > 0
        weights = np.zeros(class_count)
        weights[present] = len(y) / (present.sum() * counts[present])
        sample_weights = weights[y]
    elif params.class_weights is not None:
        if len(params.class_weights) != class_count:
            raise UsageError(
                f"class_weights needs {class_count} entries, got {len(params.class_weights)}"
            )
        sample_weights = np.asarray([params.class_weights[c] for c in y], dtype=float)

    if val_samples:
        xv = scaler.transform(_feature_matrix(val_samples))
        yv = _labels(val_samples)
    else:
        log.warning("no validation samples; snapshotting the final epoch")
        xv = yv = None

    rng = np.random.default_rng(params.seed)
    w = rng.normal(0.0, params.init_scale, size=(class_count, xs.shape[1]))
    b = np.zeros(class_count)

    curve: list[tuple[int, float, float]] = []
    best_acc = -1.0
    best_w, best_b, best_epoch = w.copy(), b.copy(), 0
    final_loss = float("nan")

    for epoch in range(1, params.epochs + 1):
        loss, grad_w, grad_b = loss_and_grad(xs, y, w, b, params.l2, sample_weights)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite training loss at epoch {epoch}")
        w -= params.learning_rate * grad_w
        b -= params.learning_rate * grad_b
        final_loss = loss

        if xv is not None:
            val_acc = float((np.argmax(_scores(xv, w, b), axis=1) == yv).mean())
        else:
            val_acc = float("nan")
        curve.append((epoch, loss, val_acc))

        if xv is not None and val_acc > best_acc:
            best_acc = val_acc
            best_w, best_b, best_epoch = w.copy(), b.copy(), epoch

    if xv is None:
        best_w, best_b, best_epoch = w, b, params.epochs
        best_acc = float("nan")

    model = TrainedModel(
        scaler=scaler,
        weights=tuple(tuple(float(v) for v in row) for row in best_w),
        bias=tuple(float(v) for v in best_b),
        class_count=class_count,
        gain_count=gain_count,
        window_len=window_len,
        training_meta={
            "epochs": params.epochs,
            "learning_rate": params.learning_rate,
            "l2": params.l2,
            "seed": params.seed,
            "final_loss": final_loss,
            "best_epoch": best_epoch,
            "best_val_accuracy": best_acc,
            "train_samples": len(train_samples),
            "val_samples": len(val_samples),
            "class_map": class_map(gain_count),
        },
    )
    return model, curve


def class_map(gain_count: int) -> dict[str, str]:
    names = {str(i): f"gain_{i}" for i in range(gain_count)}
    names[str(gain_count)] = "X"
    return names


def predict(model: TrainedModel, window: FeatureInput) -> tuple[int, tuple[float, ...]]:
    """Argmax class over scores; ties resolve to the lowest class id, the
    least saturation-prone gain."""
    feats = encode_features(window, model.scaler)
    scores = _scores(feats, model.weight_matrix(), model.bias_vector())
    if not np.all(np.isfinite(scores)):
        raise DivergenceError("non-finite prediction scores")
    return int(np.argmax(scores)), tuple(float(s) for s in scores)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    per_class_recall: dict[int, Optional[float]]
    confusion: tuple[tuple[int, ...], ...]  # rows = true class, cols = predicted
    support: dict[int, int]
    sample_count: int

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_recall": {str(k): v for k, v in self.per_class_recall.items()},
            "confusion": [list(row) for row in self.confusion],
            "support": {str(k): v for k, v in self.support.items()},
            "sample_count": self.sample_count,
        }


def evaluate(model: TrainedModel, samples: Sequence[WindowSample]) -> EvalReport:
    if not samples:
        raise UsageError("cannot evaluate on an empty sample set")
    c = model.class_count
    confusion = np.zeros((c, c), dtype=int)
    for sample in samples:
        pred, _ = predict(model, sample)
        confusion[sample.label, pred] += 1
    support = {k: int(confusion[k].sum()) for k in range(c)}
    recall: dict[int, Optional[float]] = {}
    for k in range(c):
        recall[k] = (float(confusion[k, k] / support[k])) if support[k] else None
    accuracy = float(np.trace(confusion) / len(samples))
    return EvalReport(
        accuracy=accuracy,
        per_class_recall=recall,
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        support=support,
        sample_count=len(samples),
    )


def save_model(model: TrainedModel, path: Path | str) -> None:
    payload = {
        "schema": MODEL_SCHEMA,
        "class_count": model.class_count,
        "gain_count": model.gain_count,
        "window_len": model.window_len,
        "scaler": {"mean": list(model.scaler.mean), "std": list(model.scaler.std)},
        "weights": [list(row) for row in model.weights],
        "bias": list(model.bias),
        "training_meta": model.training_meta,
    }
    # json emits floats via repr: 17 significant digits, exact round-trip.
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def load_model(path: Path | str) -> TrainedModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt model file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("schema") != MODEL_SCHEMA:
        raise ModelFormatError(
            f"unsupported model schema in {path}: {payload.get('schema') if isinstance(payload, dict) else type(payload)}"
        )
    try:
        return TrainedModel(
            scaler=FeatureScaler(
                mean=tuple(float(v) for v in payload["scaler"]["mean"]),
                std=tuple(float(v) for v in payload["scaler"]["std"]),
            ),
            weights=tuple(tuple(float(v) for v in row) for row in payload["weights"]),
            bias=tuple(float(v) for v in payload["bias"]),
            class_count=int(payload["class_count"]),
            gain_count=int(payload["gain_count"]),
            window_len=int(payload["window_len"]),
            training_meta=dict(payload.get("training_meta", {})),
        )
    except (KeyError, TypeError, ValueError, UsageError) as exc:
        raise ModelFormatError(f"malformed model file {path}: {exc}") from exc


def write_curve_csv(curve: Sequence[tuple[int, float, float]], path: Path | str) -> None:
    lines = ["epoch,train_loss,val_accuracy"]
    for epoch, loss, acc in curve:
        lines.append(f"{epoch},{repr(float(loss))},{repr(float(acc))}")
    Path(path).write_text("\n".join(lines) + "\n")
