"""Haptic time-series classification and sensing-action scoring.

Recorded force/torque/position series are resampled to a fixed length,
flattened, standardized per channel, and fed to a linear multi-class margin
classifier trained by deterministic full-batch subgradient descent (fixed
epoch count and step schedule, zero init), so identical data always yields
an identical model.  Cross-validated accuracy s of one sensing action maps
to its discrimination score D = exp(alpha * s), which seeds the start ->
sensing-action weights of a clip network.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

N_CHANNELS = 9  # fx fy fz tx ty tz px py pz
DATASET_COLUMNS = [
    "series_id",
    "sensing_action",
    "label",
    "t",
    "fx",
    "fy",
    "fz",
    "tx",
    "ty",
    "tz",
    "px",
    "py",
    "pz",
]
MODEL_FORMAT_TAG = "haptic-model/v1"
# Training accuracy at or below chance plus this margin marks a model as
# degenerate (the data carries no usable signal for a linear separator).
DEGENERATE_MARGIN = 0.05


@dataclass(frozen=True)
class HapticTimeSeries:
    """One recorded sensing-action execution.

    t is strictly increasing; force/torque/position are (n, 3) arrays
    aligned with t.  label is the perceptual-state label when known.
    """

    t: np.ndarray
    force: np.ndarray
    torque: np.ndarray
    position: np.ndarray
    sensing_action: str
    label: str | None = None
    series_id: str = ""

    def __post_init__(self) -> None:
        n = len(self.t)
        if n == 0:
            raise ValueError("empty series")
        for name in ("force", "torque", "position"):
            arr = getattr(self, name)
            if arr.shape != (n, 3):
                raise ValueError(f"{name} must have shape ({n}, 3), got {arr.shape}")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("time steps must be strictly increasing")

    def channels(self) -> np.ndarray:
        """(n, 9) array: force, torque, position columns side by side."""
        return np.hstack([self.force, self.torque, self.position])


@dataclass
class StateModel:
    """Trained linear classifier for one sensing action."""

    sensing_action: str
    classes: tuple[str, ...]
    weights: np.ndarray  # (n_classes, 9 * feature_length)
    bias: np.ndarray  # (n_classes,)
    feature_length: int
    channel_mean: np.ndarray  # (9,)
    channel_std: np.ndarray  # (9,)
    trained_on: str = ""
    degenerate: bool = False


@dataclass(frozen=True)
class DiscriminationScore:
    """Cross-validated accuracy of a sensing action and its network weight."""

    sensing_action: str
    accuracy: float
    alpha: float
    score: float


# -- features -----------------------------------------------------------------


def featurize(series: HapticTimeSeries, length: int) -> np.ndarray:
    """Flat (9 * length,) raw feature vector, one 9-channel block per step.

    Series of a different native length are resampled by linear
    interpolation onto `length` evenly spaced times; a series already at the
    target length is taken verbatim.  Standardization is not applied here
    (it belongs to the model that owns the training statistics).
    """
    if length < 1:
        raise ValueError("length must be positive")
    n = len(series.t)
    if n < 2:
        raise ValueError("at least two steps required")
    values = series.channels()
    if n != length:
        grid = np.linspace(series.t[0], series.t[-1], length)
        values = np.column_stack(
            [np.interp(grid, series.t, values[:, c]) for c in range(N_CHANNELS)]
        )
    return values.reshape(-1)


def channel_statistics(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and std over a (n_samples, 9 * L) feature matrix."""
    stacked = features.reshape(features.shape[0], -1, N_CHANNELS)
    flat = stacked.reshape(-1, N_CHANNELS)
    return flat.mean(axis=0), flat.std(axis=0)


def standardize(
    features: np.ndarray, mean: np.ndarray, std: np.ndarray
) -> np.ndarray:
    """Z-score per channel; zero-variance channels map to exactly zero."""
    shape = features.shape
    stacked = features.reshape(*shape[:-1], -1, N_CHANNELS)
    safe = np.where(std > 0.0, std, 1.0)
    out = np.where(std > 0.0, (stacked - mean) / safe, 0.0)
    return out.reshape(shape)


def _feature_matrix(
    dataset: list[HapticTimeSeries], length: int
) -> tuple[np.ndarray, list[str]]:
    rows = np.stack([featurize(s, length) for s in dataset])
    labels = [s.label if s.label is not None else "" for s in dataset]
    return rows, labels


# -- training ------------------------------------------------------------------


def train(
    dataset: list[HapticTimeSeries],
    *,
    length: int = 100,
    epochs: int = 80,
    learning_rate: float = 0.5,
    decay: float = 0.02,
) -> StateModel:
    """Fit the margin classifier on labeled series of one sensing action.

    Deterministic: zero-initialized weights, full-batch subgradient steps
    with the step size learning_rate / (1 + decay * epoch).
    """
    if not dataset:
        raise ValueError("empty dataset")
    actions = {s.sensing_action for s in dataset}
    if len(actions) != 1:
        raise ValueError(f"mixed sensing actions in dataset: {sorted(actions)}")
    if any(s.label is None for s in dataset):
        raise ValueError("all training series must be labeled")
    raw, labels = _feature_matrix(dataset, length)
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError("nothing to discriminate: need at least two classes")
    counts = {c: labels.count(c) for c in classes}
    thin = [c for c, n in counts.items() if n < 2]
    if thin:
        raise ValueError(f"need at least two samples per class, too few for: {thin}")

    mean, std = channel_statistics(raw)
    x = standardize(raw, mean, std)
    y = np.array([classes.index(lbl) for lbl in labels])
    n, dim = x.shape
    n_classes = len(classes)

    weights = np.zeros((n_classes, dim))
    bias = np.zeros(n_classes)
    one_hot = np.zeros((n, n_classes))
    one_hot[np.arange(n), y] = 1.0
    for epoch in range(epochs):
        scores = x @ weights.T + bias  # (n, n_classes)
        correct = scores[np.arange(n), y]
        margins = scores - correct[:, None] + 1.0
        margins[np.arange(n), y] = 0.0
        violating = (margins > 0.0).astype(float)
        violating[np.arange(n), y] = -violating.sum(axis=1)
        step = learning_rate / (1.0 + decay * epoch)
        weights -= step * (violating.T @ x) / n
        bias -= step * violating.mean(axis=0)

    predictions = np.argmax(x @ weights.T + bias, axis=1)
    train_accuracy = float(np.mean(predictions == y))
    fingerprint = hashlib.sha256(
        raw.tobytes() + "|".join(labels).encode()
    ).hexdigest()[:12]
    return StateModel(
        sensing_action=dataset[0].sensing_action,
        classes=classes,
        weights=weights,
        bias=bias,
        feature_length=length,
        channel_mean=mean,
        channel_std=std,
        trained_on=fingerprint,
        degenerate=train_accuracy <= 1.0 / n_classes + DEGENERATE_MARGIN,
    )


def classify(
    model: StateModel, series: HapticTimeSeries
) -> tuple[str, tuple[float, ...]]:
    """Predicted state label and the per-class scores.

    Pure function of (model, series); ties break toward the lowest class
    index.
    """
    if series.sensing_action != model.sensing_action:
        raise ValueError(
            f"series of action '{series.sensing_action}' cannot be classified"
            f" by a model for '{model.sensing_action}'"
        )
    features = featurize(series, model.feature_length)
    if features.shape[0] != model.weights.shape[1]:
        raise ValueError(
            f"dimension mismatch: features {features.shape[0]},"
            f" model {model.weights.shape[1]}"
        )
    x = standardize(features, model.channel_mean, model.channel_std)
    scores = model.weights @ x + model.bias
    best = int(np.argmax(scores))
    return model.classes[best], tuple(float(v) for v in scores)


def cross_validate(
    dataset: list[HapticTimeSeries],
    k: int = 5,
    *,
    seed: int = 0,
    length: int = 100,
    epochs: int = 80,
    learning_rate: float = 0.5,
    decay: float = 0.02,
) -> float:
    """Stratified k-fold mean held-out accuracy, deterministic given seed."""
    if k < 2:
        raise ValueError("k must be at least 2")
    labels = [s.label for s in dataset]
    if any(lbl is None for lbl in labels):
        raise ValueError("all series must be labeled")
    by_class: dict[str, list[int]] = {}
    for i, lbl in enumerate(labels):
        by_class.setdefault(lbl, []).append(i)
    if len(by_class) < 2:
        raise ValueError("nothing to discriminate: need at least two classes")
    thin = [c for c, idx in sorted(by_class.items()) if len(idx) < k]
    if thin:
        raise ValueError(f"classes with fewer than k={k} samples: {thin}")

    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(dataset), dtype=int)
    for lbl in sorted(by_class):
        idx = np.array(by_class[lbl])
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            fold_of[i] = pos % k

    accuracies = []
    for fold in range(k):
        train_set = [s for s, f in zip(dataset, fold_of) if f != fold]
        test_set = [s for s, f in zip(dataset, fold_of) if f == fold]
        model = train(
            train_set,
            length=length,
            epochs=epochs,
            learning_rate=learning_rate,
            decay=decay,
        )
        hits = sum(classify(model, s)[0] == s.label for s in test_set)
        accuracies.append(hits / len(test_set))
    return float(np.mean(accuracies))


def discrimination_score(accuracy: float, alpha: float) -> float:
    """D = exp(alpha * accuracy); the start -> sensing-action weight."""
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {accuracy!r}")
    if alpha < 0.0:
        raise ValueError(f"stretch factor must be non-negative, got {alpha!r}")
    return math.exp(alpha * accuracy)


def rate_sensing_actions(
    dataset: list[HapticTimeSeries],
    *,
    alpha: float = 10.0,
    folds: int = 5,
    seed: int = 0,
    **train_kwargs: float,
) -> dict[str, DiscriminationScore]:
    """Cross-validate each sensing action present in the dataset and map its
    accuracy to a discrimination score."""
    by_action: dict[str, list[HapticTimeSeries]] = {}
    for s in dataset:
        by_action.setdefault(s.sensing_action, []).append(s)
    out: dict[str, DiscriminationScore] = {}
    for action, subset in by_action.items():
        acc = cross_validate(subset, folds, seed=seed, **train_kwargs)
        out[action] = DiscriminationScore(
            sensing_action=action,
            accuracy=acc,
            alpha=alpha,
            score=discrimination_score(acc, alpha),
        )
    return out


# -- persistence ---------------------------------------------------------------


def save_dataset_csv(path: str, dataset: list[HapticTimeSeries]) -> None:
    """One row per time step; floats keep full round-trip precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_COLUMNS)
        for series in dataset:
            values = series.channels()
            for i, t in enumerate(series.t):
                writer.writerow(
                    [series.series_id, series.sensing_action, series.label or ""]
                    + [repr(float(t))]
                    + [repr(float(v)) for v in values[i]]
                )


def load_dataset_csv(path: str) -> list[HapticTimeSeries]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DATASET_COLUMNS:
            raise ValueError(f"unexpected dataset header: {header}")
        groups: dict[str, dict] = {}
        for row in reader:
            if len(row) != len(DATASET_COLUMNS):
                raise ValueError(f"malformed dataset row: {row}")
            sid = row[0]
            entry = groups.setdefault(
                sid,
                {"action": row[1], "label": row[2] or None, "t": [], "vals": []},
            )
            entry["t"].append(float(row[3]))
            entry["vals"].append([float(v) for v in row[4:]])
    out = []
    for sid, entry in groups.items():
        vals = np.array(entry["vals"])
        out.append(
            HapticTimeSeries(
                t=np.array(entry["t"]),
                force=vals[:, 0:3],
                torque=vals[:, 3:6],
                position=vals[:, 6:9],
                sensing_action=entry["action"],
                label=entry["label"],
                series_id=sid,
            )
        )
    return out


def save_model(path: str, model: StateModel) -> None:
    doc = {
        "format": MODEL_FORMAT_TAG,
        "sensing_action": model.sensing_action,
        "classes": list(model.classes),
        "feature_length": model.feature_length,
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "channel_mean": model.channel_mean.tolist(),
        "channel_std": model.channel_std.tolist(),
        "trained_on": model.trained_on,
        "degenerate": model.degenerate,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path: str) -> StateModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT_TAG:
        raise ValueError(f"unsupported format tag: {doc.get('format')!r}")
    return StateModel(
        sensing_action=doc["sensing_action"],
        classes=tuple(doc["classes"]),
        weights=np.array(doc["weights"]),
        bias=np.array(doc["bias"]),
        feature_length=int(doc["feature_length"]),
        channel_mean=np.array(doc["channel_mean"]),
        channel_std=np.array(doc["channel_std"]),
        trained_on=doc.get("trained_on", ""),
        degenerate=bool(doc.get("degenerate", False)),
    )
