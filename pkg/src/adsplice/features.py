"""Feature-based ad detection: per-shot descriptors, a one-vs-rest logistic
classifier trained by full-batch gradient descent, and greedy forward feature
selection under stratified cross-validation.

A shot is described by 30 numbers: per-coefficient MFCC means and standard
deviations (13 + 13), pooled luma mean and variance, mean frame-to-frame
motion, and a cut-rate slot that is 0 at shot granularity (shots contain no
interior cuts by construction). One multi-class model covers the non-ad
label and every ad category; a shot is an ad exactly when its label is not
the non-ad label.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .media import Segment, sample_offset
from .mfcc import MfccConfig, mfcc
from .shots import Shot, ShotConfig, detect_shots, frame_diffs

NON_AD_LABEL = "program"

FEATURE_NAMES: tuple[str, ...] = (
    *[f"mfcc_mean_{i}" for i in range(13)],
    *[f"mfcc_std_{i}" for i in range(13)],
    "luma_mean",
    "luma_var",
    "motion_mean",
    "cut_rate",
)
N_FEATURES = len(FEATURE_NAMES)


class DegenerateTrainingSet(ValueError):
    pass


def default_mfcc_config(sample_rate: int) -> MfccConfig:
    nfft = 512 if sample_rate <= 16000 else 2048
    return MfccConfig(sample_rate=sample_rate, nfft=nfft)


def shot_features(segment: Segment, shot: Shot) -> np.ndarray:
    """30-dim descriptor of one shot within a segment."""
    frames = segment.frames[shot.start_frame : shot.end_frame + 1]
    rate = segment.audio.sample_rate
    a0 = sample_offset(shot.start_frame, segment.fps, rate)
    a1 = sample_offset(shot.end_frame + 1, segment.fps, rate)
    coeffs = mfcc(segment.audio.samples[a0:a1], default_mfcc_config(rate))

    pixels = np.stack([f.pixels for f in frames])
    motion = float(frame_diffs(frames).mean()) if len(frames) > 1 else 0.0

    return np.concatenate(
        [
            coeffs.mean(axis=0),
            coeffs.std(axis=0),
            [
                float(pixels.mean()),
                float(pixels.astype(np.float64).var()),
                motion,
                0.0,
            ],
        ]
    )


# ---------------------------------------------------------------------------
# logistic classifier


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    std_floor: float = 1e-9


def logistic_loss(weights: np.ndarray, X: np.ndarray, Y: np.ndarray) -> float:
    """Mean-per-sample cross entropy summed over one-vs-rest outputs.

    weights: (C, d); X: (n, d) with bias column included; Y: (n, C) one-hot.
    Uses logaddexp so the loss stays finite and smooth for any weights.
    """
    z = X @ weights.T
    per = Y * np.logaddexp(0.0, -z) + (1.0 - Y) * np.logaddexp(0.0, z)
    return float(per.sum() / len(X))


def logistic_grad(weights: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Exact gradient of logistic_loss with respect to weights."""
    z = X @ weights.T
    p = 1.0 / (1.0 + np.exp(-z))
    return (p - Y).T @ X / len(X)


def _one_hot(y: Sequence[str], classes: Sequence[str]) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    Y = np.zeros((len(y), len(classes)))
    for i, label in enumerate(y):
        Y[i, index[label]] = 1.0
    return Y


@dataclass(frozen=True)
class LogisticModel:
    """One-vs-rest logistic model over z-normalized selected features."""

    classes: tuple[str, ...]
    feature_indices: tuple[int, ...]
    mean: np.ndarray
    std: np.ndarray
    weights: np.ndarray  # (n_classes, n_selected + 1), bias first

    def _design(self, X: np.ndarray) -> np.ndarray:
        Xs = np.atleast_2d(np.asarray(X, dtype=np.float64))[:, self.feature_indices]
        Z = (Xs - self.mean) / self.std
        return np.hstack([np.ones((len(Z), 1)), Z])

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Per-class sigmoid scores, shape (n, n_classes)."""
        z = self._design(X) @ self.weights.T
        return 1.0 / (1.0 + np.exp(-z))

    def predict(self, X: np.ndarray) -> list[str]:
        return [self.classes[i] for i in np.argmax(self.scores(X), axis=1)]

    def to_json(self) -> str:
        return json.dumps(
            {
                "classes": list(self.classes),
                "feature_indices": list(self.feature_indices),
                "feature_names": [FEATURE_NAMES[i] for i in self.feature_indices],
                "mean": self.mean.tolist(),
                "std": self.std.tolist(),
                "weights": self.weights.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "LogisticModel":
        raw = json.loads(text)
        return cls(
            classes=tuple(raw["classes"]),
            feature_indices=tuple(raw["feature_indices"]),
            mean=np.array(raw["mean"], dtype=np.float64),
            std=np.array(raw["std"], dtype=np.float64),
            weights=np.array(raw["weights"], dtype=np.float64),
        )


def train_classifier(
    X: np.ndarray,
    y: Sequence[str],
    feature_indices: Sequence[int],
    config: TrainConfig = TrainConfig(),
) -> LogisticModel:
    """Deterministic full-batch gradient descent from zero weights."""
    X = np.asarray(X, dtype=np.float64)
    classes = tuple(sorted(set(y)))
    idx = tuple(int(i) for i in feature_indices)
    Xs = X[:, idx]
    mean = Xs.mean(axis=0)
    std = np.maximum(Xs.std(axis=0), config.std_floor)
    Z = np.hstack([np.ones((len(Xs), 1)), (Xs - mean) / std])
    Y = _one_hot(y, classes)
    W = np.zeros((len(classes), Z.shape[1]))
    for _ in range(config.epochs):
        W -= config.learning_rate * logistic_grad(W, Z, Y)
    return LogisticModel(classes, idx, mean, std, W)


def evaluate_accuracy(model: LogisticModel, X: np.ndarray, y: Sequence[str]) -> float:
    pred = model.predict(X)
    return sum(p == t for p, t in zip(pred, y)) / len(y)


# ---------------------------------------------------------------------------
# feature selection


def stratified_folds(y: Sequence[str], n_folds: int, seed: int = 0) -> list[np.ndarray]:
    """Deal each class's shuffled members round-robin across folds."""
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    y = np.asarray(y)
    for cls in sorted(set(y)):
        members = np.flatnonzero(y == cls)
        rng.shuffle(members)
        for j, m in enumerate(members):
            folds[j % n_folds].append(int(m))
    return [np.array(sorted(f), dtype=np.intp) for f in folds]


def _cv_accuracy(
    X: np.ndarray,
    y: np.ndarray,
    indices: Sequence[int],
    folds: list[np.ndarray],
    config: TrainConfig,
) -> float:
    correct = 0
    for fold in folds:
        if len(fold) == 0:
            continue
        mask = np.ones(len(y), dtype=bool)
        mask[fold] = False
        model = train_classifier(X[mask], y[mask], indices, config)
        pred = model.predict(X[fold])
        correct += sum(p == t for p, t in zip(pred, y[fold]))
    return correct / len(y)


@dataclass(frozen=True)
class SelectionResult:
    indices: tuple[int, ...]
    accuracies: tuple[float, ...]  # pooled CV accuracy after each addition

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(FEATURE_NAMES[i] for i in self.indices)


def select_features(
    X: np.ndarray,
    y: Sequence[str],
    n_folds: int = 5,
    k_max: int = 10,
    min_gain: float = 0.005,
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> SelectionResult:
    """Greedy forward selection maximizing pooled cross-validation accuracy.

    The first feature is always kept; each later feature must improve pooled
    accuracy by at least min_gain. Ties go to the lowest feature index.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if len(set(y.tolist())) < 2:
        raise DegenerateTrainingSet("need at least 2 classes")
    if len(y) < 10:
        raise DegenerateTrainingSet(f"need at least 10 examples, got {len(y)}")

    folds = stratified_folds(y, n_folds, seed)
    chosen: list[int] = []
    accs: list[float] = []
    current = 0.0
    while len(chosen) < min(k_max, X.shape[1]):
        best_idx, best_acc = -1, -1.0
        for j in range(X.shape[1]):
            if j in chosen:
                continue
            acc = _cv_accuracy(X, y, [*chosen, j], folds, config)
            if acc > best_acc:
                best_idx, best_acc = j, acc
        if chosen and best_acc - current < min_gain:
            break
        chosen.append(best_idx)
        accs.append(best_acc)
        current = best_acc
    return SelectionResult(tuple(chosen), tuple(accs))


def fit_detector(
    X: np.ndarray,
    y: Sequence[str],
    config: TrainConfig = TrainConfig(),
    k_max: int = 10,
) -> LogisticModel:
    """Select features by cross-validation, then train on the full set."""
    selection = select_features(X, y, k_max=k_max, config=config)
    return train_classifier(X, y, selection.indices, config)


# ---------------------------------------------------------------------------
# segment classification


@dataclass(frozen=True)
class FeatureDecision:
    is_ad: bool
    category: str | None
    shots: tuple[Shot, ...]
    labels: tuple[str, ...]


def weighted_vote(
    shots: Sequence[Shot], labels: Sequence[str], frame_count: int
) -> tuple[bool, str | None]:
    """Ad iff ad-labeled shots cover a strict majority of frames; the
    category is the ad label covering the most frames, ties going to the
    lexicographically smallest."""
    ad_frames = 0
    per_category: dict[str, int] = {}
    for shot, label in zip(shots, labels):
        if label != NON_AD_LABEL:
            ad_frames += shot.frame_count
            per_category[label] = per_category.get(label, 0) + shot.frame_count
    is_ad = 2 * ad_frames > frame_count
    if not is_ad:
        return False, None
    top = max(per_category.values())
    return True, min(c for c, n in per_category.items() if n == top)


def classify_segment_features(
    segment: Segment,
    model: LogisticModel,
    shot_config: ShotConfig = ShotConfig(),
) -> FeatureDecision:
    """Label each shot, then vote weighted by shot length in frames."""
    shots = detect_shots(segment.frames, shot_config)
    X = np.stack([shot_features(segment, s) for s in shots])
    labels = model.predict(X)
    is_ad, category = weighted_vote(shots, labels, segment.frame_count)
    return FeatureDecision(is_ad, category, tuple(shots), tuple(labels))
