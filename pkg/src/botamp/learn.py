"""Splitting, minority upsampling and the three from-scratch classifiers."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import NumericError, ValidationError
from .features import FEATURE_COLUMNS, FeatureMatrix, Vocabulary, vocabulary_fingerprint

DEFAULT_K = 34
DEFAULT_BOOTSTRAPS = 11
MAX_HALVINGS = 30


@dataclass(frozen=True)
class SplitSpec:
    fraction: float = 0.7
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise ValidationError(f"train fraction must be in (0, 1), got {self.fraction}")


def split_indices(y, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sorted train/test row indices.

    Each class (or the whole set, unstratified) contributes
    ``floor(n * fraction)`` rows to train and the rest to test.
    """
    y = np.asarray(y, dtype=bool)
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        groups = [np.flatnonzero(~y), np.flatnonzero(y)]
        for cls, g in zip((False, True), groups):
            if len(g) < 2:
                raise ValidationError(f"class {cls} has {len(g)} row(s); stratified split needs >= 2")
    else:
        groups = [np.arange(len(y))]
    train = []
    for g in groups:
        perm = rng.permutation(g)
        train.append(perm[: math.floor(len(g) * spec.fraction)])
    train_idx = np.sort(np.concatenate(train))
    mask = np.ones(len(y), dtype=bool)
    mask[train_idx] = False
    return train_idx, np.flatnonzero(mask)


def split_train_test(matrix: FeatureMatrix, spec: SplitSpec) -> tuple[FeatureMatrix, FeatureMatrix]:
    train_idx, test_idx = split_indices(matrix.y, spec)
    return matrix.subset(train_idx), matrix.subset(test_idx)


def upsample_indices(y, seed: int) -> np.ndarray:
    """Row indices after drawing minority rows with replacement up to parity.

    Original rows come first, in order, followed by the drawn copies.
    """
    y = np.asarray(y, dtype=bool)
    pos, neg = np.flatnonzero(y), np.flatnonzero(~y)
    if len(pos) == 0 or len(neg) == 0:
        raise ValidationError("upsampling needs both classes present")
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    extra = len(majority) - len(minority)
    rng = np.random.default_rng(seed)
    drawn = minority[rng.integers(0, len(minority), size=extra)]
    return np.concatenate([np.arange(len(y)), drawn])


def upsample_minority(train: FeatureMatrix, seed: int) -> FeatureMatrix:
    return train.subset(upsample_indices(train.y, seed))


def _design(rows) -> np.ndarray:
    X = rows.X if isinstance(rows, FeatureMatrix) else np.asarray(rows, dtype=np.float64)
    return X if X.ndim == 2 else X.reshape(1, -1)


def _check_columns(X: np.ndarray, n_features: int) -> None:
    if X.shape[1] != n_features:
        raise ValidationError(f"model expects {n_features} columns, got {X.shape[1]}")


# -- logistic regression ----------------------------------------------------


@dataclass(frozen=True)
class LogisticHyper:
    rate: float = 0.5
    epochs: int = 500
    tol: float = 1e-8
    l2: float = 0.0


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    losses: list[float] = field(default_factory=list)
    hyper: LogisticHyper = LogisticHyper()


def logistic_objective(X, y, w, b, l2=0.0):
    """``(loss, grad_w, grad_b)`` of mean cross-entropy + (l2/2)|w|^2."""
    return kernels.logistic_loss_grad(X, np.asarray(y, dtype=np.float64), w, b, l2)


def train_logistic(train: FeatureMatrix, hyper: LogisticHyper | None = None) -> LogisticModel:
    """Full-batch gradient descent from zero with step halving.

    Each epoch starts from ``hyper.rate`` and halves the step (at most 30
    times) until the loss does not increase, so the loss log is
    non-increasing.  Stops after ``hyper.epochs`` or once the loss changes
    by less than ``hyper.tol``.
    """
    hyper = hyper or LogisticHyper()
    X = train.X
    y = train.y.astype(np.float64)
    if not (train.y.any() and (~train.y).any()):
        raise ValidationError("logistic regression needs both classes in the training data")

    w = np.zeros(X.shape[1])
    b = 0.0
    loss, gw, gb = logistic_objective(X, y, w, b, hyper.l2)
    losses = [loss]
    for _ in range(hyper.epochs):
        step = hyper.rate
        for _ in range(MAX_HALVINGS + 1):
            w_new, b_new = w - step * gw, b - step * gb
            new = logistic_objective(X, y, w_new, b_new, hyper.l2)
            if not math.isfinite(new[0]):
                raise NumericError(f"non-finite loss {new[0]} during training")
            if new[0] <= loss:
                break
            step /= 2
        else:
            new = None  # no descending step found; stay put
        prev = loss
        if new is not None:
            w, b = w_new, b_new
            loss, gw, gb = new
        losses.append(loss)
        if abs(prev - loss) < hyper.tol:
            break
    return LogisticModel(w, float(b), losses, hyper)


def logistic_predict(model: LogisticModel, rows) -> tuple[np.ndarray, np.ndarray]:
    X = _design(rows)
    _check_columns(X, len(model.weights))
    p = kernels.sigmoid(X @ model.weights + model.bias)
    p = np.clip(p, kernels.PROB_EPS, 1.0 - kernels.PROB_EPS)
    return p, p > 0.5


# -- k nearest neighbours ---------------------------------------------------


@dataclass
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int = DEFAULT_K


def train_knn(train: FeatureMatrix, k: int = DEFAULT_K) -> KnnModel:
    n = len(train)
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in [1, {n}], got {k}")
    return KnnModel(train.X.copy(), train.y.copy(), int(k))


def knn_predict(model: KnnModel, rows) -> tuple[np.ndarray, np.ndarray]:
    """Positive vote fraction among the k nearest rows; a 0.5 vote is negative."""
    Q = _design(rows)
    _check_columns(Q, model.X.shape[1])
    scores = kernels.knn_vote(model.X, model.y, Q, model.k)
    return scores, scores > 0.5


# -- linear SVM ---------------------------------------------------------------


@dataclass(frozen=True)
class SvmHyper:
    step: float = 0.5
    epochs: int = 500
    l2: float = 1e-4


@dataclass
class SvmModel:
    weights: np.ndarray
    bias: float
    hyper: SvmHyper = SvmHyper()
    objectives: list[float] = field(default_factory=list)


def hinge_objective(X, y, w, b, l2=0.0):
    """``(objective, grad_w, grad_b)`` of mean hinge loss + (l2/2)|w|^2."""
    ys = np.where(np.asarray(y, dtype=bool), 1.0, -1.0)
    return kernels.hinge_loss_subgrad(X, ys, w, b, l2)


def train_svm(train: FeatureMatrix, hyper: SvmHyper | None = None) -> SvmModel:
    """Subgradient descent with step ``step / sqrt(t)``; returns the best iterate."""
    hyper = hyper or SvmHyper()
    if not (train.y.any() and (~train.y).any()):
        raise ValidationError("SVM needs both classes in the training data")
    X = train.X
    ys = np.where(train.y, 1.0, -1.0)
    w = np.zeros(X.shape[1])
    b = 0.0
    obj, gw, gb = kernels.hinge_loss_subgrad(X, ys, w, b, hyper.l2)
    best = (obj, w.copy(), b)
    objectives = [obj]
    for t in range(1, hyper.epochs + 1):
        eta = hyper.step / math.sqrt(t)
        w = w - eta * gw
        b = b - eta * gb
        obj, gw, gb = kernels.hinge_loss_subgrad(X, ys, w, b, hyper.l2)
        objectives.append(obj)
        if obj < best[0]:
            best = (obj, w.copy(), b)
    return SvmModel(best[1], float(best[2]), hyper, objectives)


def svm_predict(model: SvmModel, rows) -> tuple[np.ndarray, np.ndarray]:
    X = _design(rows)
    _check_columns(X, len(model.weights))
    margin = X @ model.weights + model.bias
    return margin, margin > 0


# -- feature importance -------------------------------------------------------


def feature_importance(train: FeatureMatrix, rounds: int = DEFAULT_BOOTSTRAPS, seed: int = 0,
                       hyper: LogisticHyper | None = None) -> np.ndarray:
    """Per-feature median logistic coefficient over bootstrap refits.

    ``rounds == 1`` fits the training data itself, without resampling.
    """
    if rounds < 1:
        raise ValidationError(f"bootstrap rounds must be >= 1, got {rounds}")
    if rounds == 1:
        return train_logistic(train, hyper).weights.copy()
    rng = np.random.default_rng(seed)
    n = len(train)
    coefs = [train_logistic(train.subset(rng.integers(0, n, size=n)), hyper).weights
             for _ in range(rounds)]
    return np.median(np.vstack(coefs), axis=0)


# -- model files ----------------------------------------------------------------


def model_to_json(model, *, seed: int | None = None, vocabs: dict[str, Vocabulary] | None = None,
                  fit=None, extra: dict | None = None) -> dict:
    if isinstance(model, LogisticModel):
        body = {"kind": "lr", "weights": model.weights.tolist(), "bias": model.bias,
                "hyper": asdict(model.hyper), "epochs_run": len(model.losses) - 1}
    elif isinstance(model, SvmModel):
        body = {"kind": "svm", "weights": model.weights.tolist(), "bias": model.bias,
                "hyper": asdict(model.hyper)}
    elif isinstance(model, KnnModel):
        body = {"kind": "knn", "k": model.k, "train_X": model.X.tolist(),
                "train_y": model.y.astype(int).tolist()}
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    body["columns"] = list(FEATURE_COLUMNS)
    body["seed"] = seed
    body["vocab_fingerprints"] = {k: vocabulary_fingerprint(v) for k, v in sorted((vocabs or {}).items())}
    body["altmetric_fit"] = list(fit) if fit is not None else None
    if extra:
        body.update(extra)
    return body


def model_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "lr":
        return LogisticModel(np.asarray(obj["weights"], dtype=np.float64), float(obj["bias"]),
                             [], LogisticHyper(**obj["hyper"]))
    if kind == "svm":
        return SvmModel(np.asarray(obj["weights"], dtype=np.float64), float(obj["bias"]),
                        SvmHyper(**obj["hyper"]))
    if kind == "knn":
        return KnnModel(np.asarray(obj["train_X"], dtype=np.float64),
                        np.asarray(obj["train_y"], dtype=bool), int(obj["k"]))
    raise ValidationError(f"unknown model kind {kind!r}")


def save_model(path: str | Path, model, **kw) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model, **kw), fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> tuple[object, dict]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return model_from_json(obj), obj


def predict(model, rows) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch to the matching ``*_predict`` function."""
    if isinstance(model, LogisticModel):
        return logistic_predict(model, rows)
    if isinstance(model, KnnModel):
        return knn_predict(model, rows)
    if isinstance(model, SvmModel):
        return svm_predict(model, rows)
    raise TypeError(f"unsupported model type {type(model).__name__}")
