"""Baseline classifiers, classification metrics and the comparison harness.

All classifiers here see the same channel-major 200-value flattening of a
sentiment image. Binary targets use 1 for relapsed (the positive class).
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Label, stratified_indices
from .seeding import rng_for

RELAPSED_INDEX = 0  # class index used by the GAN and image datasets


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision(X))

    def predict(self, X) -> np.ndarray:
        """1 = relapsed."""
        return (self.decision(X) >= 0).astype(np.int64)


def _check_binary(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with one target per row")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValueError("training data must contain both classes")
    return X, y


def logreg_train(X, y, lr: float = 0.5, epochs: int = 2000, l2: float = 1e-3, seed: int = 0) -> LinearModel:
    """Full-batch gradient descent on mean log-loss + ``l2/2 * |w|^2`` (bias unpenalised)."""
    X, y = _check_binary(X, y)
    rng = rng_for(seed, "logreg")
    w = rng.normal(0.0, 1e-3, X.shape[1])
    b = 0.0
    n = len(y)
    for _ in range(epochs):
        p = _sigmoid(X @ w + b)
        r = p - y
        w -= lr * (X.T @ r / n + l2 * w)
        b -= lr * r.mean()
    return LinearModel(w, float(b))


def linsvm_train(X, y, lr: float = 0.01, epochs: int = 2000, c: float = 10.0, seed: int = 0) -> LinearModel:
    """Subgradient descent on ``1/2 |w|^2 + c * mean hinge(1 - t (w.x + b))`` with t = +-1."""
    X, y = _check_binary(X, y)
    rng = rng_for(seed, "linsvm")
    t = 2.0 * y - 1.0
    w = rng.normal(0.0, 1e-3, X.shape[1])
    b = 0.0
    n = len(y)
    for _ in range(epochs):
        margin = t * (X @ w + b)
        active = margin < 1.0
        gw = w - c * (X[active].T @ t[active]) / n
        gb = -c * t[active].sum() / n
        w -= lr * gw
        b -= lr * gb
    return LinearModel(w, float(b))


def hinge_loss(model: LinearModel, X, y) -> float:
    t = 2.0 * np.asarray(y, dtype=np.float64) - 1.0
    return float(np.mean(np.maximum(0.0, 1.0 - t * model.decision(X))))


def _knn_votes(dist_row: np.ndarray, labels: np.ndarray, k: int) -> int:
    # stable sort: equal distances keep training order
    nearest = np.argsort(dist_row, kind="stable")[:k]
    relapsed = int(np.sum(labels[nearest] == 1))
    return 1 if relapsed * 2 >= k else 0


def knn_predict(X_train, y_train, query, k: int = 5) -> Label:
    """Majority vote of the k nearest (Euclidean); vote ties go to relapsed."""
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    if len(X_train) == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= len(X_train):
        raise ValueError("k must lie in [1, training size]")
    d = np.sqrt(((X_train - np.asarray(query, dtype=np.float64)) ** 2).sum(axis=1))
    return Label.RELAPSED if _knn_votes(d, y_train, k) == 1 else Label.ABSTINENT


def _pairwise_sq(A, B):
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def knn_predict_many(X_train, y_train, X_query, k: int = 5) -> np.ndarray:
    """Vectorised :func:`knn_predict`; returns 1 for relapsed."""
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    if len(X_train) == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= len(X_train):
        raise ValueError("k must lie in [1, training size]")
    d = _pairwise_sq(np.asarray(X_query, dtype=np.float64), X_train)
    return np.array([_knn_votes(row, y_train, k) for row in d], dtype=np.int64)


def select_k(X, y, ks=(1, 3, 5, 7), default: int = 5) -> int:
    """Pick k by leave-one-out accuracy on the training set; ties keep ``default``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    d = _pairwise_sq(X, X)
    np.fill_diagonal(d, np.inf)
    scores = {}
    for k in ks:
        if k >= len(X):
            continue
        pred = np.array([_knn_votes(row, y, k) for row in d])
        scores[k] = float(np.mean(pred == y))
    if not scores:
        return min(default, len(X))
    best = max(scores.values())
    if scores.get(default) == best:
        return default
    return min(k for k, s in scores.items() if s == best)


# --- metrics -----------------------------------------------------------------


@dataclass
class MetricsReport:
    tp: int
    tn: int
    fp: int
    fn: int
    precision: float
    recall: float
    accuracy: float
    f1: float


def _relapsed_mask(values) -> np.ndarray:
    out = []
    for v in values:
        if isinstance(v, Label):
            if v is Label.UNLABELED:
                raise ValueError("cannot score unlabeled entries")
            out.append(v is Label.RELAPSED)
        else:
            # class indices: 0 relapsed, 1 abstinent
            iv = int(v)
            if iv not in (0, 1):
                raise ValueError(f"unexpected class index {v!r}")
            out.append(iv == RELAPSED_INDEX)
    return np.array(out, dtype=bool)


def f1_score(precision: float, recall: float) -> float:
    s = precision + recall
    return 0.0 if s == 0 else 2.0 * precision * recall / s


def compute_metrics(predictions, truth) -> MetricsReport:
    """Confusion counts and derived scores with relapsed as positive.

    Entries are :class:`Label` values or class indices (0 relapsed,
    1 abstinent). Zero denominators give 0.
    """
    pred = _relapsed_mask(predictions)
    true = _relapsed_mask(truth)
    if len(pred) != len(true):
        raise ValueError("predictions and truth differ in length")
    if len(pred) == 0:
        raise ValueError("nothing to score")
    tp = int(np.sum(pred & true))
    tn = int(np.sum(~pred & ~true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return MetricsReport(tp, tn, fp, fn, precision, recall, (tp + tn) / len(pred), f1_score(precision, recall))


# --- bag-of-words helper for text classifiers --------------------------------


def bag_of_words(documents: Sequence[Sequence[str]], vocabulary: Sequence[str] | None = None):
    """Token-count matrix over ``vocabulary`` (sorted corpus vocabulary by default)."""
    if vocabulary is None:
        vocabulary = sorted({t for doc in documents for t in doc})
    index = {w: j for j, w in enumerate(vocabulary)}
    X = np.zeros((len(documents), len(vocabulary)))
    for i, doc in enumerate(documents):
        for tok in doc:
            j = index.get(tok)
            if j is not None:
                X[i, j] += 1
    return X, list(vocabulary)


# --- comparison harness ------------------------------------------------------

METHODS = ("LogReg", "SVM", "KNN", "GAN")


@dataclass
class HarnessConfig:
    gan_epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-4
    noise_dim: int = 64
    logreg_lr: float = 0.5
    logreg_epochs: int = 2000
    logreg_l2: float = 1e-3
    svm_lr: float = 0.01
    svm_epochs: int = 2000
    svm_c: float = 10.0
    knn_ks: tuple = (1, 3, 5, 7)
    knn_default_k: int = 5
    # share of each training split held back to pick the GAN's epoch; 0 keeps the last epoch
    gan_validation: float = 0.1


@dataclass
class HarnessRow:
    method: str
    fraction: float
    seed: int
    acc: float
    f1: float
    extra: dict = field(default_factory=dict)


def compare_harness(images, classes, fractions, seeds, config: HarnessConfig = HarnessConfig(), log=None) -> list[HarnessRow]:
    """Train every method on stratified splits and score the held-out part.

    ``images`` is ``(N, 2, 10, 10)``; ``classes`` are indices (0 relapsed,
    1 abstinent).
    """
    from . import gan

    images = np.asarray(images, dtype=np.float64)
    classes = np.asarray(classes, dtype=np.int64)
    for f in fractions:
        if not 0.0 < f < 1.0:
            raise ValueError("fractions must lie in (0, 1)")
    X = images.reshape(len(images), -1)
    y_bin = (classes == RELAPSED_INDEX).astype(np.int64)
    rows = []
    for seed in seeds:
        for frac in fractions:
            tr, te = stratified_indices(classes, frac, seed)
            truth = classes[te]

            def record(method, pred_classes, **extra):
                m = compute_metrics(pred_classes, truth)
                rows.append(HarnessRow(method, frac, seed, m.accuracy, m.f1, extra))
                if log:
                    log(f"{method} fraction={frac} seed={seed} acc={m.accuracy:.4f} f1={m.f1:.4f}")

            to_classes = lambda relapsed: np.where(relapsed == 1, 0, 1)
            lr_model = logreg_train(X[tr], y_bin[tr], config.logreg_lr, config.logreg_epochs, config.logreg_l2, seed)
            record("LogReg", to_classes(lr_model.predict(X[te])))
            svm = linsvm_train(X[tr], y_bin[tr], config.svm_lr, config.svm_epochs, config.svm_c, seed)
            record("SVM", to_classes(svm.predict(X[te])))
            k = select_k(X[tr], y_bin[tr], config.knn_ks, config.knn_default_k)
            record("KNN", to_classes(knn_predict_many(X[tr], y_bin[tr], X[te], k)), k=k)
            fit, val = tr, tr[:0]
            if config.gan_validation > 0:
                a, b = stratified_indices(classes[tr], 1.0 - config.gan_validation, seed, stream="validation")
                if len(b) and len(np.unique(classes[tr][a])) == 2:
                    fit, val = tr[a], tr[b]
            cfg = gan.TrainConfig(
                epochs=config.gan_epochs,
                batch_size=min(config.batch_size, len(fit)),
                learning_rate=config.learning_rate,
                noise_dim=config.noise_dim,
                seed=seed,
            )
            if len(val):
                model, _, epoch = gan.train_with_validation(images[fit], classes[fit], cfg, images[val], classes[val])
            else:
                model, _ = gan.train(images[fit], classes[fit], cfg)
                epoch = cfg.epochs
            p = gan.predict_relapse(model, images[te])
            record("GAN", np.where(p >= 0.5, 0, 1), epoch=epoch)
    return rows


def write_harness_csv(rows: Sequence[HarnessRow], path_or_file) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "fraction", "seed", "acc", "f1"])
        for r in rows:
            w.writerow([r.method, f"{r.fraction:g}", r.seed, f"{r.acc:.4f}", f"{r.f1:.4f}"])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            _write(fh)


def table_layout(rows: Sequence[HarnessRow]) -> list[list[str]]:
    """Pivot to method/metric rows by fraction columns (one block per seed)."""
    fractions = sorted({r.fraction for r in rows}, reverse=True)
    seeds = sorted({r.seed for r in rows})
    header = ["method", "metric", "seed"] + [f"{round(f * 100):d}%" for f in fractions]
    out = [header]
    lookup = {(r.method, r.fraction, r.seed): r for r in rows}
    for seed in seeds:
        for method in METHODS:
            for metric in ("acc", "f1"):
                cells = []
                for f in fractions:
                    r = lookup.get((method, f, seed))
                    cells.append("" if r is None else f"{getattr(r, metric):.4f}")
                out.append([method, metric.upper(), str(seed)] + cells)
    return out


def write_table_csv(rows: Sequence[HarnessRow], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(table_layout(rows))
