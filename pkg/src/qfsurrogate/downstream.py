"""Downstream classifiers and evaluation metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import log_softmax, softmax
from scipy.stats import rankdata

CLASSIFIER_KINDS = ("multinomial-logistic", "nearest-centroid")


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True)
class Classifier:
    kind: str
    classes: np.ndarray
    weights: np.ndarray | None = None  # (C, D), on standardized features
    bias: np.ndarray | None = None
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    centroids: np.ndarray | None = None
    n_iter: int = 0
    losses: tuple = field(default=(), compare=False, repr=False)

    @property
    def n_features(self):
        return (self.weights if self.kind == "multinomial-logistic" else self.centroids).shape[1]

    def scores(self, features):
        """Per-class scores (softmax probabilities), shape (N, C)."""
        X = np.atleast_2d(np.asarray(features, dtype=float))
        if X.shape[1] != self.n_features:
            raise ClassifierError(f"classifier expects {self.n_features} features, got {X.shape[1]}")
        if self.kind == "multinomial-logistic":
            return softmax(_standardize(X, self.mean, self.std) @ self.weights.T + self.bias, axis=1)
        d2 = ((X[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return softmax(-d2, axis=1)

    def predict(self, features):
        return self.classes[np.argmax(self.scores(features), axis=1)]

    def to_dict(self):
        out = {"kind": self.kind, "classes": self.classes.tolist(), "n_iter": self.n_iter}
        for name in ("weights", "bias", "mean", "std", "centroids"):
            val = getattr(self, name)
            out[name] = None if val is None else val.tolist()
        return out

    @classmethod
    def from_dict(cls, d):
        arr = {k: None if d[k] is None else np.asarray(d[k], dtype=float)
               for k in ("weights", "bias", "mean", "std", "centroids")}
        return cls(d["kind"], np.asarray(d["classes"], dtype=int), n_iter=d["n_iter"], **arr)


def _standardize(X, mean, std):
    return (X - mean) / std


def logistic_loss_grad(W, b, X, Y, reg):
    """Mean cross-entropy plus ``reg/2 * ||W||^2`` and its gradient.

    ``Y`` is the one-hot label matrix.
    """
    logits = X @ W.T + b
    logp = log_softmax(logits, axis=1)
    N = X.shape[0]
    loss = -np.sum(Y * logp) / N + 0.5 * reg * np.sum(W ** 2)
    R = (np.exp(logp) - Y) / N
    return loss, R.T @ X + reg * W, R.sum(axis=0)


def train_classifier(features, labels, kind="multinomial-logistic", seed=0, reg=1e-3,
                     max_iter=3000, tol=1e-5, step=1.0):
    """Fit a downstream classifier.

    The logistic model is trained by full-batch gradient descent on
    standardized features with a fixed step that is halved whenever a step
    would increase the loss, so the loss sequence is non-increasing. It stops
    when the gradient norm drops below ``tol`` or after ``max_iter`` steps.
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(labels, dtype=int)
    if not np.all(np.isfinite(X)):
        raise ClassifierError("features contain non-finite values")
    classes = np.unique(y)
    if classes.size < 2:
        raise ClassifierError("need at least two classes to train a classifier")
    if kind == "nearest-centroid":
        cents = np.stack([X[y == c].mean(axis=0) for c in classes])
        return Classifier(kind, classes, centroids=cents)
    if kind != "multinomial-logistic":
        raise ClassifierError(f"unknown classifier {kind!r}; expected one of {CLASSIFIER_KINDS}")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    Xs = _standardize(X, mean, std)
    Y = (y[:, None] == classes[None, :]).astype(float)
    rng = np.random.default_rng(seed)
    W = 1e-3 * rng.standard_normal((classes.size, X.shape[1]))
    b = np.zeros(classes.size)
    loss, gW, gb = logistic_loss_grad(W, b, Xs, Y, reg)
    losses = [loss]
    it = 0
    for it in range(1, max_iter + 1):
        if np.sqrt(np.sum(gW ** 2) + np.sum(gb ** 2)) <= tol:
            break
        eta = step
        while True:
            W_new, b_new = W - eta * gW, b - eta * gb
            new_loss, gW_new, gb_new = logistic_loss_grad(W_new, b_new, Xs, Y, reg)
            if new_loss <= loss or eta < 1e-12:
                break
            eta /= 2.0
        if new_loss > loss:
            break
        W, b, loss, gW, gb = W_new, b_new, new_loss, gW_new, gb_new
        losses.append(loss)
    return Classifier(kind, classes, weights=W, bias=b, mean=mean, std=std, n_iter=it,
                      losses=tuple(losses))


# -- metrics --------------------------------------------------------------------------


def binary_auc(scores, positives):
    """Area under the ROC curve as the Mann-Whitney rank statistic (ties averaged)."""
    scores = np.asarray(scores, dtype=float)
    pos = np.asarray(positives, dtype=bool)
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def multiclass_auc(score_matrix, labels, classes):
    """Binary AUC for two classes, macro one-vs-rest average otherwise."""
    S = np.asarray(score_matrix, dtype=float)
    labels = np.asarray(labels)
    if len(classes) == 2:
        return binary_auc(S[:, 1], labels == classes[1])
    per_class = [binary_auc(S[:, k], labels == c) for k, c in enumerate(classes)]
    per_class = [a for a in per_class if not np.isnan(a)]
    return float(np.mean(per_class)) if per_class else float("nan")


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    auc: float
    precision: dict
    recall: dict
    confusion: np.ndarray
    classes: tuple

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "auc": self.auc,
            "precision": {str(k): v for k, v in self.precision.items()},
            "recall": {str(k): v for k, v in self.recall.items()},
            "confusion": self.confusion.tolist(),
            "classes": list(self.classes),
        }

    def to_text(self):
        lines = [f"accuracy  {self.accuracy:.4f}", f"auc       {self.auc:.4f}", "",
                 "class  precision  recall"]
        for c in self.classes:
            lines.append(f"{c:>5}  {self.precision[c]:9.4f}  {self.recall[c]:6.4f}")
        lines += ["", "confusion (rows = true, cols = predicted)"]
        lines += ["  ".join(f"{v:5d}" for v in row) for row in self.confusion]
        return "\n".join(lines) + "\n"


def evaluate(clf: Classifier, features, labels) -> EvalReport:
    labels = np.asarray(labels, dtype=int)
    unseen = set(np.unique(labels)) - set(clf.classes.tolist())
    if unseen:
        raise ClassifierError(f"labels contain classes unseen in training: {sorted(unseen)}")
    S = clf.scores(features)
    pred = clf.classes[np.argmax(S, axis=1)]
    C = clf.classes.size
    pos = {int(c): k for k, c in enumerate(clf.classes)}
    conf = np.zeros((C, C), dtype=int)
    np.add.at(conf, ([pos[int(t)] for t in labels], [pos[int(p)] for p in pred]), 1)
    classes = tuple(int(c) for c in clf.classes)
    col, row = conf.sum(axis=0), conf.sum(axis=1)
    diag = np.diag(conf)
    precision = {c: float(diag[k] / col[k]) if col[k] else 0.0 for k, c in enumerate(classes)}
    recall = {c: float(diag[k] / row[k]) if row[k] else 0.0 for k, c in enumerate(classes)}
    return EvalReport(
        accuracy=float(diag.sum() / conf.sum()),
        auc=multiclass_auc(S, labels, clf.classes),
        precision=precision,
        recall=recall,
        confusion=conf,
        classes=classes,
    )


def save_classifier(clf: Classifier, path):
    Path(path).write_text(json.dumps(clf.to_dict(), indent=1) + "\n", encoding="utf-8")


def load_classifier(path) -> Classifier:
    return Classifier.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
