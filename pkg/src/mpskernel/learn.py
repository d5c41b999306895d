"""Preprocessing, Gaussian-kernel baseline, SVM training on precomputed kernels, metrics.

The SVM solves the standard soft-margin dual over a precomputed kernel with
pairwise (SMO-style) updates on the maximal violating pair, deterministic
tie-breaking, and the usual box plus equality constraints.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .kernel import GramMatrix

DEFAULT_TOL = 1e-3
MAX_SMO_STEPS = 100_000
LABEL_COLUMN = "class"
_TEXT_LABELS = {"illicit": 1, "licit": -1}


class ConvergenceError(RuntimeError):
    """SMO failed to reach the requested tolerance within the iteration cap."""


@dataclass
class Dataset:
    features: np.ndarray  # (N, m) float64
    labels: np.ndarray  # (N,) values in {+1, -1}
    rescale_params: list[tuple[float, float]] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ValueError("features must be (N, m) with one label per row")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ValueError("labels must be +1 or -1")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]


@dataclass
class SvmModel:
    dual_coefs: np.ndarray  # alpha_i * y_i per training point
    bias: float
    C: float
    tol: float
    support_indices: np.ndarray  # points with alpha_i > 0


@dataclass
class Metrics:
    accuracy: float
    balanced_accuracy: float
    precision: float
    recall: float
    auc: float
    roc_points: list[tuple[float, float]] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "auc": self.auc,
        }


def rescale(train_features, other_features):
    """Per-feature min-max map onto [0, 2] using training-split extrema.

    Constant features map to the midpoint 1.0; the other split is clamped
    into [0, 2] after the map. Returns (train, other, params) where params is
    the per-feature (min, max) list.
    """
    train = np.asarray(train_features, dtype=np.float64)
    other = np.asarray(other_features, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] == 0:
        raise ValueError("training split must be a non-empty (N, m) array")
    if not (np.all(np.isfinite(train)) and np.all(np.isfinite(other))):
        raise ValueError("features must be finite")
    lo = train.min(axis=0)
    hi = train.max(axis=0)
    span = hi - lo
    constant = span == 0.0

    def apply(mat: np.ndarray) -> np.ndarray:
        out = np.empty_like(mat)
        out[:, ~constant] = 2.0 * (mat[:, ~constant] - lo[~constant]) / span[~constant]
        out[:, constant] = 1.0
        return np.clip(out, 0.0, 2.0)

    params = list(zip(lo.tolist(), hi.tolist()))
    return apply(train), apply(other), params


def apply_rescale(features, params) -> np.ndarray:
    """Apply stored (min, max) rescale parameters to new rows, with clamping."""
    mat = np.asarray(features, dtype=np.float64)
    lo = np.array([p[0] for p in params])
    hi = np.array([p[1] for p in params])
    span = hi - lo
    out = np.full_like(mat, 1.0)
    ok = span != 0.0
    out[:, ok] = 2.0 * (mat[:, ok] - lo[ok]) / span[ok]
    return np.clip(out, 0.0, 2.0)


def split_indices(labels, train_fraction: float = 0.8, seed: int = 0):
    """Class-balanced train/test index split, deterministic per seed."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("both classes must be present to split")
    for c in classes:
        members = np.flatnonzero(labels == c)
        order = rng.permutation(members)
        n_train = int(round(train_fraction * members.size))
        train_idx.extend(order[:n_train].tolist())
        test_idx.extend(order[n_train:].tolist())
    return np.sort(np.array(train_idx, dtype=np.int64)), np.sort(
        np.array(test_idx, dtype=np.int64)
    )


def split(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0):
    """Split a dataset into class-balanced train and test parts."""
    tr, te = split_indices(dataset.labels, train_fraction, seed)
    return (
        Dataset(dataset.features[tr], dataset.labels[tr]),
        Dataset(dataset.features[te], dataset.labels[te]),
    )


def default_bandwidth(train_features) -> float:
    """1 / (m * population variance of all training feature entries)."""
    mat = np.asarray(train_features, dtype=np.float64)
    var = float(np.var(mat))
    if var == 0.0:
        raise ValueError("training features are constant, bandwidth undefined")
    return 1.0 / (mat.shape[1] * var)


def gaussian_gram(X_rows, X_cols, alpha: float | None = None) -> GramMatrix:
    """exp(-alpha * ||x - x'||^2) kernel matrix.

    When ``alpha`` is omitted it defaults to :func:`default_bandwidth` of
    ``X_cols`` (the training side). The matrix kind is train when both sides
    are the same array.
    """
    rows = np.asarray(X_rows, dtype=np.float64)
    cols = np.asarray(X_cols, dtype=np.float64)
    if alpha is None:
        alpha = default_bandwidth(cols)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    sq = (
        np.sum(rows**2, axis=1)[:, None]
        + np.sum(cols**2, axis=1)[None, :]
        - 2.0 * rows @ cols.T
    )
    np.maximum(sq, 0.0, out=sq)
    K = np.exp(-alpha * sq)
    kind = "train" if X_rows is X_cols else "test"
    if kind == "train":
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
    return GramMatrix(K, kind)


def _kernel_entries(K) -> np.ndarray:
    return K.entries if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)


def svm_train(
    K_train,
    labels,
    C: float,
    tol: float = DEFAULT_TOL,
    objective_trace: list[float] | None = None,
) -> SvmModel:
    """Train a soft-margin SVM on a precomputed kernel via SMO pair updates.

    Repeatedly selects the maximal violating pair (ties broken by lowest
    index), solves the two-variable subproblem exactly, and stops once the
    violation gap drops to ``tol``. Raises :class:`ConvergenceError` after
    ``MAX_SMO_STEPS`` pair updates.
    """
    K = _kernel_entries(K_train)
    y = np.asarray(labels, dtype=np.float64)
    n = y.size
    if K.shape != (n, n):
        raise ValueError(f"kernel must be ({n}, {n}), got {K.shape}")
    if not np.allclose(K, K.T, atol=1e-10):
        raise ValueError("training kernel must be symmetric")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if C <= 0:
        raise ValueError("C must be positive")

    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a^T Q a - sum(a)

    def objective() -> float:
        # dual objective sum(a) - 1/2 a^T Q a, via a^T Q a = a . (grad + 1)
        return float(alpha.sum() - 0.5 * (alpha @ (grad + 1.0)))

    if objective_trace is not None:
        objective_trace.append(objective())

    gap = np.inf
    for _ in range(MAX_SMO_STEPS):
        minus_yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(minus_yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(minus_yg[low])])
        gap = minus_yg[i] - minus_yg[j]
        if gap <= tol:
            break
        # exact solution of the two-variable subproblem along the constraint
        quad = Q[i, i] + Q[j, j] - 2.0 * y[i] * y[j] * Q[i, j]
        quad = max(quad, 1e-300)
        delta = gap / quad
        if y[i] > 0:
            delta = min(delta, C - alpha[i])
        else:
            delta = min(delta, alpha[i])
        if y[j] > 0:
            delta = min(delta, alpha[j])
        else:
            delta = min(delta, C - alpha[j])
        alpha[i] += y[i] * delta
        alpha[j] -= y[j] * delta
        grad += delta * (y[i] * Q[:, i] - y[j] * Q[:, j])
        if objective_trace is not None:
            objective_trace.append(objective())
    else:
        raise ConvergenceError(
            f"SMO did not converge within {MAX_SMO_STEPS} steps, final gap {gap:.3e}"
        )

    minus_yg = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(np.mean(minus_yg[free]))
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = minus_yg[up].max() if up.any() else 0.0
        lo = minus_yg[low].min() if low.any() else 0.0
        bias = float(0.5 * (hi + lo))
    return SvmModel(
        dual_coefs=alpha * y,
        bias=bias,
        C=C,
        tol=tol,
        support_indices=np.flatnonzero(alpha > 0),
    )


def decision_scores(model: SvmModel, K_eval) -> np.ndarray:
    """score_j = sum_i dual_coefs_i * K_eval[j, i] + bias."""
    K = _kernel_entries(K_eval)
    if K.ndim != 2 or K.shape[1] != model.dual_coefs.size:
        raise ValueError(
            f"evaluation kernel must have {model.dual_coefs.size} columns, got {K.shape}"
        )
    return K @ model.dual_coefs + model.bias


def evaluate(scores, labels, threshold: float = 0.0) -> Metrics:
    """Threshold metrics plus the full ROC sweep and its trapezoidal area.

    Ties in the scores advance the ROC diagonally, which makes the area equal
    to the probability that a positive outscores a negative with half credit
    for ties.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.size == 0:
        raise ValueError("scores and labels must be equal-length and non-empty")
    if not np.all(np.isin(labels, (-1, 1))):
        raise ValueError("labels must be +1 or -1")
    pos = labels == 1
    neg = labels == -1
    n_pos = int(pos.sum())
    n_neg = int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present to evaluate")

    pred_pos = scores > threshold
    tp = int(np.sum(pred_pos & pos))
    fp = int(np.sum(pred_pos & neg))
    tn = n_neg - fp
    accuracy = (tp + tn) / scores.size
    tpr_at = tp / n_pos
    tnr_at = tn / n_neg
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0

    # ROC: sweep thresholds over distinct score values, descending
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = pos[order].astype(np.float64)
    distinct = np.flatnonzero(np.diff(sorted_scores)) if scores.size > 1 else np.array([], dtype=int)
    cut = np.concatenate([distinct, [scores.size - 1]])
    tps = np.cumsum(sorted_pos)[cut]
    fps = 1 + cut - tps
    tpr = np.concatenate([[0.0], tps / n_pos])
    fpr = np.concatenate([[0.0], fps / n_neg])
    auc = float(0.5 * np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1])))
    return Metrics(
        accuracy=float(accuracy),
        balanced_accuracy=float(0.5 * (tpr_at + tnr_at)),
        precision=float(precision),
        recall=float(tpr_at),
        auc=auc,
        roc_points=list(zip(fpr.tolist(), tpr.tolist())),
    )


def load_dataset_csv(path) -> Dataset:
    """Read a dataset CSV: header row, a ``class`` label column, numeric features."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if LABEL_COLUMN not in header:
            raise ValueError(f"{path}: missing required label column {LABEL_COLUMN!r}")
        label_pos = header.index(LABEL_COLUMN)
        rows = []
        labels = []
        for record in reader:
            if not record:
                continue
            raw = record[label_pos].strip()
            if raw in _TEXT_LABELS:
                labels.append(_TEXT_LABELS[raw])
            else:
                labels.append(int(float(raw)))
            rows.append([float(v) for i, v in enumerate(record) if i != label_pos])
    return Dataset(np.array(rows, dtype=np.float64), np.array(labels))


def save_dataset_csv(path, dataset: Dataset, feature_names: list[str] | None = None) -> None:
    names = feature_names or [f"f{i}" for i in range(dataset.m)]
    if len(names) != dataset.m:
        raise ValueError("feature_names length mismatch")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + [LABEL_COLUMN])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([f"{v:.17g}" for v in row] + [str(int(label))])


def model_to_dict(model: SvmModel) -> dict:
    return {
        "dual_coefs": model.dual_coefs.tolist(),
        "bias": model.bias,
        "C": model.C,
        "tol": model.tol,
        "support_indices": model.support_indices.tolist(),
    }


def save_model_json(path, model: SvmModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")
