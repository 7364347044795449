"""Evaluation metrics, progressive reports, and empirical regret machinery.

The regret path compares a learner's cumulative progressive loss against the
loss of the best fixed weight vector in hindsight, found numerically by
full-batch gradient descent on the expanded linear model (convexity makes the
numeric optimum global, so the oracle tolerance bounds the measurement error).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import ConvergenceError, UndefinedMetricError
from .expansion import PqrIndexMap, expand
from .io import LabeledInstance

LOGLOSS_EPS = 1e-15


@dataclass
class EvalReport:
    """Scalar metrics plus the cumulative loss series sampled at checkpoints."""

    task: str
    count: int
    rmse: float | None = None
    auc: float | None = None
    logloss: float | None = None
    total_loss: float = 0.0
    checkpoints: list[int] = field(default_factory=list)
    cumulative_losses: list[float] = field(default_factory=list)
    per_round_losses: list[float] | None = None  # populated by training, for regret analysis

    def summary_line(self) -> str:
        parts = [f"task={self.task}", f"instances={self.count}"]
        if self.task == "regression":
            parts.append(f"rmse={_fmt(self.rmse)}")
        else:
            parts.append(f"auc={_fmt(self.auc)}")
            parts.append(f"logloss={_fmt(self.logloss)}")
        parts.append(f"cumulative_loss={_fmt(self.total_loss)}")
        return " ".join(parts)


@dataclass
class RegretSeries:
    """Learner-minus-oracle cumulative losses at increasing checkpoints.

    Finite-sample regret can be negative; values are computed, never assumed.
    """

    checkpoints: list[int]
    learner_losses: list[float]
    oracle_losses: list[float]
    regrets: list[float]


def _fmt(value) -> str:
    return "undefined" if value is None else f"{value:.6f}"


def rmse(predictions, labels) -> float:
    """Root mean squared error over paired sequences."""
    predictions = np.asarray(predictions, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise ValueError(f"shape mismatch: {predictions.shape} vs {labels.shape}")
    if predictions.size == 0:
        raise ValueError("rmse of empty input")
    return float(np.sqrt(np.mean((predictions - labels) ** 2)))


def auc(scores, labels) -> float:
    """Mann-Whitney AUC via rank sums, ties credited one half.

    ``labels`` are binary in any of the {0,1} / {-1,+1} conventions; anything
    greater than zero counts as positive.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(f"shape mismatch: {scores.shape} vs {labels.shape}")
    positive = labels > 0
    n_pos = int(positive.sum())
    n_neg = scores.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=float)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # average 1-based rank for the tie block [i, j]
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_pos = float(ranks[positive].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def logloss(probabilities, labels) -> float:
    """Mean negative log-likelihood; probabilities clamped to [eps, 1-eps]."""
    probabilities = np.asarray(probabilities, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probabilities.shape != labels.shape or probabilities.ndim != 1:
        raise ValueError(f"shape mismatch: {probabilities.shape} vs {labels.shape}")
    if probabilities.size == 0:
        raise ValueError("logloss of empty input")
    p = np.clip(probabilities, LOGLOSS_EPS, 1.0 - LOGLOSS_EPS)
    y = (labels > 0).astype(float)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def expand_dataset(dataset: list[LabeledInstance], index_map: PqrIndexMap):
    """Expand every instance into one CSR matrix of width D, plus the labels."""
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    labels = np.empty(len(dataset))
    for row, instance in enumerate(dataset):
        for slot, value in expand(instance.features, index_map):
            indices.append(slot)
            data.append(value)
        indptr.append(len(data))
        labels[row] = instance.label
    matrix = sp.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(dataset), index_map.D),
    )
    return matrix, labels


def batch_oracle(
    dataset: list[LabeledInstance],
    index_map: PqrIndexMap,
    task: str = "regression",
    gradient_tol: float = 1e-8,
    max_iterations: int = 100_000,
):
    """Best fixed decision in hindsight, by full-batch gradient descent.

    Minimizes the summed per-round loss of a fixed expanded weight vector over
    ``dataset``, starting from zero, until the gradient norm drops below
    ``gradient_tol``. Both losses use steepest descent with exact line search:
    closed form for the quadratic objective, safeguarded 1D Newton for the
    logistic one. Returns ``(weights, total_loss)``.
    """
    if not dataset:
        raise ValueError("batch oracle needs at least one instance")
    if task not in ("regression", "classification"):
        raise ValueError(f"unknown task {task!r}")
    if len(dataset) > 100_000 or index_map.D > 100_000:
        raise ValueError(
            f"batch oracle is for verification only; refusing {len(dataset)} instances "
            f"at expanded dimension {index_map.D} (limits: 1e5 each)"
        )
    X, labels = expand_dataset(dataset, index_map)
    w = np.zeros(index_map.D)

    if task == "regression":
        y = labels
        residual = X @ w - y  # zero start: -y
        for iteration in range(max_iterations):
            if iteration % 128 == 127:
                residual = X @ w - y  # shed incremental-update drift
            grad = X.T @ residual
            grad_norm = float(np.linalg.norm(grad))
            if grad_norm < gradient_tol:
                residual = X @ w - y
                return w, 0.5 * float(residual @ residual)
            Xg = X @ grad
            curvature = float(Xg @ Xg)
            if curvature <= 0.0:
                residual = X @ w - y
                return w, 0.5 * float(residual @ residual)
            step = (grad_norm * grad_norm) / curvature
            w -= step * grad
            residual -= step * Xg
        raise ConvergenceError(
            "batch oracle did not converge", gradient_norm=grad_norm, iterations=max_iterations
        )

    y_pm = np.where(labels > 0, 1.0, -1.0)
    # global smoothness bound 0.25 * lambda_max(X'X) seeds the line search
    lipschitz = 0.25 * _spectral_norm_sq(X)
    base_step = 1.0 / lipschitz if lipschitz > 0 else 1.0
    margin = X @ w
    value = float(np.sum(np.logaddexp(0.0, -y_pm * margin)))
    for _ in range(max_iterations):
        sig = _sigmoid_vec(-y_pm * margin)
        grad = X.T @ (-y_pm * sig)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < gradient_tol:
            return w, value
        direction = X @ grad
        step = _logistic_line_search(margin, direction, y_pm, base_step, grad_norm)
        trial = float(np.sum(np.logaddexp(0.0, -y_pm * (margin - step * direction))))
        if trial >= value:
            step = base_step  # Newton overshot; the inverse-Lipschitz step always descends
            trial = float(np.sum(np.logaddexp(0.0, -y_pm * (margin - step * direction))))
        w -= step * grad
        margin -= step * direction
        value = trial
    raise ConvergenceError(
        "batch oracle did not converge", gradient_norm=grad_norm, iterations=max_iterations
    )


def _logistic_line_search(margin, direction, y_pm, base_step, grad_norm) -> float:
    """Exact line search along the steepest-descent ray by safeguarded 1D Newton.

    phi(s) = sum log(1 + exp(-y (margin - s * direction))) is convex in s with
    phi'(0) = -|grad|^2 < 0; the fixed inverse-Lipschitz step is over-cautious
    once local curvature drops, so the Newton step adapts to it.
    """
    yu = y_pm * direction

    def derivatives(s):
        sig = _sigmoid_vec(-y_pm * (margin - s * direction))
        d1 = float(yu @ sig)
        d2 = float((direction * direction) @ (sig * (1.0 - sig)))
        return d1, d2

    s = base_step
    for _ in range(40):
        d1, d2 = derivatives(s)
        if abs(d1) <= 1e-12 * grad_norm * grad_norm or d2 <= 0.0:
            break
        step_change = -d1 / d2
        if not math.isfinite(step_change):
            break
        new_s = s + step_change
        if new_s <= 0.0:
            new_s = s / 2.0
        if abs(new_s - s) <= 1e-12 * max(1.0, s):
            s = new_s
            break
        s = new_s
    return s if s > 0.0 else base_step


def _spectral_norm_sq(X, iterations: int = 200) -> float:
    """Largest eigenvalue of X'X by power iteration (deterministic start)."""
    v = np.ones(X.shape[1]) / math.sqrt(X.shape[1])
    eig = 0.0
    for _ in range(iterations):
        u = X.T @ (X @ v)
        norm = float(np.linalg.norm(u))
        if norm == 0.0:
            return 0.0
        v = u / norm
        if abs(norm - eig) <= 1e-10 * max(1.0, eig):
            eig = norm
            break
        eig = norm
    return eig


def _sigmoid_vec(m):
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    e = np.exp(m[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def regret_series(per_round_losses, checkpoints, oracle_losses) -> RegretSeries:
    """Pair the learner's cumulative losses with hindsight-oracle losses.

    ``oracle_losses[j]`` must be the batch-oracle total loss on the prefix of
    length ``checkpoints[j]``.
    """
    checkpoints = list(checkpoints)
    oracle_losses = list(oracle_losses)
    if len(checkpoints) != len(oracle_losses):
        raise ValueError("one oracle loss per checkpoint required")
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if checkpoints and (checkpoints[0] < 1 or checkpoints[-1] > len(per_round_losses)):
        raise ValueError(
            f"checkpoint {checkpoints[-1]} beyond recorded losses ({len(per_round_losses)})"
        )
    learner = []
    running = 0.0
    next_checkpoint = 0
    for t, value in enumerate(per_round_losses, start=1):
        running += value
        if next_checkpoint < len(checkpoints) and t == checkpoints[next_checkpoint]:
            learner.append(running)
            next_checkpoint += 1
    regrets = [lo - oo for lo, oo in zip(learner, oracle_losses)]
    return RegretSeries(checkpoints, learner, oracle_losses, regrets)


def write_report_csv(report: EvalReport, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["checkpoint", "cumulative_loss"])
        for checkpoint, value in zip(report.checkpoints, report.cumulative_losses):
            writer.writerow([checkpoint, repr(value)])


def write_regret_csv(series: RegretSeries, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["checkpoint", "learner_loss", "oracle_loss", "regret"])
        for row in zip(series.checkpoints, series.learner_losses, series.oracle_losses, series.regrets):
            writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
