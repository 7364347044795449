"""Per-coordinate FTRL-Proximal training over expanded sparse vectors.

Weights are never stored: each coordinate keeps two accumulators, ``z`` (a
gradient-minus-correction sum) and ``n`` (a sum of squared gradients), and the
weight is recomputed on demand as

    w = 0                                        if |z| < l1
    w = -(z - sign(z) * l1) / ((beta + sqrt(n)) / alpha + l2)   otherwise

Updates touch only the support of the incoming vector: with prediction p and
target y, each active slot takes g = (p - y) * x, sigma = (sqrt(n + g^2) -
sqrt(n)) / alpha, then z += g - sigma * w and n += g^2, where w is the
pre-update weight. Training is sequential by contract; prediction from a
snapshot is safe concurrently.
"""

from __future__ import annotations

import math
import os
from array import array
from dataclasses import dataclass
from typing import Iterable

from .exceptions import NumericError
from .expansion import PqrIndexMap, build_index_map, expand
from .io import LabeledInstance
from .metrics import EvalReport, auc, logloss, rmse
from .separation import (
    FeatureSeparation,
    parse_separation_header,
    serialize_separation,
)

MODEL_MAGIC = "pqr-model v1"
DENSE_STATE_LIMIT = 1 << 22
MARGIN_CLIP = 35.0

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass(frozen=True)
class FtrlParams:
    """Hyperparameters of the proximal update plus the task kind."""

    alpha: float = 0.1
    beta: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    task: str = REGRESSION
    free_bias: bool = False  # exempt the bias coordinate from l1/l2

    def __post_init__(self):
        for name in ("alpha", "beta", "l1", "l2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError(f"l1/l2 must be nonnegative, got {self.l1}, {self.l2}")
        if self.task not in (REGRESSION, CLASSIFICATION):
            raise ValueError(f"unknown task {self.task!r}")


def ftrl_weight(z: float, n: float, params: FtrlParams) -> float:
    """Closed-form thresholded weight for one coordinate."""
    if abs(z) < params.l1:
        return 0.0
    sign = 1.0 if z >= 0.0 else -1.0
    return -(z - sign * params.l1) / ((params.beta + math.sqrt(n)) / params.alpha + params.l2)


def sigmoid(margin: float) -> float:
    """Clipped logistic link; stays inside the open interval (0, 1)."""
    if margin > MARGIN_CLIP:
        margin = MARGIN_CLIP
    elif margin < -MARGIN_CLIP:
        margin = -MARGIN_CLIP
    return 1.0 / (1.0 + math.exp(-margin))


def squared_loss(prediction: float, y: float) -> float:
    return 0.5 * (prediction - y) ** 2


def logistic_loss(margin: float, y: float) -> float:
    """log(1 + exp(-y * margin)) with y in {-1, +1}, overflow-safe."""
    m = y * margin
    if m >= 0.0:
        return math.log1p(math.exp(-m))
    return -m + math.log1p(math.exp(m))


def loss(prediction_input: float, y: float, task: str) -> float:
    """Per-round loss: squared for regression (input is the prediction),
    logistic for classification (input is the raw margin, y in {-1, +1})."""
    if task == REGRESSION:
        return squared_loss(prediction_input, y)
    if task == CLASSIFICATION:
        return logistic_loss(prediction_input, y)
    raise ValueError(f"unknown task {task!r}")


class _SparseStore(dict):
    """Hash-addressed accumulator storage; missing slots read as 0.0."""

    def __missing__(self, key):
        return 0.0


class FtrlState:
    """Accumulators z and n over the expanded coordinate space.

    Storage is a dense double array when ``dimension`` is small enough, a hash
    table otherwise; the two backends produce bit-identical trajectories. The
    bias coordinate is the last slot, ``dimension - 1``.
    """

    def __init__(self, dimension: int, params: FtrlParams, dense: bool | None = None):
        if dimension < 1:
            raise ValueError(f"dimension must be at least 1, got {dimension}")
        self.dimension = dimension
        self.params = params
        self.rounds_seen = 0
        if dense is None:
            dense = dimension <= DENSE_STATE_LIMIT
        self.dense = dense
        if dense:
            self.z = array("d", bytes(8 * dimension))
            self.n = array("d", bytes(8 * dimension))
        else:
            self.z = _SparseStore()
            self.n = _SparseStore()

    def weight(self, slot: int) -> float:
        """Materialize the weight of one coordinate from its accumulators."""
        if not 0 <= slot < self.dimension:
            raise ValueError(f"slot {slot} outside [0, {self.dimension})")
        params = self.params
        if params.free_bias and slot == self.dimension - 1:
            z = self.z[slot]
            return -z * params.alpha / (params.beta + math.sqrt(self.n[slot]))
        return ftrl_weight(self.z[slot], self.n[slot], params)

    def raw_margin(self, expanded: list[tuple[int, float]]) -> float:
        """Dot product of the lazily materialized weights with the support."""
        total = 0.0
        for slot, value in expanded:
            total += self.weight(slot) * value
        return total

    def predict(self, expanded: list[tuple[int, float]]) -> float:
        """Model output: the margin for regression, its sigmoid for classification."""
        margin = self.raw_margin(expanded)
        if self.params.task == CLASSIFICATION:
            return sigmoid(margin)
        return margin

    def update(self, expanded: list[tuple[int, float]], y: float) -> float:
        """One proximal round on the support of ``expanded``; returns the margin.

        For classification ``y`` must already be normalized to {0, 1}. State
        outside the support is untouched; a non-finite gradient aborts the
        round before mutating anything.
        """
        z = self.z
        n = self.n
        dim = self.dimension
        params = self.params
        alpha = params.alpha
        beta = params.beta
        l1 = params.l1
        l2 = params.l2
        bias_slot = dim - 1 if params.free_bias else -1

        weights = []
        margin = 0.0
        for slot, value in expanded:
            if not 0 <= slot < dim:
                raise ValueError(f"slot {slot} outside [0, {dim})")
            zi = z[slot]
            if slot == bias_slot:
                w = -zi * alpha / (beta + math.sqrt(n[slot]))
            elif abs(zi) < l1:
                w = 0.0
            else:
                sign = 1.0 if zi >= 0.0 else -1.0
                w = -(zi - sign * l1) / ((beta + math.sqrt(n[slot])) / alpha + l2)
            weights.append(w)
            margin += w * value

        p = sigmoid(margin) if params.task == CLASSIFICATION else margin
        residual = p - y
        gradients = []
        for slot, value in expanded:
            g = residual * value
            if not math.isfinite(g):
                raise NumericError(
                    f"non-finite gradient {g!r} (prediction {p!r}, target {y!r})",
                    round_index=self.rounds_seen + 1,
                    slot=slot,
                )
            gradients.append(g)

        for (slot, _), w, g in zip(expanded, weights, gradients):
            ni = n[slot]
            sigma = (math.sqrt(ni + g * g) - math.sqrt(ni)) / alpha
            z[slot] = z[slot] + g - sigma * w
            n[slot] = ni + g * g
        self.rounds_seen += 1
        return margin

    def nonzero_items(self) -> Iterable[tuple[int, float, float]]:
        """Yield ``(slot, z, n)`` for every touched coordinate, ascending slot."""
        if self.dense:
            z = self.z
            n = self.n
            for slot in range(self.dimension):
                if z[slot] != 0.0 or n[slot] != 0.0:
                    yield slot, z[slot], n[slot]
        else:
            for slot in sorted(self.z.keys() | self.n.keys()):
                zi = self.z[slot]
                ni = self.n[slot]
                if zi != 0.0 or ni != 0.0:
                    yield slot, zi, ni

    def nonzero_count(self) -> int:
        return sum(1 for _ in self.nonzero_items())


def normalize_binary_label(label: float) -> float:
    """Map a {-1,+1} or {0,1} label to {0, 1}; reject anything else."""
    if label == 1.0:
        return 1.0
    if label == -1.0 or label == 0.0:
        return 0.0
    raise ValueError(f"label {label!r} is not a binary class label")


def train_stream(
    state: FtrlState,
    instances: Iterable[LabeledInstance],
    index_map: PqrIndexMap,
    checkpoints: Iterable[int] = (),
    clip_range: tuple[float, float] | None = None,
) -> tuple[FtrlState, EvalReport]:
    """Run the online loop: expand, predict, record the progressive loss, update.

    Instances are consumed strictly in arrival order. The report carries the
    progressive (predict-before-update) metrics and the cumulative loss series
    sampled at ``checkpoints``. ``clip_range`` only clips the *recorded*
    regression predictions; the update path always sees the raw margin.
    """
    task = state.params.task
    classification = task == CLASSIFICATION
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if checkpoints and checkpoints[0] < 1:
        raise ValueError(f"checkpoint {checkpoints[0]} below 1")

    predictions: list[float] = []
    labels: list[float] = []
    per_round_losses: list[float] = []
    cumulative = 0.0
    sampled: list[int] = []
    sampled_losses: list[float] = []
    next_cp = 0
    t = 0
    for instance in instances:
        t += 1
        expanded = expand(instance.features, index_map)
        label = instance.label
        if classification:
            y = normalize_binary_label(label)
            margin = state.update(expanded, y)
            per_round_losses.append(logistic_loss(margin, 1.0 if y == 1.0 else -1.0))
            predictions.append(sigmoid(margin))
        else:
            margin = state.update(expanded, label)
            per_round_losses.append(squared_loss(margin, label))
            if clip_range is not None:
                margin = min(max(margin, clip_range[0]), clip_range[1])
            predictions.append(margin)
        labels.append(label)
        cumulative += per_round_losses[-1]
        if next_cp < len(checkpoints) and t == checkpoints[next_cp]:
            sampled.append(t)
            sampled_losses.append(cumulative)
            next_cp += 1

    report = build_report(task, predictions, labels, cumulative, sampled, sampled_losses)
    report.per_round_losses = per_round_losses
    return state, report


def build_report(task, predictions, labels, total_loss, checkpoints, cumulative_losses) -> EvalReport:
    report = EvalReport(
        task=task,
        count=len(predictions),
        total_loss=total_loss,
        checkpoints=list(checkpoints),
        cumulative_losses=list(cumulative_losses),
    )
    if not predictions:
        return report
    if task == REGRESSION:
        report.rmse = rmse(predictions, labels)
    else:
        report.logloss = logloss(predictions, labels)
        binary = [1.0 if lab > 0 else 0.0 for lab in labels]
        if 0.0 < sum(binary) < len(binary):
            report.auc = auc(predictions, binary)
    return report


def evaluate_stream(
    state: FtrlState,
    instances: Iterable[LabeledInstance],
    index_map: PqrIndexMap,
    checkpoints: Iterable[int] = (),
    clip_range: tuple[float, float] | None = None,
) -> EvalReport:
    """Pure evaluation pass: no state mutation, same report shape as training."""
    task = state.params.task
    classification = task == CLASSIFICATION
    checkpoints = sorted(set(int(c) for c in checkpoints))
    predictions: list[float] = []
    labels: list[float] = []
    cumulative = 0.0
    sampled: list[int] = []
    sampled_losses: list[float] = []
    next_cp = 0
    t = 0
    for instance in instances:
        t += 1
        expanded = expand(instance.features, index_map)
        label = instance.label
        margin = state.raw_margin(expanded)
        if classification:
            normalize_binary_label(label)  # task-mismatch check
            cumulative += logistic_loss(margin, 1.0 if label > 0 else -1.0)
            predictions.append(sigmoid(margin))
        else:
            cumulative += squared_loss(margin, label)
            if clip_range is not None:
                margin = min(max(margin, clip_range[0]), clip_range[1])
            predictions.append(margin)
        labels.append(label)
        if next_cp < len(checkpoints) and t == checkpoints[next_cp]:
            sampled.append(t)
            sampled_losses.append(cumulative)
            next_cp += 1
    return build_report(task, predictions, labels, cumulative, sampled, sampled_losses)


def save_model(path: str | os.PathLike, state: FtrlState, separation: FeatureSeparation) -> None:
    """Persist the model as the versioned text format; round-trips bit-exactly.

    ``free_bias`` is recorded with an extra header token only when enabled, so
    default-configuration files carry exactly the standard header fields.
    """
    params = state.params
    header = (
        f"{MODEL_MAGIC} d={separation.d} k={separation.k} task={params.task} "
        f"alpha={params.alpha!r} beta={params.beta!r} l1={params.l1!r} l2={params.l2!r}"
    )
    if params.free_bias:
        header += " bias=free"
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(header + "\n")
        handle.write(serialize_separation(separation))
        for slot, z, n in state.nonzero_items():
            handle.write(f"{slot} {float(z)!r} {float(n)!r}\n")


def load_model(path: str | os.PathLike, dense: bool | None = None):
    """Load a persisted model; returns ``(state, separation, index_map)``."""
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().split()
        if header[:2] != MODEL_MAGIC.split():
            raise ValueError(f"not a model file: {os.fspath(path)!r}")
        fields = dict(part.split("=", 1) for part in header[2:] if "=" in part)
        try:
            params = FtrlParams(
                alpha=float(fields["alpha"]),
                beta=float(fields["beta"]),
                l1=float(fields["l1"]),
                l2=float(fields["l2"]),
                task=fields["task"],
                free_bias=fields.get("bias") == "free",
            )
        except KeyError as missing:
            raise ValueError(f"model header missing field {missing}") from None
        d, k = parse_separation_header(handle.readline())
        if d != int(fields.get("d", -1)) or k != int(fields.get("k", -1)):
            raise ValueError("model header and separation block disagree on d/k")
        high = tuple(int(handle.readline()) for _ in range(k))
        separation = FeatureSeparation(d=d, high=high)
        index_map = build_index_map(separation)
        state = FtrlState(index_map.D, params, dense=dense)
        for line in handle:
            slot_text, z_text, n_text = line.split()
            slot = int(slot_text)
            if not 0 <= slot < index_map.D:
                raise ValueError(f"model slot {slot} outside [0, {index_map.D})")
            state.z[slot] = float(z_text)
            state.n[slot] = float(n_text)
    return state, separation, index_map
