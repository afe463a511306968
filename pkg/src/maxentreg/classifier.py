"""Minimal multinomial classifier with manual backprop.

The model is a single affine layer or an affine-ReLU-affine stack over
float64 feature vectors, trained by SGD with momentum and coupled weight
decay (v <- mu*v + g + wd*theta; theta <- theta - lr*v). The learning
rate decays by a fixed factor when the mean epoch training loss stops
improving, down to a floor. The entropy-regularization weight can change
over epochs through a (threshold, value) schedule.

Training is deterministic given the config seed: parameters are drawn
uniform in +-1/sqrt(fan_in) from a seeded generator and each epoch's
batch order comes from a generator seeded by (seed, epoch). Runs with
different seeds share no state and may execute in parallel.

Checkpoint layout (``save_checkpoint``): a numpy ``.npz`` archive with
arrays ``w0, b0[, w1, b1]`` (float64, lossless) plus a ``meta`` entry
holding a JSON string with at least the layer dimensions; callers may add
seed/epoch fields.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from maxentreg import losses
from maxentreg.exceptions import NumericalError, TrainingDiverged

LOSS_KINDS = ("ce", "mer", "ls")

# seed-stream tags so init and shuffling draw from distinct generators
_INIT_STREAM = 0
_SHUFFLE_STREAM = 1


@dataclass
class ModelParams:
    """Weights and biases, one or two affine layers (hidden layer is ReLU)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def class_count(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def hidden_dim(self) -> int | None:
        return self.weights[0].shape[1] if len(self.weights) == 2 else None

    def arrays(self) -> list[np.ndarray]:
        return list(self.weights) + list(self.biases)

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass
class OptimizerState:
    """Momentum buffers plus the SGD hyperparameters."""

    velocities: list[np.ndarray]
    learning_rate: float
    momentum: float
    weight_decay: float


class BatchStats(NamedTuple):
    ce: float
    entropy: float
    objective: float


class EvalStats(NamedTuple):
    accuracy: float
    mean_ce: float
    mean_entropy: float


@dataclass
class TrainConfig:
    """Everything a training run depends on, seed included."""

    loss_kind: str = "mer"
    lam: float = 0.0
    lambda_schedule: list[tuple[int, float]] | None = None
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-2
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_decay_factor: float = 0.1
    plateau_patience: int = 5
    min_improvement: float = 1e-4
    min_learning_rate: float = 1e-5
    hidden_dim: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.loss_kind == "ls" and self.lam > 1:
            raise ValueError(f"label smoothing weight must be in [0, 1], got {self.lam}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0 or not 0 <= self.momentum < 1 or self.weight_decay < 0:
            raise ValueError("bad optimizer settings")
        if self.lambda_schedule is not None:
            thresholds = [e for e, _ in self.lambda_schedule]
            if not self.lambda_schedule or thresholds != sorted(set(thresholds)):
                raise ValueError("schedule epochs must be strictly increasing")
            if any(v < 0 for _, v in self.lambda_schedule):
                raise ValueError("schedule weights must be >= 0")

    def lambda_for_epoch(self, epoch: int) -> float:
        """Last schedule value whose threshold <= epoch; the first value
        applies before the first threshold; plain lam without a schedule."""
        if self.lambda_schedule is None:
            return self.lam
        value = self.lambda_schedule[0][1]
        for threshold, lam in self.lambda_schedule:
            if threshold <= epoch:
                value = lam
        return value


@dataclass
class EpochMetrics:
    epoch: int
    lam: float
    learning_rate: float
    train_ce: float
    train_entropy: float
    train_loss: float
    train_accuracy: float
    eval_accuracy: float | None = None


@dataclass
class TrainResult:
    params: ModelParams
    epoch_metrics: list[EpochMetrics] = field(default_factory=list)
    train_ce: float = math.nan
    train_entropy: float = math.nan
    train_accuracy: float = math.nan
    eval_accuracy: float | None = None
    experimental_cpp: float = math.nan


def init_params(
    input_dim: int, class_count: int, hidden_dim: int | None = None, seed: int = 0
) -> ModelParams:
    """Uniform +-1/sqrt(fan_in) initialization, seed-controlled."""
    if input_dim < 1 or class_count < 2:
        raise ValueError("need input_dim >= 1 and class_count >= 2")
    if hidden_dim is not None and hidden_dim < 1:
        raise ValueError(f"hidden_dim must be >= 1, got {hidden_dim}")
    rng = np.random.default_rng([seed, _INIT_STREAM])
    dims = [input_dim, class_count] if hidden_dim is None else [input_dim, hidden_dim, class_count]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return ModelParams(weights, biases)


def _forward_hidden(params: ModelParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    z = X @ params.weights[0] + params.biases[0]
    if len(params.weights) == 1:
        return z, None
    logits = np.maximum(z, 0.0) @ params.weights[1] + params.biases[1]
    return logits, z


def forward(params: ModelParams, X) -> np.ndarray:
    """Per-sample scores (N, C) for a feature matrix (N, D)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ValueError(
            f"expected features of shape (N, {params.input_dim}), got {X.shape}"
        )
    return _forward_hidden(params, X)[0]


def _logit_gradient(P: np.ndarray, y: np.ndarray, loss_kind: str, lam: float) -> np.ndarray:
    if loss_kind == "mer":
        return losses.regularized_gradient(P, y, lam)
    if loss_kind == "ce":
        return losses.regularized_gradient(P, y, 0.0)
    if loss_kind == "ls":
        return losses.label_smoothing_gradient(P, y, lam)
    raise ValueError(f"unknown loss_kind {loss_kind!r}")


def _objective(P: np.ndarray, y: np.ndarray, loss_kind: str, lam: float) -> BatchStats:
    ce = float(np.mean(losses.cross_entropy(P, y)))
    h = float(np.mean(losses.entropy(P)))
    if loss_kind == "mer":
        obj = ce - lam * h
    elif loss_kind == "ce":
        obj = ce
    else:
        obj = float(np.mean(losses.label_smoothing_loss(P, y, lam)))
    return BatchStats(ce=ce, entropy=h, objective=obj)


def backward(
    params: ModelParams, X, y, loss_kind: str, lam: float
) -> tuple[ModelParams, BatchStats]:
    """Gradients of the mean per-sample loss, plus the batch statistics."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    logits, z_hidden = _forward_hidden(params, X)
    P = losses.softmax(logits)
    stats = _objective(P, y, loss_kind, lam)
    G = _logit_gradient(P, y, loss_kind, lam) / X.shape[0]
    if z_hidden is None:
        grads = ModelParams([X.T @ G], [G.sum(axis=0)])
    else:
        a = np.maximum(z_hidden, 0.0)
        gw1 = a.T @ G
        gb1 = G.sum(axis=0)
        dz = (G @ params.weights[1].T) * (z_hidden > 0.0)
        grads = ModelParams([X.T @ dz, gw1], [dz.sum(axis=0), gb1])
    return grads, stats


def init_optimizer(
    params: ModelParams,
    learning_rate: float,
    momentum: float = 0.9,
    weight_decay: float = 1e-4,
) -> OptimizerState:
    return OptimizerState(
        velocities=[np.zeros_like(a) for a in params.arrays()],
        learning_rate=learning_rate,
        momentum=momentum,
        weight_decay=weight_decay,
    )


def sgd_step(
    params: ModelParams, grads: ModelParams, state: OptimizerState
) -> tuple[ModelParams, OptimizerState]:
    """One momentum-SGD update in place; returns (params, state)."""
    for i, (theta, g, v) in enumerate(zip(params.arrays(), grads.arrays(), state.velocities)):
        if not np.all(np.isfinite(g)):
            finite = g[np.isfinite(g)]
            peak = float(np.max(np.abs(finite))) if finite.size else math.inf
            raise NumericalError(
                f"non-finite gradient in parameter array {i} "
                f"(max finite |g| = {peak:.3g})"
            )
        v *= state.momentum
        v += g + state.weight_decay * theta
        theta -= state.learning_rate * v
    return params, state


def evaluate(params: ModelParams, dataset) -> EvalStats:
    """Argmax accuracy (ties go to the lowest class index) plus mean CE and entropy."""
    P = losses.softmax(forward(params, dataset.features))
    predictions = np.argmax(P, axis=1)
    return EvalStats(
        accuracy=float(np.mean(predictions == dataset.labels)),
        mean_ce=float(np.mean(losses.cross_entropy(P, dataset.labels))),
        mean_entropy=float(np.mean(losses.entropy(P))),
    )


def _epoch_snapshot(
    params: ModelParams, config: TrainConfig, train_ds, eval_ds, epoch: int, lam: float, lr: float
) -> EpochMetrics:
    P = losses.softmax(forward(params, train_ds.features))
    stats = _objective(P, train_ds.labels, config.loss_kind, lam)
    accuracy = float(np.mean(np.argmax(P, axis=1) == train_ds.labels))
    eval_accuracy = evaluate(params, eval_ds).accuracy if eval_ds is not None else None
    return EpochMetrics(
        epoch=epoch,
        lam=lam,
        learning_rate=lr,
        train_ce=stats.ce,
        train_entropy=stats.entropy,
        train_loss=stats.objective,
        train_accuracy=accuracy,
        eval_accuracy=eval_accuracy,
    )


def train(config: TrainConfig, train_ds, eval_ds=None) -> TrainResult:
    """Run the full training loop; deterministic given the config seed.

    Records one metrics row per epoch from a full pass over the training
    set after that epoch's updates. Raises TrainingDiverged (with the
    rows collected so far attached) if the loss or a gradient goes
    non-finite.
    """
    if train_ds.n_samples == 0:
        raise ValueError("training dataset is empty")
    if eval_ds is not None and eval_ds.feature_dim != train_ds.feature_dim:
        raise ValueError("train and eval feature dimensions differ")

    params = init_params(
        train_ds.feature_dim, train_ds.class_count, config.hidden_dim, seed=config.seed
    )
    state = init_optimizer(
        params, config.learning_rate, config.momentum, config.weight_decay
    )
    X, y = train_ds.features, train_ds.labels
    n = train_ds.n_samples

    rows: list[EpochMetrics] = []
    best_loss = math.inf
    stall = 0
    previous_lam = None
    for epoch in range(config.epochs):
        lam = config.lambda_for_epoch(epoch)
        if previous_lam is not None and lam != previous_lam:
            best_loss = math.inf  # schedule switch rescales the objective
            stall = 0
        previous_lam = lam
        order = np.random.default_rng([config.seed, _SHUFFLE_STREAM, epoch]).permutation(n)
        try:
            for start in range(0, n, config.batch_size):
                batch = order[start : start + config.batch_size]
                grads, _ = backward(params, X[batch], y[batch], config.loss_kind, lam)
                sgd_step(params, grads, state)
        except NumericalError as err:
            raise TrainingDiverged(str(err), epoch_metrics=rows) from err

        row = _epoch_snapshot(params, config, train_ds, eval_ds, epoch, lam, state.learning_rate)
        rows.append(row)
        if not math.isfinite(row.train_loss):
            raise TrainingDiverged(
                f"training loss became non-finite at epoch {epoch}", epoch_metrics=rows
            )
        if best_loss - row.train_loss > config.min_improvement:
            best_loss = row.train_loss
            stall = 0
        else:
            stall += 1
            if stall >= config.plateau_patience:
                state.learning_rate = max(
                    state.learning_rate * config.lr_decay_factor, config.min_learning_rate
                )
                stall = 0

    if rows:
        last = rows[-1]
        final_ce, final_h, final_acc = last.train_ce, last.train_entropy, last.train_accuracy
        final_eval = last.eval_accuracy
    else:  # epochs == 0: metrics of the initialized model only
        snap = _epoch_snapshot(
            params, config, train_ds, eval_ds, 0, config.lambda_for_epoch(0), state.learning_rate
        )
        final_ce, final_h, final_acc = snap.train_ce, snap.train_entropy, snap.train_accuracy
        final_eval = snap.eval_accuracy

    return TrainResult(
        params=params,
        epoch_metrics=rows,
        train_ce=final_ce,
        train_entropy=final_h,
        train_accuracy=final_acc,
        eval_accuracy=final_eval,
        experimental_cpp=math.exp(-final_ce),
    )


def save_checkpoint(path, params: ModelParams, meta: dict | None = None) -> None:
    """Write params to a .npz archive; see the module docstring for layout."""
    header = {
        "input_dim": params.input_dim,
        "hidden_dim": params.hidden_dim,
        "class_count": params.class_count,
    }
    if meta:
        header.update(meta)
    arrays = {f"w{i}": w for i, w in enumerate(params.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(params.biases)})
    np.savez(path, meta=np.array(json.dumps(header)), **arrays)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Read a checkpoint written by save_checkpoint; lossless at float64."""
    with np.load(path) as archive:
        meta = json.loads(str(archive["meta"][()]))
        n_layers = sum(1 for k in archive.files if k.startswith("w"))
        weights = [archive[f"w{i}"] for i in range(n_layers)]
        biases = [archive[f"b{i}"] for i in range(n_layers)]
    return ModelParams(weights, biases), meta
