"""Probe training and evaluation protocol.

Per seed: subsample to exactly balanced classes, stratify an 80/20
split (the eval side stays balanced, so chance is exactly 0.5), train
with the decoupled-weight-decay optimizer under cosine annealing on
binary cross-entropy, track evaluation accuracy every epoch, and report
the best accuracy across epochs. The returned models carry the weights
from each seed's best epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import ProbeModel, ProbeSpec
from .optim import AdamW, CosineSchedule


class TrainingError(Exception):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr: float = 3e-4
    weight_decay: float = 1e-4
    batch_size: int = 32
    train_fraction: float = 0.8
    seeds: tuple[int, ...] = (0, 1, 2)
    balance: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("epochs, batch_size and lr must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "train_fraction": self.train_fraction,
            "seeds": list(self.seeds),
            "balance": self.balance,
        }


@dataclass(frozen=True)
class EvalReport:
    best_accuracy: tuple[float, ...]  # per seed, max over epochs
    final_accuracy: tuple[float, ...]  # per seed, last epoch

    @property
    def mean(self) -> float:
        return float(np.mean(self.best_accuracy))

    @property
    def std(self) -> float:
        return float(np.std(self.best_accuracy))  # population std

    def to_dict(self) -> dict:
        return {
            "best_accuracy": list(self.best_accuracy),
            "final_accuracy": list(self.final_accuracy),
            "mean": self.mean,
            "std": self.std,
        }


@dataclass
class SeedRun:
    model: ProbeModel  # weights from the best epoch
    best_accuracy: float
    final_accuracy: float
    accuracy_history: list[float]
    loss_history: list[float]
    train_indices: np.ndarray
    eval_indices: np.ndarray


@dataclass
class TrainResult:
    runs: list[SeedRun]
    report: EvalReport

    @property
    def model(self) -> ProbeModel:
        """Best-epoch model of the first seed."""
        return self.runs[0].model


def balanced_split(
    labels: np.ndarray, seed: int, train_fraction: float, balance: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Class-stratified (train, eval) index split; balanced subsample first.

    After subsampling, both classes contribute the same count to each
    side, so a constant predictor scores exactly 0.5 on the eval split.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise TrainingError("both classes must be present")
    if balance:
        per_class = min(len(pos), len(neg))
        pos = rng.permutation(pos)[:per_class]
        neg = rng.permutation(neg)[:per_class]
    else:
        pos = rng.permutation(pos)
        neg = rng.permutation(neg)
    train_parts, eval_parts = [], []
    for group in (pos, neg):
        group = rng.permutation(group)
        n_train = int(len(group) * train_fraction)
        if n_train == 0 or n_train == len(group):
            raise TrainingError("split leaves an empty train or eval side")
        train_parts.append(group[:n_train])
        eval_parts.append(group[n_train:])
    train_idx = rng.permutation(np.concatenate(train_parts))
    eval_idx = np.sort(np.concatenate(eval_parts))
    return train_idx, eval_idx


def accuracy(model: ProbeModel, features: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(model.predict(features) == np.asarray(labels)))


def train_probe(
    features: np.ndarray,
    labels: np.ndarray,
    spec: ProbeSpec,
    config: TrainConfig = TrainConfig(),
) -> TrainResult:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[0] != labels.shape[0]:
        raise TrainingError("features and labels disagree on sample count")
    runs: list[SeedRun] = []
    for seed in config.seeds:
        runs.append(_train_one_seed(features, labels, spec, config, seed))
    report = EvalReport(
        best_accuracy=tuple(r.best_accuracy for r in runs),
        final_accuracy=tuple(r.final_accuracy for r in runs),
    )
    return TrainResult(runs, report)


def _train_one_seed(
    features: np.ndarray,
    labels: np.ndarray,
    spec: ProbeSpec,
    config: TrainConfig,
    seed: int,
) -> SeedRun:
    train_idx, eval_idx = balanced_split(
        labels, seed, config.train_fraction, config.balance
    )
    x_train, y_train = features[train_idx], labels[train_idx]
    x_eval, y_eval = features[eval_idx], labels[eval_idx]
    model = ProbeModel.initialized(spec, seed)
    optimizer = AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    schedule = CosineSchedule(optimizer, total_steps=config.epochs)
    rng = np.random.default_rng(seed + 1)
    best_acc = -1.0
    best_model = model.copy()
    acc_history: list[float] = []
    loss_history: list[float] = []
    n = len(train_idx)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads = model.loss_and_grads(x_train[batch], y_train[batch])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss} at epoch {epoch}, seed {seed}"
                )
            optimizer.step(grads)
            epoch_loss += loss
            batches += 1
        schedule.step()
        loss_history.append(epoch_loss / max(1, batches))
        acc = accuracy(model, x_eval, y_eval)
        acc_history.append(acc)
        if acc > best_acc:
            best_acc = acc
            best_model = model.copy()
    return SeedRun(
        model=best_model,
        best_accuracy=best_acc,
        final_accuracy=acc_history[-1],
        accuracy_history=acc_history,
        loss_history=loss_history,
        train_indices=train_idx,
        eval_indices=eval_idx,
    )


def eval_probe(model: ProbeModel, features: np.ndarray, labels: np.ndarray) -> float:
    return accuracy(model, features, labels)


def agreement(model_a: ProbeModel, model_b: ProbeModel, features: np.ndarray) -> float:
    """Fraction of inputs the two probes label identically."""
    pred_a = model_a.predict(features)
    pred_b = model_b.predict(features)
    if pred_a.shape != pred_b.shape:
        raise TrainingError("probes disagree on sample count")
    return float(np.mean(pred_a == pred_b))
