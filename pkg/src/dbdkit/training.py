"""Training harness: weighted cross-entropy over turn labels, early stopping
on validation breakdown F1 with strict-improvement patience, multi-seed runs.

Batches mix turns from many calls; each sample carries its own precomputed
causal window, so batch composition can never leak future turns. Validation
is scored with the same offline per-turn inference used at deployment.
"""
from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corpus import DatasetSplit, Label
from .evaluation import MetricsReport, evaluate_model
from .models import ModelConfig, TurnClassifier, build_model
from .nn import Adam, Tensor, derived_rng, set_global_seed

__all__ = [
    "ClassWeighting", "TrainConfig", "EpochStats", "TrainHistory",
    "TrainResult", "EarlyStopper", "class_weights", "weighted_cross_entropy",
    "train_single_seed", "train", "set_global_seed", "checkpoint_name",
]


class ClassWeighting(enum.Enum):
    NONE = "none"
    INVERSE_FREQ = "inverse_freq"


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 40
    patience: int = 5
    seeds: tuple = (0, 1, 2)
    learning_rate: float = 1e-4
    class_weighting: ClassWeighting = ClassWeighting.INVERSE_FREQ
    selection_metric: str = "validation breakdown F1"

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.patience < self.max_epochs:
            raise ValueError("patience must be < max_epochs")
        if not self.seeds:
            raise ValueError("at least one seed required")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_precision: float
    val_recall: float
    val_f1: float


@dataclass
class TrainHistory:
    seed: int
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def to_jsonl(self) -> str:
        lines = [json.dumps({"seed": self.seed, "best_epoch": self.best_epoch,
                             "stopped_epoch": self.stopped_epoch})]
        for e in self.epochs:
            lines.append(json.dumps({
                "epoch": e.epoch, "train_loss": round(e.train_loss, 10),
                "val_precision": e.val_precision, "val_recall": e.val_recall,
                "val_f1": e.val_f1}))
        return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    seed: int
    model: TurnClassifier
    best_state: dict
    history: TrainHistory
    best_val: MetricsReport | None


class EarlyStopper:
    """Stop after `patience` consecutive epochs without strict improvement.

    "Improvement" means the metric exceeds the best so far by more than
    zero; ties do not reset the counter.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -float("inf")
        self.best_epoch = 0
        self.streak = 0
        self._epoch = 0

    def update(self, value: float) -> bool:
        """Returns True when `value` strictly improves on the best so far."""
        self._epoch += 1
        if value > self.best:
            self.best = value
            self.best_epoch = self._epoch
            self.streak = 0
            return True
        self.streak += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.streak >= self.patience


def class_weights(labels, weighting: ClassWeighting = ClassWeighting.INVERSE_FREQ
                  ) -> np.ndarray:
    """[negative, positive] loss weights. INVERSE_FREQ: w_c = N / (2 * N_c);
    an absent class gets weight 0 with a warning."""
    if weighting is ClassWeighting.NONE:
        return np.array([1.0, 1.0])
    arr = np.asarray([1 if l is Label.BREAKDOWN else 0 for l in labels])
    n = arr.size
    counts = np.array([(arr == 0).sum(), (arr == 1).sum()], dtype=float)
    out = np.zeros(2)
    for c in (0, 1):
        if counts[c] == 0:
            warnings.warn(f"class {c} absent from training labels; weight set to 0")
        else:
            out[c] = n / (2.0 * counts[c])
    return out


def weighted_cross_entropy(logits: Tensor, targets: np.ndarray,
                           weights: np.ndarray) -> Tensor:
    """Mean over the batch of per-sample class-weighted negative log
    likelihood; `targets` are 0/1 ints."""
    n = logits.shape[0]
    coeff = np.zeros(logits.shape, dtype=logits.data.dtype)
    coeff[np.arange(n), targets] = weights[targets]
    return -(logits.log_softmax(axis=-1) * coeff).sum() * (1.0 / n)


def _batches(order: np.ndarray, size: int):
    for i in range(0, len(order), size):
        yield order[i:i + size]


def train_single_seed(model_cfg: ModelConfig, split: DatasetSplit,
                      cfg: TrainConfig, seed: int,
                      validation_scorer=None,
                      progress=None) -> TrainResult:
    """One fully deterministic run: seed -> fresh model -> best checkpoint.

    `validation_scorer(model, epoch) -> MetricsReport` may replace the real
    validation pass (used by tests to drive the early-stopping contract).
    """
    cfg.validate()
    if not split.train:
        raise ValueError("empty training split")
    set_global_seed(seed)
    model = build_model(model_cfg)
    model.featurizer.enable_cache()
    samples = [model.make_sample(call, t)
               for call in split.train for t in range(len(call.turns))]
    labels = [call.turns[t].label
              for call in split.train for t in range(len(call.turns))]
    targets = np.array([1 if l is Label.BREAKDOWN else 0 for l in labels])
    if targets.sum() == 0:
        warnings.warn("no breakdown turns in the training split; proceeding "
                      "(validation F1 may be 0 throughout)")
    weights = class_weights(labels, cfg.class_weighting)
    optimizer = Adam(model.parameters(), lr=cfg.learning_rate)
    stopper = EarlyStopper(cfg.patience)
    history = TrainHistory(seed=seed)
    best_state = model.state_dict()
    best_val: MetricsReport | None = None
    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        order = derived_rng(seed, epoch).permutation(len(samples))
        total_loss = 0.0
        for batch_idx in _batches(order, cfg.batch_size):
            batch = [samples[i] for i in batch_idx]
            logits = model.forward_batch(batch)
            loss = weighted_cross_entropy(logits, targets[batch_idx], weights)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += float(loss.data) * len(batch_idx)
        model.eval()
        if validation_scorer is not None:
            report = validation_scorer(model, epoch)
        else:
            report = evaluate_model(model, split.validation)
        history.epochs.append(EpochStats(
            epoch, total_loss / len(samples), report.precision,
            report.recall, report.f1))
        if progress is not None:
            progress(history.epochs[-1])
        if stopper.update(report.f1):
            best_state = model.state_dict()
            best_val = report
        history.best_epoch = stopper.best_epoch
        history.stopped_epoch = epoch
        if stopper.should_stop:
            break
    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(seed=seed, model=model, best_state=best_state,
                       history=history, best_val=best_val)


def train(model_cfg: ModelConfig, split: DatasetSplit, cfg: TrainConfig,
          validation_scorer=None, progress=None) -> list[TrainResult]:
    """Independent runs over cfg.seeds; histories differ only through the seed."""
    return [train_single_seed(model_cfg, split, cfg, seed,
                              validation_scorer=validation_scorer,
                              progress=progress)
            for seed in cfg.seeds]


def checkpoint_name(architecture: str, seed: int) -> str:
    return f"{architecture}_{seed}_best"
