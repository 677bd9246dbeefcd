"""Turn-level metrics, first-prediction distance analysis, paired
significance testing, and embedding dumps for offline 2-D projection.

The positive class is always BREAKDOWN. Undefined ratios report 0, never
NaN: precision with no positive predictions is 0, recall with no gold
positives is 0, F1 with p + r == 0 is 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Call, Label
from .models import Prediction, TurnClassifier, export_fusion_embedding

__all__ = [
    "MetricsReport", "TurnDistanceHistogram", "EvaluationError",
    "NO_PREDICTION", "gold_labels", "compute_prf", "evaluate_model",
    "first_prediction_distance", "histogram_distances", "paired_significance",
    "dump_embeddings",
]


class EvaluationError(ValueError):
    pass


class _NoPrediction:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NO_PREDICTION"


NO_PREDICTION = _NoPrediction()

OVERFLOW_POS = ">+5"
OVERFLOW_NEG = "<-5"


@dataclass
class MetricsReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float = field(init=False)
    recall: float = field(init=False)
    f1: float = field(init=False)

    def __post_init__(self):
        self.precision = self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0
        self.recall = self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0
        pr = self.precision + self.recall
        self.f1 = 2.0 * self.precision * self.recall / pr if pr else 0.0

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass
class TurnDistanceHistogram:
    buckets: dict
    no_prediction: int

    @property
    def total_mass(self) -> int:
        return sum(self.buckets.values()) + self.no_prediction


def gold_labels(calls: list[Call]) -> dict[tuple[str, int], Label]:
    return {(c.id, t.index): t.label for c in calls for t in c.turns}


def compute_prf(predictions: list[Prediction],
                gold: dict[tuple[str, int], Label] | list[Call]) -> MetricsReport:
    """Exact confusion counts over (call id, turn index)-aligned pairs."""
    if isinstance(gold, list):
        gold = gold_labels(gold)
    pred_keys = {(p.call_id, p.turn_index) for p in predictions}
    if len(pred_keys) != len(predictions):
        dupes = sorted(k for k in pred_keys
                       if sum(1 for p in predictions
                              if (p.call_id, p.turn_index) == k) > 1)
        raise EvaluationError(f"duplicate predictions for {dupes[:5]}")
    missing = sorted(pred_keys - set(gold))
    extra = sorted(set(gold) - pred_keys)
    if missing or extra:
        raise EvaluationError(
            f"misaligned predictions: unknown={missing[:5]}, uncovered={extra[:5]}")
    tp = fp = fn = tn = 0
    for p in predictions:
        g = gold[(p.call_id, p.turn_index)]
        if p.label is Label.BREAKDOWN and g is Label.BREAKDOWN:
            tp += 1
        elif p.label is Label.BREAKDOWN:
            fp += 1
        elif g is Label.BREAKDOWN:
            fn += 1
        else:
            tn += 1
    return MetricsReport(tp, fp, fn, tn)


def evaluate_model(model: TurnClassifier, calls: list[Call]) -> MetricsReport:
    """Offline per-turn inference over whole calls, then exact counts."""
    model.eval()
    preds: list[Prediction] = []
    for call in calls:
        preds.extend(model.predict_call(call))
    return compute_prf(preds, calls)


def first_prediction_distance(call: Call, predictions: list[Prediction]):
    """(index of first predicted breakdown) - (index of first gold breakdown),
    or NO_PREDICTION when the model never fires in the call."""
    gold_turns = [t.index for t in call.turns if t.label is Label.BREAKDOWN]
    if not gold_turns:
        raise EvaluationError(f"call {call.id} has no gold breakdown turn")
    fired = sorted(p.turn_index for p in predictions
                   if p.call_id == call.id and p.label is Label.BREAKDOWN)
    if not fired:
        return NO_PREDICTION
    return fired[0] - gold_turns[0]


def histogram_distances(distances: list) -> TurnDistanceHistogram:
    """Bucket counts over signed distances; |d| > 5 aggregates into overflow
    bins; NO_PREDICTION counts separately."""
    buckets: dict = {}
    no_pred = 0
    for d in distances:
        if d is NO_PREDICTION:
            no_pred += 1
            continue
        key = d if -5 <= d <= 5 else (OVERFLOW_POS if d > 5 else OVERFLOW_NEG)
        buckets[key] = buckets.get(key, 0) + 1
    return TurnDistanceHistogram(buckets, no_pred)


def _per_call_counts(predictions: list[Prediction],
                     gold: dict[tuple[str, int], Label],
                     call_ids: list[str]) -> np.ndarray:
    order = {cid: i for i, cid in enumerate(call_ids)}
    counts = np.zeros((len(call_ids), 3), dtype=np.int64)  # tp, fp, fn
    for p in predictions:
        g = gold[(p.call_id, p.turn_index)]
        row = order[p.call_id]
        if p.label is Label.BREAKDOWN and g is Label.BREAKDOWN:
            counts[row, 0] += 1
        elif p.label is Label.BREAKDOWN:
            counts[row, 1] += 1
        elif g is Label.BREAKDOWN:
            counts[row, 2] += 1
    return counts


def _f1_from_counts(tp: np.ndarray, fp: np.ndarray, fn: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        prec = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1), 0.0)
        rec = np.where(tp + fn > 0, tp / np.maximum(tp + fn, 1), 0.0)
        denom = prec + rec
        return np.where(denom > 0, 2 * prec * rec / np.maximum(denom, 1e-300), 0.0)


def paired_significance(preds_a: list[Prediction], preds_b: list[Prediction],
                        gold_calls: list[Call], n_resamples: int = 1000,
                        seed: int = 0) -> float:
    """Paired bootstrap over calls: p = fraction of resamples where
    F1(A) <= F1(B). Seeded, deterministic."""
    if n_resamples < 100:
        raise EvaluationError(f"n_resamples must be >= 100, got {n_resamples}")
    gold = gold_labels(gold_calls)
    compute_prf(preds_a, gold)  # alignment checks
    compute_prf(preds_b, gold)
    call_ids = [c.id for c in gold_calls]
    counts_a = _per_call_counts(preds_a, gold, call_ids)
    counts_b = _per_call_counts(preds_b, gold, call_ids)
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(call_ids), size=(n_resamples, len(call_ids)))
    sum_a = counts_a[picks].sum(axis=1)  # (R, 3)
    sum_b = counts_b[picks].sum(axis=1)
    f1_a = _f1_from_counts(sum_a[:, 0], sum_a[:, 1], sum_a[:, 2])
    f1_b = _f1_from_counts(sum_b[:, 0], sum_b[:, 1], sum_b[:, 2])
    return float(np.mean(f1_a <= f1_b))


def dump_embeddings(model: TurnClassifier, calls: list[Call],
                    path: str | Path) -> Path:
    """Tab-separated: call id, turn index, speaker, gold label, cause, then
    the "before" vector and the "after" vector. 2-D projection is delegated
    to external tooling."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records = export_fusion_embedding(model, calls)
    with path.open("w", encoding="utf-8") as handle:
        for r in records:
            fields = [r.call_id, str(r.turn_index), r.speaker.value,
                      r.label.value, r.cause.value if r.cause else ""]
            fields.extend(f"{v:.8g}" for v in r.before)
            fields.extend(f"{v:.8g}" for v in r.after)
            handle.write("\t".join(fields) + "\n")
    return path
