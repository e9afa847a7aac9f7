"""Classification metrics: confusion matrix, F1 variants, inertia/contagion splits.

Confusion matrix orientation: rows are gold labels, columns are predictions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .conversation import Conversation, moment_other, moment_self


class LengthMismatch(ValueError):
    pass


class LabelOutOfRange(ValueError):
    pass


class ExcludedOnlyData(ValueError):
    pass


class MissingGoldLabel(ValueError):
    pass


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (K, K), rows = gold, cols = predicted

    @property
    def num_labels(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(golds: Sequence[int], preds: Sequence[int], num_labels: int) -> ConfusionMatrix:
    if len(golds) != len(preds):
        raise LengthMismatch(f"{len(golds)} golds vs {len(preds)} preds")
    counts = np.zeros((num_labels, num_labels), dtype=np.int64)
    for g, p in zip(golds, preds):
        if not (0 <= g < num_labels and 0 <= p < num_labels):
            raise LabelOutOfRange(f"pair ({g}, {p}) outside [0, {num_labels})")
        counts[g, p] += 1
    return ConfusionMatrix(counts)


def _per_class(cm: ConfusionMatrix):
    c = cm.counts.astype(np.float64)
    tp = np.diag(c)
    fp = c.sum(axis=0) - tp
    fn = c.sum(axis=1) - tp
    return tp, fp, fn


def _f1(tp: float, fp: float, fn: float) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


def f1_scores(
    cm: ConfusionMatrix, variant: str = "weighted", exclude: Optional[int] = None
) -> float:
    """weighted | macro | micro F1, optionally excluding one label.

    Micro with exclusion pools TP/FP/FN over the non-excluded classes: a
    prediction of the excluded label on a non-excluded gold is a missed
    detection (FN), and a non-excluded prediction on an excluded gold is a
    false alarm (FP).
    """
    K = cm.num_labels
    keep = [k for k in range(K) if k != exclude]
    support = cm.counts.sum(axis=1).astype(np.float64)
    if sum(support[k] for k in keep) == 0:
        raise ExcludedOnlyData("no samples outside the excluded class")
    tp, fp, fn = _per_class(cm)
    if variant == "micro":
        return _f1(sum(tp[k] for k in keep), sum(fp[k] for k in keep), sum(fn[k] for k in keep))
    class_f1 = [_f1(tp[k], fp[k], fn[k]) for k in keep]
    if variant == "macro":
        return float(np.mean(class_f1))
    if variant == "weighted":
        weights = np.array([support[k] for k in keep])
        return float(np.dot(class_f1, weights) / weights.sum())
    raise ValueError(f"unknown variant {variant!r}")


def accuracy(cm: ConfusionMatrix) -> float:
    return float(np.trace(cm.counts) / cm.total) if cm.total else 0.0


def inertia_contagion_split(
    conv: Conversation, preds: Sequence[int]
) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """(gold, pred) pairs for utterances repeating their own / the other's emotion.

    An utterance t joins the inertia subset when its gold label matches the
    same speaker's previous gold label, and the contagion subset when it
    matches the interlocutor's most recent gold label. Each qualifying
    utterance is scored once; the two subsets may overlap.
    """
    golds = conv.gold_labels()
    for t, y in enumerate(golds):
        if y is None:
            raise MissingGoldLabel(f"utterance {t}")
    inertia: list[tuple[int, int]] = []
    contagion: list[tuple[int, int]] = []
    for t in range(len(conv)):
        s = moment_self(conv, t)
        if s is not None and golds[t] == golds[s]:
            inertia.append((golds[t], preds[t]))
        o = moment_other(conv, t)
        if o is not None and golds[t] == golds[o]:
            contagion.append((golds[t], preds[t]))
    return inertia, contagion
