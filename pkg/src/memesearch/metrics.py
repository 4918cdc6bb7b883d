"""Evaluation: confusion matrix, precision/recall/F1 reports, average
precision / mAP, inter-coder agreement, and the repeated-undersampling
cross-validation driver."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .corpus import CLASS_LABELS, LabeledDataset, stratified_folds, undersample
from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple
    counts: np.ndarray  # rows = true class, columns = predicted class

    def total(self) -> int:
        return int(self.counts.sum())

    def support(self):
        return self.counts.sum(axis=1)

    def normalized_rows(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True).astype(float)
        sums[sums == 0] = 1.0
        return self.counts / sums


@dataclass(frozen=True)
class MetricReport:
    labels: tuple
    precision: dict
    recall: dict
    f1: dict
    support: dict
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    zero_division_flags: tuple = ()

    def to_dict(self):
        return {
            "labels": list(self.labels),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "weighted": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
            "zero_division_flags": list(self.zero_division_flags),
        }


@dataclass(frozen=True)
class CvReport:
    classifier_kind: str
    seed: int
    resamples: int
    folds: int
    fold_reports: tuple  # of (resample, fold, MetricReport)
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "classifier": self.classifier_kind,
            "seed": self.seed,
            "resamples": self.resamples,
            "folds": self.folds,
            "mean": self.mean,
            "std": self.std,
            "fold_reports": [
                {"resample": r, "fold": f, "report": rep.to_dict()}
                for r, f, rep in self.fold_reports
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class AnnotationRecord:
    item_id: str
    coder_id: str
    label: str
    timestamp: float = 0.0


def confusion(true_labels, predicted_labels, labels=CLASS_LABELS) -> ConfusionMatrix:
    true_labels = list(true_labels)
    predicted_labels = list(predicted_labels)
    if len(true_labels) != len(predicted_labels):
        raise DataError(
            f"label sequences differ in length: {len(true_labels)} vs {len(predicted_labels)}"
        )
    if not true_labels:
        raise DataError("label sequences are empty")
    index = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(labels=tuple(labels), counts=counts)


def _safe_div(num, den):
    return num / den if den else 0.0


def classification_report(cm: ConfusionMatrix) -> MetricReport:
    counts = cm.counts
    if counts.sum() == 0:
        raise DataError("empty confusion matrix")
    precision, recall, f1, support = {}, {}, {}, {}
    flags = []
    for i, label in enumerate(cm.labels):
        tp = counts[i, i]
        fp = counts[:, i].sum() - tp
        fn = counts[i, :].sum() - tp
        if tp + fp == 0 or tp + fn == 0:
            flags.append(label)
        p = _safe_div(tp, tp + fp)
        r = _safe_div(tp, tp + fn)
        precision[label] = float(p)
        recall[label] = float(r)
        f1[label] = float(_safe_div(2 * p * r, p + r))
        support[label] = int(tp + fn)
    n_classes = len(cm.labels)
    total = counts.sum()
    weights = {label: support[label] / total for label in cm.labels}
    return MetricReport(
        labels=cm.labels,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        macro_precision=float(sum(precision.values()) / n_classes),
        macro_recall=float(sum(recall.values()) / n_classes),
        macro_f1=float(sum(f1.values()) / n_classes),
        weighted_precision=float(sum(weights[l] * precision[l] for l in cm.labels)),
        weighted_recall=float(sum(weights[l] * recall[l] for l in cm.labels)),
        weighted_f1=float(sum(weights[l] * f1[l] for l in cm.labels)),
        zero_division_flags=tuple(flags),
    )


def average_precision(ranking, relevant) -> float:
    """Recall-weighted mean of precision along a ranking.  Every relevant
    item must appear in the ranking."""
    relevant = set(relevant)
    if not relevant:
        raise DataError("relevant set is empty")
    missing = relevant.difference(ranking)
    if missing:
        raise DataError(f"relevant items missing from ranking: {sorted(missing)}")
    hits = 0
    total = 0.0
    for pos, item in enumerate(ranking, start=1):
        if item in relevant:
            hits += 1
            total += hits / pos
    return total / len(relevant)


def mean_average_precision(queries) -> float:
    queries = list(queries)
    if not queries:
        raise DataError("need at least one query")
    return float(np.mean([average_precision(r, rel) for r, rel in queries]))


def icr(records) -> tuple[dict, float]:
    """Pairwise percent agreement between coders over co-annotated items.

    Later records for the same (item, coder) supersede earlier ones.
    Returns ({(coder_a, coder_b): agreement}, mean over pairs)."""
    latest: dict[tuple, str] = {}
    for rec in records:
        latest[(rec.item_id, rec.coder_id)] = rec.label
    by_coder: dict[str, dict[str, str]] = {}
    for (item, coder), label in latest.items():
        by_coder.setdefault(coder, {})[item] = label
    coders = sorted(by_coder)
    pair_agreement = {}
    for i, a in enumerate(coders):
        for b in coders[i + 1 :]:
            shared = set(by_coder[a]) & set(by_coder[b])
            if not shared:
                continue
            agree = sum(1 for item in shared if by_coder[a][item] == by_coder[b][item])
            pair_agreement[(a, b)] = agree / len(shared)
    if not pair_agreement:
        raise DataError("no coder pair shares any annotated item")
    return pair_agreement, float(np.mean(list(pair_agreement.values())))


_SUMMARY_KEYS = (
    "macro_precision",
    "macro_recall",
    "macro_f1",
    "weighted_precision",
    "weighted_recall",
    "weighted_f1",
)


def cross_validate(spec, data: LabeledDataset, resamples: int, folds: int, seed: int) -> CvReport:
    """Repeat random undersampling `resamples` times; run stratified
    `folds`-fold cross-validation on each resample."""
    from .classifiers import train  # local import avoids a module cycle

    if resamples < 1:
        raise DataError("resamples must be >= 1")
    fold_reports = []
    for r in range(resamples):
        resample_seed = int(rng.stream(seed, "eval", r).integers(0, 2**31 - 1))
        balanced = undersample(data, seed=resample_seed)
        partitions = stratified_folds(balanced, k=folds, seed=resample_seed)
        for f, (train_idx, val_idx) in enumerate(partitions):
            train_set = LabeledDataset.from_samples(balanced.samples[i] for i in train_idx)
            model = train(spec, train_set)
            true = [balanced.samples[i][1] for i in val_idx]
            pred = [model.predict(balanced.samples[i][0].values) for i in val_idx]
            fold_reports.append((r, f, classification_report(confusion(true, pred))))
    mean, std = {}, {}
    for key in _SUMMARY_KEYS:
        values = [getattr(rep, key) for _, _, rep in fold_reports]
        mean[key] = float(np.mean(values))
        std[key] = float(np.std(values))
    return CvReport(
        classifier_kind=spec.kind,
        seed=seed,
        resamples=resamples,
        folds=folds,
        fold_reports=tuple(fold_reports),
        mean=mean,
        std=std,
    )
