"""Accuracy assessment: confusion matrix, the ten-metric report, and
stratified splitting / k-fold cross-validation.

Confusion matrices here are oriented rows = predicted, columns = true,
so per-class recall is diagonal / column sum.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import GraphFunctionClassifier, ModelConfig, derive_seed


def confusion_matrix(y_true, y_pred, labels: list[str]) -> np.ndarray:
    index = {c: i for i, c in enumerate(labels)}
    m = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y_true, y_pred):
        m[index[p], index[t]] += 1
    return m


@dataclass
class MetricsReport:
    labels: list[str]
    confusion: np.ndarray
    overall_accuracy: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    per_class_recall: dict[str, float] = field(default_factory=dict)

    def metric_dict(self) -> dict[str, float]:
        return {
            "overall_accuracy": self.overall_accuracy,
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
        }

    def to_json_dict(self) -> dict:
        return {
            "labels": self.labels,
            "confusion_rows_predicted_cols_true": self.confusion.tolist(),
            "metrics": self.metric_dict(),
            "per_class_recall": self.per_class_recall,
        }


def evaluate(confusion: np.ndarray, labels: list[str] | None = None) -> MetricsReport:
    """All ten assessment metrics from a (pred x true) count matrix.

    Classes never predicted get precision 0; micro metrics equal overall
    accuracy for single-label multiclass counts by construction.
    """
    m = np.asarray(confusion, dtype=float)
    if m.size == 0 or m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("confusion matrix must be square and non-empty")
    if (m < 0).any() or m.sum() == 0:
        raise ValueError("confusion matrix must hold nonnegative counts")
    if labels is None:
        labels = [f"class_{i}" for i in range(m.shape[0])]
    diag = np.diag(m)
    true_totals = m.sum(axis=0)
    pred_totals = m.sum(axis=1)
    total = m.sum()

    recall = np.divide(diag, true_totals, out=np.zeros_like(diag), where=true_totals > 0)
    precision = np.divide(diag, pred_totals, out=np.zeros_like(diag), where=pred_totals > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(diag), where=denom > 0)

    oa = float(diag.sum() / total)
    return MetricsReport(
        labels=list(labels),
        confusion=np.asarray(confusion),
        overall_accuracy=oa,
        micro_precision=oa,
        micro_recall=oa,
        micro_f1=oa,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=float((true_totals * precision).sum() / total),
        # support-weighted recall collapses to overall accuracy identically
        weighted_recall=oa,
        weighted_f1=float((true_totals * f1).sum() / total),
        per_class_recall={c: float(r) for c, r in zip(labels, recall)},
    )


def stratified_split(
    labels: list[str], fractions: tuple[float, float, float], seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class largest-remainder allocation into train/val/test.

    Every non-empty class keeps at least one training sample; classes
    that end up absent from the training split are warned about.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[], [], []]
    for cls in sorted(set(labels)):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        n = len(idx)
        raw = np.array(fractions) * n
        counts = np.floor(raw).astype(int)
        remainder = raw - counts
        for _ in range(n - counts.sum()):
            k = int(np.argmax(remainder))
            counts[k] += 1
            remainder[k] = -1
        if counts[0] == 0 and n > 0:
            donor = int(np.argmax(counts))
            counts[donor] -= 1
            counts[0] += 1
        start = 0
        for b, c in enumerate(counts):
            buckets[b].extend(idx[start : start + c].tolist())
            start += c
    train, val, test = (np.sort(np.array(b, dtype=int)) for b in buckets)
    for cls in sorted(set(labels)):
        if cls not in set(labels[train]):
            warnings.warn(f"class {cls!r} absent from the training split")
    return train, val, test


def stratified_kfold(labels: list[str], k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Disjoint covering folds with per-class counts within one sample of
    proportionality. Classes with fewer than k members are flagged with a
    warning but still dealt out."""
    labels = np.asarray(labels)
    if k > len(labels):
        raise ValueError(f"k={k} exceeds dataset size {len(labels)}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in sorted(set(labels)):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            warnings.warn(f"class {cls!r} has fewer than {k} members")
        rng.shuffle(idx)
        for pos, sample in enumerate(idx):
            folds[(offset + pos) % k].append(int(sample))
        offset += len(idx)
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def train_model(
    graphs, cfg: ModelConfig, expected_labels: list[str] | None = None
) -> tuple[GraphFunctionClassifier, dict]:
    """Train one model on the configured stratified train/val/test split.

    Returns the fitted classifier (best-validation checkpoint) and a
    history dict that includes the held-out test report and the split
    indices. Expected labels absent from every split raise.
    """
    y = [g.label for g in graphs]
    tr, va, te = stratified_split(y, cfg.split, derive_seed(cfg.seed, "split"))
    if expected_labels:
        present = set(y)
        missing = [c for c in expected_labels if c not in present]
        if missing:
            raise ValueError(f"classes absent from all splits: {missing}")
    clf = GraphFunctionClassifier(config=cfg).fit(
        [graphs[i] for i in tr],
        [y[i] for i in tr],
        val_graphs=[graphs[i] for i in va],
        val_y=[y[i] for i in va],
    )
    history = dict(clf.history_)
    history["split"] = {
        "train": tr.tolist(),
        "val": va.tolist(),
        "test": te.tolist(),
    }
    if len(te):
        test_pred = clf.predict([graphs[i] for i in te])
        vocab = sorted(set(y))
        report = evaluate(
            confusion_matrix([y[i] for i in te], test_pred, vocab), vocab
        )
        history["test_metrics"] = report.metric_dict()
    return clf, history


@dataclass
class CrossValidationResult:
    fold_reports: list[MetricsReport]
    aggregate: MetricsReport
    predictions: list[str]  # out-of-fold prediction per input graph


def cross_validate(
    graphs, cfg: ModelConfig, k: int = 10, labels: list[str] | None = None
) -> CrossValidationResult:
    """Stratified k-fold cross-validation.

    Each fold is the test set once; the remainder is split into train and
    validation sets in the configured proportions. Out-of-fold
    predictions cover the whole dataset and aggregate into one matrix.
    """
    y = [g.label for g in graphs] if labels is None else list(labels)
    vocab = sorted(set(y))
    folds = stratified_kfold(y, k=k, seed=derive_seed(cfg.seed, "kfold"))
    predictions: list[str | None] = [None] * len(graphs)
    fold_reports = []
    for fold_no, test_idx in enumerate(folds):
        test_set = set(test_idx.tolist())
        rest = np.array([i for i in range(len(graphs)) if i not in test_set])
        rest_labels = [y[i] for i in rest]
        val_fraction = cfg.split[1] / (cfg.split[0] + cfg.split[1])
        tr, va, _ = stratified_split(
            rest_labels,
            (1.0 - val_fraction, val_fraction, 0.0),
            derive_seed(cfg.seed, "fold-split", fold_no),
        )
        train_idx = rest[tr]
        val_idx = rest[va]
        fold_cfg = ModelConfig(**{**asdict_config(cfg), "seed": derive_seed(cfg.seed, "fold", fold_no)})
        clf = GraphFunctionClassifier(config=fold_cfg).fit(
            [graphs[i] for i in train_idx],
            [y[i] for i in train_idx],
            val_graphs=[graphs[i] for i in val_idx],
            val_y=[y[i] for i in val_idx],
        )
        pred = clf.predict([graphs[i] for i in test_idx])
        for i, p in zip(test_idx, pred):
            predictions[i] = p
        fold_reports.append(
            evaluate(confusion_matrix([y[i] for i in test_idx], pred, vocab), vocab)
        )
    aggregate = evaluate(confusion_matrix(y, predictions, vocab), vocab)
    return CrossValidationResult(
        fold_reports=fold_reports, aggregate=aggregate, predictions=predictions
    )


def asdict_config(cfg: ModelConfig) -> dict:
    from dataclasses import asdict

    return asdict(cfg)


def write_fold_summary_csv(path, result: CrossValidationResult) -> None:
    metric_names = list(result.aggregate.metric_dict())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "n_test", *metric_names])
        for i, report in enumerate(result.fold_reports):
            writer.writerow(
                [i, int(report.confusion.sum())]
                + [repr(float(report.metric_dict()[m])) for m in metric_names]
            )
        writer.writerow(
            ["aggregate", int(result.aggregate.confusion.sum())]
            + [repr(float(result.aggregate.metric_dict()[m])) for m in metric_names]
        )
