"""Score parsed explanations against the training partition.

A statement designates the subset of training examples satisfying all of its
predicates. Statement precision is the fraction of that subset carrying the
statement's predicted label; recall is the same count over all training
examples of the predicted class. With integer normalisation active, the
training features are scaled (with the corpus's fitted parameters) before
filtering so thresholds and values compare in the same representation space.

Empty subsets leave precision undefined; such records are excluded from the
means and surfaced as a separate count. Recall is averaged per output, not
per class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .preprocess import PreprocessConfig, ScalingParams, scale_features
from .ruleparse import Comparator, ParsedStatement, ParseFailure, parse_output

REPORT_HEADER = "ds_name,label_accuracy,statement_accuracy,statement_recall,correct"


@dataclass(frozen=True)
class ValidationRecord:
    record_id: int
    parse_ok: bool
    predicted_label: int | None
    true_label: int
    subset_size: int
    statement_precision: float | None
    statement_recall: float | None
    failure_reason: str | None = None
    lenient: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.record_id,
            "parse_ok": self.parse_ok,
            "predicted_label": self.predicted_label,
            "true_label": self.true_label,
            "subset_size": self.subset_size,
            "statement_precision": self.statement_precision,
            "statement_recall": self.statement_recall,
            "failure_reason": self.failure_reason,
            "lenient": self.lenient,
        }


@dataclass(frozen=True)
class ReportRow:
    """One aggregate line in the Table-style report (percentages)."""

    ds_name: str
    label_accuracy: float
    statement_accuracy: float
    statement_recall: float
    correct: float

    def csv_row(self) -> str:
        return (
            f"{self.ds_name},{self.label_accuracy:.2f},{self.statement_accuracy:.2f},"
            f"{self.statement_recall:.2f},{self.correct:.2f}"
        )


def designate_subset(
    statement: ParsedStatement,
    train: Dataset,
    config: PreprocessConfig,
    scaling: ScalingParams,
) -> np.ndarray:
    """Sorted indices of training examples satisfying every predicate."""
    if config.integer_normalisation:
        table = scale_features(scaling, train.features, config).astype(np.float64)
    else:
        table = train.features

    name_to_col = {name: j for j, name in enumerate(train.feature_names)}
    mask = np.ones(train.n_examples, dtype=bool)
    for predicate in statement.predicates:
        col = name_to_col.get(predicate.feature_name)
        if col is None:
            raise ValueError(f"unknown feature in statement: {predicate.feature_name!r}")
        values = table[:, col]
        if predicate.comparator is Comparator.LE:
            mask &= values <= predicate.threshold
        else:
            mask &= values > predicate.threshold
    return np.nonzero(mask)[0]


def statement_metrics(
    subset_indices: np.ndarray, predicted_label: int, train_labels: np.ndarray
) -> tuple[float | None, float | None]:
    """(precision, recall) of the designated subset for the predicted class.

    Precision is undefined (None) for an empty subset; recall is undefined
    when the training set has no examples of the predicted class.
    """
    subset = np.asarray(subset_indices, dtype=np.int64)
    hits = int(np.sum(train_labels[subset] == predicted_label)) if subset.size else 0
    class_total = int(np.sum(train_labels == predicted_label))
    precision = hits / subset.size if subset.size else None
    recall = hits / class_total if class_total else None
    return precision, recall


def label_accuracy(pairs: list[tuple[int | None, int]]) -> float:
    """Percent of (predicted, true) pairs that match; None never matches."""
    if not pairs:
        raise ValueError("label_accuracy needs at least one prediction")
    hits = sum(1 for predicted, true in pairs if predicted is not None and predicted == true)
    return 100.0 * hits / len(pairs)


def score_text(
    record_id: int,
    text: str,
    true_label: int,
    train: Dataset,
    config: PreprocessConfig,
    scaling: ScalingParams,
) -> ValidationRecord:
    """Parse one generated text and compute its per-record scores."""
    outcome = parse_output(text, train.feature_names)
    if isinstance(outcome, ParseFailure):
        return ValidationRecord(
            record_id=record_id,
            parse_ok=False,
            predicted_label=outcome.label,
            true_label=true_label,
            subset_size=0,
            statement_precision=None,
            statement_recall=None,
            failure_reason=outcome.reason.value,
        )
    subset = designate_subset(outcome, train, config, scaling)
    precision, recall = statement_metrics(subset, outcome.predicted_label, train.labels)
    return ValidationRecord(
        record_id=record_id,
        parse_ok=True,
        predicted_label=outcome.predicted_label,
        true_label=true_label,
        subset_size=int(subset.size),
        statement_precision=precision,
        statement_recall=recall,
        lenient=outcome.lenient,
    )


def aggregate_report(records: list[ValidationRecord], tag: str) -> ReportRow:
    """Fold per-record scores into one report row.

    Precision/recall means run over records where they are defined; correct
    is the parse rate over all records.
    """
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    acc = label_accuracy([(r.predicted_label, r.true_label) for r in records])
    precisions = [r.statement_precision for r in records if r.statement_precision is not None]
    recalls = [r.statement_recall for r in records if r.statement_recall is not None]
    correct = 100.0 * sum(r.parse_ok for r in records) / len(records)
    return ReportRow(
        ds_name=tag,
        label_accuracy=acc,
        statement_accuracy=100.0 * float(np.mean(precisions)) if precisions else 0.0,
        statement_recall=100.0 * float(np.mean(recalls)) if recalls else 0.0,
        correct=correct,
    )


def undefined_counts(records: list[ValidationRecord]) -> dict[str, int]:
    """How many parsed records had undefined precision or recall."""
    return {
        "precision_undefined": sum(
            1 for r in records if r.parse_ok and r.statement_precision is None
        ),
        "recall_undefined": sum(
            1 for r in records if r.parse_ok and r.statement_recall is None
        ),
    }


def report_csv(rows: list[ReportRow]) -> str:
    return "\n".join([REPORT_HEADER] + [row.csv_row() for row in rows]) + "\n"
