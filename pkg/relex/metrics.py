"""
Precision, recall and F1 over the relation classes, plus report I/O.

Counting rule: for every class c, a prediction of c on an instance whose
gold label is not c is a false positive of c and a false negative of the
gold class. NoRelation is scored like any other class but kept out of the
macro and micro averages, so its confusions only show up as FP/FN of the
relation classes.
"""
import json
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from relex.corpus import LABELS, RELATION_CLASSES, RelationLabel, label_id

logger = logging.getLogger(__name__)

MACRO = "macro"
MICRO = "micro"
TSV_COLUMNS = ["config", "fingerprint", "fold", "class", "precision", "recall", "f1"]

LabelLike = Union[int, str, RelationLabel]
ALL_IDS = list(range(len(LABELS)))
RELATION_IDS = [LABELS.index(label) for label in RELATION_CLASSES]


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int = 0


@dataclass
class ConfusionCounts:
    """True positives, false positives and false negatives per class id."""
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @classmethod
    def from_labels(cls, gold_ids: Sequence[int], predicted_ids: Sequence[int]) -> "ConfusionCounts":
        matrix = confusion_matrix(gold_ids, predicted_ids, labels=ALL_IDS)
        tp = np.diag(matrix)
        return cls(tp, matrix.sum(axis=0) - tp, matrix.sum(axis=1) - tp)

    @property
    def support(self) -> np.ndarray:
        return self.tp + self.fn

    @property
    def total(self) -> int:
        return int(self.support.sum())


@dataclass
class MetricsReport:
    """Percentages in [0, 100]; per_class covers all six labels."""
    per_class: Dict[str, ClassScores]
    macro: ClassScores
    micro: ClassScores
    fold: Optional[int] = None
    config: str = ""
    fingerprint: str = ""

    @property
    def fold_name(self) -> str:
        return "mean" if self.fold is None else str(self.fold)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "fingerprint": self.fingerprint,
            "fold": self.fold,
            "per_class": {name: asdict(scores) for name, scores in self.per_class.items()},
            "macro": asdict(self.macro),
            "micro": asdict(self.micro),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(
            {name: ClassScores(**scores) for name, scores in data["per_class"].items()},
            ClassScores(**data["macro"]),
            ClassScores(**data["micro"]),
            data["fold"],
            data["config"],
            data.get("fingerprint", ""),
        )

    def rows(self) -> List[dict]:
        rows = []
        for name, scores in list(self.per_class.items()) + [(MACRO, self.macro), (MICRO, self.micro)]:
            rows.append({
                "config": self.config,
                "fingerprint": self.fingerprint,
                "fold": self.fold_name,
                "class": name,
                "precision": scores.precision,
                "recall": scores.recall,
                "f1": scores.f1,
            })
        return rows


def _as_ids(labels: Iterable[LabelLike]) -> List[int]:
    return [int(label) if isinstance(label, (int, np.integer)) else label_id(label) for label in labels]


def compute_metrics(
    gold: Sequence[LabelLike],
    predicted: Sequence[LabelLike],
    fold: Optional[int] = None,
    config: str = "",
    fingerprint: str = "",
) -> MetricsReport:
    """
    Per-class and averaged scores.

    Zero denominators give 0. The macro average is the unweighted mean over
    relation classes that occur in the gold labels; micro sums their counts.
    """
    if len(gold) != len(predicted):
        raise ValueError(f"gold has {len(gold)} labels but predictions have {len(predicted)}")
    gold_ids, predicted_ids = _as_ids(gold), _as_ids(predicted)
    if not gold_ids:
        empty = ClassScores(0.0, 0.0, 0.0, 0)
        return MetricsReport({label.value: empty for label in LABELS}, empty, empty, fold, config, fingerprint)

    counts = ConfusionCounts.from_labels(gold_ids, predicted_ids)
    precision, recall, f1, _ = precision_recall_fscore_support(
        gold_ids, predicted_ids, labels=ALL_IDS, zero_division=0,
    )
    support = counts.support
    per_class = {
        label.value: ClassScores(
            float(100 * precision[c]), float(100 * recall[c]), float(100 * f1[c]), int(support[c]),
        )
        for c, label in enumerate(LABELS)
    }

    present = [LABELS[c].value for c in RELATION_IDS if support[c] > 0]
    macro = _mean_scores([per_class[name] for name in present]) if present else ClassScores(0.0, 0.0, 0.0, 0)

    micro_p, micro_r, micro_f, _ = precision_recall_fscore_support(
        gold_ids, predicted_ids, labels=RELATION_IDS, average="micro", zero_division=0,
    )
    micro = ClassScores(
        float(100 * micro_p), float(100 * micro_r), float(100 * micro_f), int(sum(support[c] for c in RELATION_IDS)),
    )
    return MetricsReport(per_class, macro, micro, fold, config, fingerprint)


def _mean_scores(items: Sequence[ClassScores]) -> ClassScores:
    return ClassScores(
        float(np.mean([s.precision for s in items])),
        float(np.mean([s.recall for s in items])),
        float(np.mean([s.f1 for s in items])),
        int(sum(s.support for s in items)),
    )


def average_reports(reports: Sequence[MetricsReport], config: Optional[str] = None) -> MetricsReport:
    """Arithmetic mean of per-fold metrics (not pooled counts); supports are summed."""
    if not reports:
        raise ValueError("no reports to average")
    names = list(reports[0].per_class)
    return MetricsReport(
        {name: _mean_scores([r.per_class[name] for r in reports]) for name in names},
        _mean_scores([r.macro for r in reports]),
        _mean_scores([r.micro for r in reports]),
        None,
        reports[0].config if config is None else config,
        reports[0].fingerprint,
    )


def reports_frame(reports: Iterable[MetricsReport]) -> pd.DataFrame:
    rows = [row for report in reports for row in report.rows()]
    return pd.DataFrame(rows, columns=TSV_COLUMNS)


def write_reports_tsv(reports: Iterable[MetricsReport], stream: TextIO) -> None:
    reports_frame(reports).to_csv(stream, sep="\t", index=False, float_format="%.2f", lineterminator="\n")


def write_reports_json(reports: Iterable[MetricsReport], stream: TextIO) -> None:
    json.dump([report.to_dict() for report in reports], stream, indent=2, sort_keys=True)
    stream.write("\n")


def read_reports_json(stream: TextIO) -> List[MetricsReport]:
    return [MetricsReport.from_dict(item) for item in json.load(stream)]


def render_table(rows: Sequence[Tuple[str, MetricsReport]], key_header: str = "Name", average: str = MACRO) -> str:
    """Plain-text table of averaged P/R/F with two decimals, one row per configuration."""
    records = []
    for key, report in rows:
        scores = report.macro if average == MACRO else report.micro
        records.append({
            key_header: key,
            "Precision": f"{scores.precision:.2f}",
            "Recall": f"{scores.recall:.2f}",
            "F Score": f"{scores.f1:.2f}",
        })
    frame = pd.DataFrame(records, columns=[key_header, "Precision", "Recall", "F Score"])
    return frame.to_string(index=False) + "\n"


def class_wise_table(report: MetricsReport) -> str:
    """Per-class rows of one report; NoRelation is listed last, outside the averages."""
    records = []
    for name, scores in report.per_class.items():
        records.append({
            "Name": name,
            "Precision": f"{scores.precision:.2f}",
            "Recall": f"{scores.recall:.2f}",
            "F Score": f"{scores.f1:.2f}",
        })
    return pd.DataFrame(records, columns=["Name", "Precision", "Recall", "F Score"]).to_string(index=False) + "\n"
