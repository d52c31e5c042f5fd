"""Confusion matrices, classwise/macro metrics and comparison tables.

Class order is fixed as (noHate, Hate); confusion matrices put gold labels
on rows and predictions on columns. All metric values are percentages kept
at full precision internally; rounding (half-up, two decimals) happens only
at presentation time. A precision or recall with an empty column/row is
reported as 0 and flagged in ``EvalReport.undefined``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .data import LABEL_INDEX, LABELS, Label
from .errors import ValidationError


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: tuple[tuple[int, int], tuple[int, int]]  # [gold][predicted]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    @property
    def trace(self) -> int:
        return self.counts[0][0] + self.counts[1][1]

    def row_total(self, i: int) -> int:
        return sum(self.counts[i])

    def col_total(self, j: int) -> int:
        return self.counts[0][j] + self.counts[1][j]

    def as_lists(self) -> list[list[int]]:
        return [list(row) for row in self.counts]


def confusion(gold: Sequence[Label], pred: Sequence[Label]) -> ConfusionMatrix:
    if len(gold) != len(pred):
        raise ValidationError(f"gold and predicted lengths differ: {len(gold)} vs {len(pred)}")
    if not gold:
        raise ValidationError("cannot build a confusion matrix from zero pairs")
    cells = [[0, 0], [0, 0]]
    for g, p in zip(gold, pred):
        cells[LABEL_INDEX[g]][LABEL_INDEX[p]] += 1
    return ConfusionMatrix(counts=(tuple(cells[0]), tuple(cells[1])))


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    per_class: dict[str, ClassMetrics]  # keyed "noHate" / "Hate"
    macro: ClassMetrics
    matrix: ConfusionMatrix
    undefined: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict)

    def rounded(self, ndigits: int = 2) -> dict:
        """Presentation values: percentages rounded half-up."""
        out = {"accuracy": round_half_up(self.accuracy, ndigits)}
        for name, cm in self.per_class.items():
            out[name] = {
                "precision": round_half_up(cm.precision, ndigits),
                "recall": round_half_up(cm.recall, ndigits),
                "f1": round_half_up(cm.f1, ndigits),
            }
        out["macro"] = {
            "precision": round_half_up(self.macro.precision, ndigits),
            "recall": round_half_up(self.macro.recall, ndigits),
            "f1": round_half_up(self.macro.f1, ndigits),
        }
        return out

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": {
                name: {"precision": cm.precision, "recall": cm.recall, "f1": cm.f1}
                for name, cm in self.per_class.items()
            },
            "macro": {
                "precision": self.macro.precision,
                "recall": self.macro.recall,
                "f1": self.macro.f1,
            },
            "matrix": self.matrix.as_lists(),
            "undefined": list(self.undefined),
            "metadata": self.metadata,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EvalReport":
        per_class = {name: ClassMetrics(**vals) for name, vals in d["per_class"].items()}
        rows = d["matrix"]
        return cls(
            accuracy=d["accuracy"],
            per_class=per_class,
            macro=ClassMetrics(**d["macro"]),
            matrix=ConfusionMatrix(counts=(tuple(rows[0]), tuple(rows[1]))),
            undefined=tuple(d.get("undefined", ())),
            metadata=d.get("metadata", {}),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "EvalReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def round_half_up(value: float, ndigits: int = 2) -> float:
    quantum = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def metrics(matrix: ConfusionMatrix, metadata: dict | None = None) -> EvalReport:
    """Accuracy plus classwise and macro-averaged P/R/F1 (as percentages)."""
    if matrix.total <= 0:
        raise ValidationError("confusion matrix is empty")
    undefined: list[str] = []
    per_class: dict[str, ClassMetrics] = {}
    for i, label in enumerate(LABELS):
        diag = matrix.counts[i][i]
        col = matrix.col_total(i)
        row = matrix.row_total(i)
        if col == 0:
            undefined.append(f"{label.value}.precision")
            precision = 0.0
        else:
            precision = 100.0 * diag / col
        if row == 0:
            undefined.append(f"{label.value}.recall")
            recall = 0.0
        else:
            recall = 100.0 * diag / row
        if precision + recall == 0.0:
            f1 = 0.0
        else:
            f1 = 2.0 * precision * recall / (precision + recall)
        per_class[label.value] = ClassMetrics(precision=precision, recall=recall, f1=f1)

    values = list(per_class.values())
    macro = ClassMetrics(
        precision=sum(v.precision for v in values) / len(values),
        recall=sum(v.recall for v in values) / len(values),
        f1=sum(v.f1 for v in values) / len(values),
    )
    accuracy = 100.0 * matrix.trace / matrix.total
    return EvalReport(
        accuracy=accuracy,
        per_class=per_class,
        macro=macro,
        matrix=matrix,
        undefined=tuple(undefined),
        metadata=metadata or {},
    )


# --- comparison tables ----------------------------------------------------------

_COLUMNS = [
    ("accuracy", lambda r: r.accuracy),
    ("noHate.P", lambda r: r.per_class["noHate"].precision),
    ("noHate.R", lambda r: r.per_class["noHate"].recall),
    ("noHate.F1", lambda r: r.per_class["noHate"].f1),
    ("Hate.P", lambda r: r.per_class["Hate"].precision),
    ("Hate.R", lambda r: r.per_class["Hate"].recall),
    ("Hate.F1", lambda r: r.per_class["Hate"].f1),
    ("macro.P", lambda r: r.macro.precision),
    ("macro.R", lambda r: r.macro.recall),
    ("macro.F1", lambda r: r.macro.f1),
]


@dataclass(frozen=True)
class ComparisonTable:
    """Reports keyed by (model, stage) with deltas against a baseline row."""

    keys: tuple[tuple[str, str], ...]
    values: tuple[tuple[float, ...], ...]  # one row per report, _COLUMNS order
    deltas: tuple[tuple[float, ...], ...]
    baseline: int

    def render_text(self) -> str:
        header = ["model", "stage"] + [name for name, _ in _COLUMNS] + ["Δmacro.F1"]
        rows = []
        macro_f1_col = [name for name, _ in _COLUMNS].index("macro.F1")
        for key, vals, delt in zip(self.keys, self.values, self.deltas):
            cells = [key[0], key[1]]
            cells += [f"{round_half_up(v):.2f}" for v in vals]
            cells.append(f"{round_half_up(delt[macro_f1_col]):+.2f}")
            rows.append(cells)
        widths = [max(len(header[c]), *(len(r[c]) for r in rows)) for c in range(len(header))]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        for r in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
        return "\n".join(lines)

    def render_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = [name for name, _ in _COLUMNS]
        writer.writerow(["model", "stage"] + names + [f"delta.{n}" for n in names])
        for key, vals, delt in zip(self.keys, self.values, self.deltas):
            writer.writerow(list(key) + [repr(v) for v in vals] + [repr(d) for d in delt])
        return buf.getvalue()


def compare(reports: Sequence[EvalReport], baseline: int = 0) -> ComparisonTable:
    if not reports:
        raise ValidationError("need at least one report to compare")
    if not 0 <= baseline < len(reports):
        raise ValidationError(f"baseline index {baseline} out of range for {len(reports)} reports")
    keys = tuple(
        (str(r.metadata.get("model", "?")), str(r.metadata.get("stage", "?"))) for r in reports
    )
    values = tuple(tuple(fn(r) for _, fn in _COLUMNS) for r in reports)
    base = values[baseline]
    deltas = tuple(tuple(v - b for v, b in zip(row, base)) for row in values)
    return ComparisonTable(keys=keys, values=values, deltas=deltas, baseline=baseline)
