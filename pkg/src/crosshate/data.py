"""Core data containers and the canonical on-disk sample format.

Every dataset in the pipeline, whatever its origin, is normalized into a
sequence of :class:`Example` objects and stored on disk as a three-column
TSV: ``id<TAB>label<TAB>text`` (UTF-8). Tabs, newlines, carriage returns and
backslashes inside the text are escaped so one record is always one line.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .errors import ValidationError


class Label(enum.Enum):
    """Binary target schema. Class order everywhere is (noHate, Hate)."""

    NO_HATE = "noHate"
    HATE = "Hate"

    @classmethod
    def from_string(cls, value: str) -> "Label":
        for member in cls:
            if member.value == value:
                return member
        raise ValidationError(f"unknown label {value!r} (expected 'noHate' or 'Hate')")


#: Fixed class order used by confusion matrices and model outputs.
LABELS: tuple[Label, Label] = (Label.NO_HATE, Label.HATE)
LABEL_INDEX: dict[Label, int] = {Label.NO_HATE: 0, Label.HATE: 1}


class ClassCounts(NamedTuple):
    no_hate: int
    hate: int

    @property
    def total(self) -> int:
        return self.no_hate + self.hate


@dataclass(frozen=True)
class Example:
    """One text sample with an optional label and a provenance tag."""

    id: str
    text: str
    label: Label | None = None
    source: str = ""

    def __post_init__(self):
        if not self.text:
            raise ValidationError(f"example {self.id!r} has empty text")

    def with_label(self, label: Label | None) -> "Example":
        return replace(self, label=label)


@dataclass(frozen=True)
class Dataset:
    """Ordered, immutable collection of examples.

    ``language`` tags which side of the aligned embedding space the text
    belongs to (e.g. ``"en"`` / ``"de"``); it is optional because toy and
    intermediate datasets may not care.
    """

    name: str
    examples: tuple[Example, ...]
    language: str | None = None

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    def __getitem__(self, i: int) -> Example:
        return self.examples[i]

    def class_counts(self) -> ClassCounts:
        """Counts over the labeled examples (unlabeled ones are skipped)."""
        no_hate = sum(1 for e in self.examples if e.label is Label.NO_HATE)
        hate = sum(1 for e in self.examples if e.label is Label.HATE)
        return ClassCounts(no_hate, hate)

    def labels(self) -> list[Label | None]:
        return [e.label for e in self.examples]

    def ids(self) -> list[str]:
        return [e.id for e in self.examples]

    def with_name(self, name: str) -> "Dataset":
        return replace(self, name=name)

    def with_examples(self, examples: Iterable[Example]) -> "Dataset":
        return replace(self, examples=tuple(examples))


def make_dataset(name: str, examples: Iterable[Example], language: str | None = None) -> Dataset:
    return Dataset(name=name, examples=tuple(examples), language=language)


# --- canonical TSV -----------------------------------------------------------

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def escape_field(text: str) -> str:
    out = []
    for ch in text:
        out.append(_ESCAPES.get(ch, ch))
    return "".join(out)


def unescape_field(text: str) -> str:
    out = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\" and i + 1 < n and text[i + 1] in _UNESCAPES:
            out.append(_UNESCAPES[text[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def write_tsv(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset in the canonical ``id<TAB>label<TAB>text`` format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in dataset:
            label = ex.label.value if ex.label is not None else ""
            fh.write(f"{escape_field(ex.id)}\t{label}\t{escape_field(ex.text)}\n")


def read_tsv(
    path: str | Path,
    name: str | None = None,
    language: str | None = None,
    source: str | None = None,
) -> Dataset:
    """Read a canonical TSV back into a Dataset.

    An empty label column means the example is unlabeled.
    """
    path = Path(path)
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            raw_id, raw_label, raw_text = parts
            label = Label.from_string(raw_label) if raw_label else None
            examples.append(
                Example(
                    id=unescape_field(raw_id),
                    text=unescape_field(raw_text),
                    label=label,
                    source=source if source is not None else path.stem,
                )
            )
    return Dataset(name=name or path.stem, examples=tuple(examples), language=language)
