"""Class-ratio adjustment by random duplication or removal.

Ratios are stated majority:minority as noHate:Hate (7:1, 2:1, 1:1, ...).
The non-adjusted class is held fixed and the other class is grown
(oversampling, duplication with replacement) or shrunk (undersampling,
removal without replacement) until the ratio holds. When the exact target
is not an integer, the adjusted count is the nearest integer that does not
cross the requested ratio (floor when growing, ceiling when shrinking);
every published dataset size is integral under this rule.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import ClassCounts, Dataset, Label
from .errors import ValidationError


class SamplingMode(enum.Enum):
    OVERSAMPLE = "oversample"
    UNDERSAMPLE = "undersample"


@dataclass(frozen=True)
class SamplingSpec:
    """Target noHate:Hate ratio, adjustment mode and RNG seed."""

    ratio: tuple[int, int]
    mode: SamplingMode
    seed: int = 0

    def __post_init__(self):
        a, b = self.ratio
        if a < 1 or b < 1:
            raise ValidationError(f"ratio components must be >= 1, got {a}:{b}")

    @classmethod
    def from_string(cls, text: str, seed: int = 0) -> "SamplingSpec":
        """Parse e.g. ``"7:1 oversample"`` or ``"ratio=7:1 mode=undersample seed=3"``."""
        ratio = None
        mode = None
        for token in text.replace(",", " ").split():
            if "=" in token:
                key, _, value = token.partition("=")
            else:
                key, value = ("ratio", token) if ":" in token else ("mode", token)
            if key == "ratio":
                ratio = parse_ratio(value)
            elif key == "mode":
                try:
                    mode = SamplingMode(value.lower())
                except ValueError:
                    raise ValidationError(f"unknown sampling mode {value!r}") from None
            elif key == "seed":
                seed = int(value)
            else:
                raise ValidationError(f"unknown sampling spec field {key!r}")
        if ratio is None or mode is None:
            raise ValidationError(f"sampling spec needs both a ratio and a mode: {text!r}")
        return cls(ratio=ratio, mode=mode, seed=seed)

    def tag(self) -> str:
        kind = "OS" if self.mode is SamplingMode.OVERSAMPLE else "US"
        return f"{kind}[{self.ratio[0]}:{self.ratio[1]}]"


def parse_ratio(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValidationError(f"ratio must look like '7:1', got {text!r}")
    try:
        a, b = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValidationError(f"ratio must use integers, got {text!r}") from None
    return a, b


def class_counts(dataset: Dataset) -> ClassCounts:
    """Exact (noHate, Hate) counts; rejects datasets with unlabeled examples."""
    for ex in dataset:
        if ex.label is None:
            raise ValidationError(f"example {ex.id!r} is unlabeled; counts are undefined")
    return dataset.class_counts()


def _target_count(fixed: int, num: int, den: int, grow: bool) -> int:
    """Adjusted-class size for ``adjusted/fixed = num/den``; floor when
    growing, ceiling when shrinking, so the requested ratio is never crossed."""
    q, r = divmod(fixed * num, den)
    if r == 0:
        return q
    return q if grow else q + 1


def expected_counts(counts: ClassCounts, spec: SamplingSpec) -> ClassCounts:
    """The (noHate, Hate) counts :func:`resample` will produce for ``counts``
    under ``spec`` (used to re-assert sampled datasets before training)."""
    a, b = spec.ratio
    lhs, rhs = counts.no_hate * b, counts.hate * a
    if lhs == rhs:
        return counts
    if spec.mode is SamplingMode.OVERSAMPLE:
        if lhs < rhs:
            return ClassCounts(_target_count(counts.hate, a, b, grow=True), counts.hate)
        return ClassCounts(counts.no_hate, _target_count(counts.no_hate, b, a, grow=True))
    if lhs > rhs:
        if counts.hate * a < b:
            raise ValidationError(f"undersampling to {a}:{b} would leave fewer than one noHate example")
        return ClassCounts(_target_count(counts.hate, a, b, grow=False), counts.hate)
    if counts.no_hate * b < a:
        raise ValidationError(f"undersampling to {a}:{b} would leave fewer than one Hate example")
    return ClassCounts(counts.no_hate, _target_count(counts.no_hate, b, a, grow=False))


def resample(dataset: Dataset, spec: SamplingSpec) -> Dataset:
    """Return a ratio-adjusted copy of ``dataset``.

    Oversampling duplicates uniformly with replacement from the deficient
    class; undersampling removes uniformly without replacement from the
    over-represented class. Output order is the surviving originals in input
    order, duplicates appended, then one seed-deterministic shuffle. Text,
    labels and ids are never edited.
    """
    counts = class_counts(dataset)
    if counts.no_hate == 0 or counts.hate == 0:
        raise ValidationError(
            f"dataset {dataset.name!r} needs at least one example of each class, has {counts.no_hate}/{counts.hate}"
        )
    target = expected_counts(counts, spec)
    rng = np.random.default_rng(spec.seed)

    survivors = list(dataset.examples)
    duplicates: list = []

    deltas = {
        Label.NO_HATE: target.no_hate - counts.no_hate,
        Label.HATE: target.hate - counts.hate,
    }
    changed = {label: d for label, d in deltas.items() if d != 0}
    if spec.mode is SamplingMode.OVERSAMPLE and changed:
        (grow_label, delta), = changed.items()
        pool = [ex for ex in dataset if ex.label is grow_label]
        picks = rng.integers(0, len(pool), size=delta)
        duplicates = [pool[i] for i in picks]
    elif changed:
        (shrink_label, delta), = changed.items()
        pool_positions = [i for i, ex in enumerate(dataset) if ex.label is shrink_label]
        removed = rng.choice(len(pool_positions), size=-delta, replace=False)
        removed_set = {pool_positions[i] for i in removed}
        survivors = [ex for i, ex in enumerate(dataset) if i not in removed_set]

    combined = survivors + duplicates
    order = rng.permutation(len(combined))
    shuffled = tuple(combined[i] for i in order)
    name = f"{dataset.name}-{spec.tag()}"
    return Dataset(name=name, examples=shuffled, language=dataset.language)
