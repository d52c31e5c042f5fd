"""Source-corpus ingestion: label harmonization, splitting, forum cleaning.

Two heterogeneous source corpora are normalized into the binary
noHate/Hate schema:

* an English white-nationalist forum corpus annotated with
  {noHate, Hate, Relation, Skip} (per-sample text files plus an annotation
  CSV), and
* a German tweet corpus with a two-tiered {Offense, Other} x
  {Other, Abuse, Insult, Profanity} schema (three-column TSV).

Relabeling rules: Skip -> noHate, Relation -> Hate for the forum corpus;
Abuse -> Hate and everything else -> noHate for the tweet corpus.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import Dataset, Example, Label, make_dataset
from .errors import ValidationError

STORMFRONT_LABELS = ("noHate", "Hate", "Relation", "Skip")
GERMEVAL_COARSE = ("Offense", "Other")
GERMEVAL_FINE = ("Other", "Abuse", "Insult", "Profanity")

# Size of the development set carved off the end of the official German
# training file.
GERMAN_DEV_TAIL = 809


@dataclass(frozen=True)
class RawStormfrontRecord:
    id: str
    text: str
    raw_label: str


@dataclass(frozen=True)
class RawGermevalRecord:
    id: str
    text: str
    coarse_label: str
    fine_label: str

    def __post_init__(self):
        if self.fine_label == "Other" and self.coarse_label != "Other":
            raise ValidationError(
                f"record {self.id!r}: fine label 'Other' requires coarse label 'Other', got {self.coarse_label!r}"
            )


@dataclass(frozen=True)
class EnglishSplitCounts:
    """Requested per-class sizes for the English test/dev splits.

    The training split is always the remainder. Defaults reproduce the
    published split sizes (test 427/63, dev 134/20).
    """

    test_no_hate: int = 427
    test_hate: int = 63
    dev_no_hate: int = 134
    dev_hate: int = 20


_STORMFRONT_RELABEL = {
    "noHate": Label.NO_HATE,
    "Hate": Label.HATE,
    "Relation": Label.HATE,
    "Skip": Label.NO_HATE,
}

_GERMEVAL_RELABEL = {
    "Other": Label.NO_HATE,
    "Insult": Label.NO_HATE,
    "Profanity": Label.NO_HATE,
    "Abuse": Label.HATE,
}


def relabel_stormfront(records: Sequence[RawStormfrontRecord], name: str = "stormfront") -> Dataset:
    """Collapse the four forum labels onto the binary schema.

    Skip -> noHate (non-English / uninformative), Relation -> Hate (hateful
    in context). Order and size are preserved; text and ids are untouched.
    """
    examples = []
    for rec in records:
        label = _STORMFRONT_RELABEL.get(rec.raw_label)
        if label is None:
            raise ValidationError(f"record {rec.id!r}: unknown raw label {rec.raw_label!r}")
        examples.append(Example(id=rec.id, text=rec.text, label=label, source="stormfront"))
    return make_dataset(name, examples, language="en")


def relabel_germeval(records: Sequence[RawGermevalRecord], name: str = "germeval") -> Dataset:
    """Collapse the fine-grained tweet labels onto the binary schema.

    Abuse is the counterpart of Hate; Other/Insult/Profanity become noHate.
    """
    examples = []
    for rec in records:
        label = _GERMEVAL_RELABEL.get(rec.fine_label)
        if label is None:
            raise ValidationError(f"record {rec.id!r}: unknown fine label {rec.fine_label!r}")
        examples.append(Example(id=rec.id, text=rec.text, label=label, source="germeval"))
    return make_dataset(name, examples, language="de")


def split_german(official_train: Dataset) -> tuple[Dataset, Dataset]:
    """Carve the last 809 examples (in file order) off as DE-DEV.

    Deterministic by construction: no seed is involved, only file order.
    """
    n = len(official_train)
    if n < GERMAN_DEV_TAIL + 1:
        raise ValidationError(
            f"German training set has {n} examples; need at least {GERMAN_DEV_TAIL + 1} to split off a {GERMAN_DEV_TAIL}-example dev set"
        )
    train = official_train.examples[: n - GERMAN_DEV_TAIL]
    dev = official_train.examples[n - GERMAN_DEV_TAIL :]
    return (
        make_dataset("DE-TRAIN", train, language="de"),
        make_dataset("DE-DEV", dev, language="de"),
    )


def split_english(
    full: Dataset,
    counts: EnglishSplitCounts | None = None,
    seed: int = 0,
) -> tuple[Dataset, Dataset, Dataset]:
    """Stratified random test/dev selection; the remainder is the train split.

    The partition is an exhaustive, disjoint function of ``seed``: every
    input id lands in exactly one split. Within each split the original
    input order is kept.
    """
    counts = counts or EnglishSplitCounts()
    by_class: dict[Label, list[int]] = {Label.NO_HATE: [], Label.HATE: []}
    for i, ex in enumerate(full):
        if ex.label is None:
            raise ValidationError(f"example {ex.id!r} is unlabeled; cannot split")
        by_class[ex.label].append(i)

    need = {
        Label.NO_HATE: counts.test_no_hate + counts.dev_no_hate,
        Label.HATE: counts.test_hate + counts.dev_hate,
    }
    for label, needed in need.items():
        have = len(by_class[label])
        if have < needed:
            raise ValidationError(
                f"not enough {label.value!r} examples: need {needed} for test+dev, have {have} (short by {needed - have})"
            )

    rng = np.random.default_rng(seed)
    test_idx: set[int] = set()
    dev_idx: set[int] = set()
    for label, n_test, n_dev in (
        (Label.NO_HATE, counts.test_no_hate, counts.dev_no_hate),
        (Label.HATE, counts.test_hate, counts.dev_hate),
    ):
        pool = np.array(by_class[label], dtype=np.int64)
        perm = rng.permutation(len(pool))
        test_idx.update(pool[perm[:n_test]].tolist())
        dev_idx.update(pool[perm[n_test : n_test + n_dev]].tolist())

    train, dev, test = [], [], []
    for i, ex in enumerate(full):
        if i in test_idx:
            test.append(ex)
        elif i in dev_idx:
            dev.append(ex)
        else:
            train.append(ex)
    return (
        make_dataset("EN-TRAIN", train, language="en"),
        make_dataset("EN-DEV", dev, language="en"),
        make_dataset("EN-TEST", test, language="en"),
    )


# --- raw forum dump cleaning -------------------------------------------------

# Manual corrections observed in the crawl: a phrase split across a line
# break and a token broken by a stray space.
_SPLIT_PHRASE_RE = re.compile(r"tut mir\s+leid")
_BROKEN_TOKEN_RE = re.compile(r"\bd aß\b")

_BULLET_RE = re.compile(r"^(?:[-*•·‣◦]|\d+[.)])\s")

MAX_QUOTE_CHARS = 1000
MIN_LINE_TOKENS = 3


def default_is_german(line: str) -> bool:
    """Cheap language gate: umlauts/eszett win, otherwise reject lines that
    are almost entirely ASCII words. Mixed-language lines with any German
    orthography are kept."""
    if any(ch in line for ch in "ßäöüÄÖÜ"):
        return True
    words = line.split()
    if not words:
        return False
    ascii_words = sum(1 for w in words if all(ord(c) < 128 for c in w))
    return ascii_words / len(words) <= 0.95


def preprocess_forum_text(
    raw_posts: Sequence[str],
    is_german: Callable[[str], bool] | None = None,
    name: str = "DE-NEW",
) -> Dataset:
    """Turn raw forum posts into tweet-sized unlabeled samples.

    Each newline-separated paragraph becomes a candidate sample. Dropped:
    non-German text, bullet-point list items, paragraphs over
    ``MAX_QUOTE_CHARS`` characters (over-long quotes/snippets), lines with
    fewer than ``MIN_LINE_TOKENS`` whitespace tokens (names, one-word
    responses, timestamps, salutations) and lines cut off mid-word.
    Unprocessable posts simply yield zero samples.
    """
    gate = is_german if is_german is not None else default_is_german
    examples = []
    for post in raw_posts:
        text = _SPLIT_PHRASE_RE.sub("tut mir leid", post)
        text = _BROKEN_TOKEN_RE.sub("daß", text)
        for paragraph in text.split("\n"):
            line = paragraph.strip()
            if not line:
                continue
            if _BULLET_RE.match(line):
                continue
            if len(line) > MAX_QUOTE_CHARS:
                continue
            if len(line.split()) < MIN_LINE_TOKENS:
                continue
            if line.endswith("-"):  # cut off mid-word, no continuation
                continue
            if not gate(line):
                continue
            examples.append(Example(id=f"forum-{len(examples):06d}", text=line, source="forum"))
    return make_dataset(name, examples, language="de")


# --- file-layout readers ------------------------------------------------------

_STORMFRONT_LABEL_ALIASES = {
    "nohate": "noHate",
    "hate": "Hate",
    "relation": "Relation",
    "skip": "Skip",
    "idk/skip": "Skip",
}


def read_stormfront_dir(
    root: str | Path,
    annotations: str = "annotations_metadata.csv",
    text_dir: str = "all_files",
) -> list[RawStormfrontRecord]:
    """Read the per-sample-file forum layout.

    ``annotations`` is a CSV with at least ``file_id`` and ``label``
    columns; each ``file_id`` names ``<text_dir>/<file_id>.txt``.
    """
    root = Path(root)
    ann_path = root / annotations
    if not ann_path.exists():
        raise ValidationError(f"annotation file not found: {ann_path}")
    records = []
    with open(ann_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"file_id", "label"} <= set(reader.fieldnames):
            raise ValidationError(f"{ann_path}: need columns file_id,label; got {reader.fieldnames}")
        for row in reader:
            file_id = row["file_id"].strip()
            raw = row["label"].strip()
            label = _STORMFRONT_LABEL_ALIASES.get(raw.lower(), raw)
            text_path = root / text_dir / f"{file_id}.txt"
            if not text_path.exists():
                raise ValidationError(f"text file missing for {file_id!r}: {text_path}")
            text = text_path.read_text(encoding="utf-8").strip()
            records.append(RawStormfrontRecord(id=file_id, text=text, raw_label=label))
    return records


_GERMEVAL_ALIASES = {
    "offense": "Offense",
    "other": "Other",
    "abuse": "Abuse",
    "insult": "Insult",
    "profanity": "Profanity",
}


def read_germeval_tsv(path: str | Path, id_prefix: str = "germeval") -> list[RawGermevalRecord]:
    """Read the shared-task TSV layout: ``text<TAB>coarse<TAB>fine``.

    The files carry no ids, so positional ids are generated.
    """
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValidationError(f"{path}:{lineno}: expected text<TAB>coarse<TAB>fine, got {len(parts)} fields")
            text, coarse, fine = parts
            coarse_n = _GERMEVAL_ALIASES.get(coarse.strip().lower())
            fine_n = _GERMEVAL_ALIASES.get(fine.strip().lower())
            if coarse_n not in GERMEVAL_COARSE:
                raise ValidationError(f"{path}:{lineno}: unknown coarse label {coarse!r}")
            if fine_n not in GERMEVAL_FINE:
                raise ValidationError(f"{path}:{lineno}: unknown fine label {fine!r}")
            records.append(
                RawGermevalRecord(
                    id=f"{id_prefix}-{lineno:05d}",
                    text=text,
                    coarse_label=coarse_n,
                    fine_label=fine_n,
                )
            )
    return records


def read_forum_dump(path: str | Path) -> list[str]:
    """Read a raw forum dump: posts separated by blank lines, paragraphs
    within a post separated by single newlines."""
    raw = Path(path).read_text(encoding="utf-8")
    posts = [p.strip("\n") for p in re.split(r"\n\s*\n", raw)]
    return [p for p in posts if p.strip()]
