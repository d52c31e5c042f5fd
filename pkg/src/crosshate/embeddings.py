"""Aligned word-vector tables and text-to-index encoding.

Vector files use the common text convention: an optional ``count dim``
header line, then one ``token v1 ... vd`` line per word. Two reserved rows
are prepended to every table: PAD (index 0, all zeros) and UNK (index 1,
the mean of all loaded vectors). Tables from one shared cross-lingual space
are grouped in :class:`AlignedEmbeddings`, which asserts that all languages
have the same dimensionality.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)

PAD_INDEX = 0
UNK_INDEX = 1
RESERVED_ROWS = 2

DEFAULT_MAX_LEN = 64


@dataclass
class EmbeddingTable:
    dimension: int
    vocabulary: dict[str, int]  # token -> row index (>= RESERVED_ROWS)
    matrix: np.ndarray  # (len(vocabulary) + 2, dimension) float64
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.vocabulary)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def index_of(self, token: str) -> int:
        return self.vocabulary.get(token, UNK_INDEX)

    def decode(self, indices) -> list[str]:
        """Map in-vocabulary row indices back to tokens (PAD/UNK markers kept)."""
        reverse = {i: tok for tok, i in self.vocabulary.items()}
        reverse[PAD_INDEX] = "<pad>"
        reverse[UNK_INDEX] = "<unk>"
        return [reverse[int(i)] for i in indices]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.matrix).tobytes())
        h.update("\x00".join(self.vocabulary).encode("utf-8"))
        return h.hexdigest()


def load_embeddings(path: str | Path, max_vocab: int | None = None) -> EmbeddingTable:
    """Load a word-vector text file.

    The first ``max_vocab`` tokens are kept in file order. The dimension is
    inferred from the first vector line and validated per line; on a
    duplicate token the first occurrence wins and a warning is recorded.
    """
    path = Path(path)
    vocabulary: dict[str, int] = {}
    vectors: list[np.ndarray] = []
    warnings: list[str] = []
    dimension: int | None = None

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if lineno == 1 and len(parts) == 2:
                # header: "count dim"
                try:
                    int(parts[0])
                    dimension = int(parts[1])
                    continue
                except ValueError:
                    pass
            if max_vocab is not None and len(vectors) >= max_vocab:
                break
            token, values = parts[0], parts[1:]
            if dimension is None:
                dimension = len(values)
                if dimension == 0:
                    raise ValidationError(f"{path}:{lineno}: no vector components found")
            if len(values) != dimension:
                raise ValidationError(
                    f"{path}:{lineno}: expected {dimension} components, got {len(values)}"
                )
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: bad vector component ({exc})") from None
            if not np.all(np.isfinite(vec)):
                raise ValidationError(f"{path}:{lineno}: non-finite vector component")
            if token in vocabulary:
                warnings.append(f"line {lineno}: duplicate token {token!r}, first occurrence wins")
                continue
            vocabulary[token] = RESERVED_ROWS + len(vectors)
            vectors.append(vec)

    if dimension is None or not vectors:
        raise ValidationError(f"{path}: no vectors loaded")
    for msg in warnings:
        log.warning("%s: %s", path, msg)

    matrix = np.zeros((len(vectors) + RESERVED_ROWS, dimension), dtype=np.float64)
    stacked = np.stack(vectors)
    matrix[RESERVED_ROWS:] = stacked
    matrix[UNK_INDEX] = stacked.mean(axis=0)  # PAD stays all-zeros
    return EmbeddingTable(dimension=dimension, vocabulary=vocabulary, matrix=matrix, warnings=warnings)


class AlignedEmbeddings:
    """Per-language tables from one shared cross-lingual space."""

    def __init__(self, tables: dict[str, EmbeddingTable]):
        if not tables:
            raise ValidationError("need at least one embedding table")
        dims = {lang: t.dimension for lang, t in tables.items()}
        if len(set(dims.values())) != 1:
            raise ValidationError(f"embedding dimensions differ across languages: {dims}")
        self.tables = dict(tables)
        self.dimension = next(iter(dims.values()))

    def languages(self) -> list[str]:
        return sorted(self.tables)

    def table_for(self, language: str | None) -> EmbeddingTable:
        if language is None:
            if len(self.tables) == 1:
                return next(iter(self.tables.values()))
            raise ValidationError(
                f"dataset has no language tag; aligned space covers {self.languages()}"
            )
        try:
            return self.tables[language]
        except KeyError:
            raise ValidationError(
                f"no embedding table for language {language!r}; have {self.languages()}"
            ) from None

    def fingerprints(self) -> dict[str, str]:
        return {lang: t.fingerprint() for lang, t in self.tables.items()}


# --- tokenization and encoding -------------------------------------------------

# Lightweight Moses-style rules: lowercase, split punctuation off words,
# keep URLs / @-mentions / #-hashtags intact.
_TOKEN_RE = re.compile(r"https?://\S+|www\.\S+|[@#]\w+|\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(text)]


@dataclass(frozen=True)
class EncodedExample:
    indices: np.ndarray  # (max_len,) int64, PAD-filled past true_length
    true_length: int


def encode(tokens: list[str], table: EmbeddingTable, max_len: int = DEFAULT_MAX_LEN) -> EncodedExample:
    """Map tokens to table rows; OOV -> UNK, truncate at ``max_len``, PAD-fill."""
    if max_len < 1:
        raise ValidationError(f"max_len must be >= 1, got {max_len}")
    true_length = min(len(tokens), max_len)
    indices = np.full(max_len, PAD_INDEX, dtype=np.int64)
    for i in range(true_length):
        indices[i] = table.index_of(tokens[i])
    return EncodedExample(indices=indices, true_length=true_length)


def encode_texts(
    texts: list[str], table: EmbeddingTable, max_len: int = DEFAULT_MAX_LEN
) -> tuple[np.ndarray, np.ndarray]:
    """Batch encode: returns (N, max_len) int64 indices and (N,) int64 lengths."""
    n = len(texts)
    indices = np.full((n, max_len), PAD_INDEX, dtype=np.int64)
    lengths = np.zeros(n, dtype=np.int64)
    for row, text in enumerate(texts):
        enc = encode(tokenize(text), table, max_len)
        indices[row] = enc.indices
        lengths[row] = enc.true_length
    return indices, lengths
