"""Shared fixtures and small dataset/embedding builders used across tests."""

from __future__ import annotations

import numpy as np
import pytest

from crosshate.data import Dataset, Example, Label, make_dataset
from crosshate.embeddings import RESERVED_ROWS, AlignedEmbeddings, EmbeddingTable


def table_from_tokens(tokens: list[str], dim: int, seed: int = 0) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    matrix = np.zeros((len(tokens) + RESERVED_ROWS, dim))
    matrix[RESERVED_ROWS:] = rng.normal(size=(len(tokens), dim))
    matrix[1] = matrix[RESERVED_ROWS:].mean(axis=0)
    vocab = {tok: RESERVED_ROWS + i for i, tok in enumerate(tokens)}
    return EmbeddingTable(dimension=dim, vocabulary=vocab, matrix=matrix)


HATE_TOKENS = [f"hate{i}" for i in range(6)]
NEUTRAL_TOKENS = [f"neut{i}" for i in range(20)]


def toy_space(dim: int = 8, seed: int = 0, language: str = "xx") -> AlignedEmbeddings:
    """One-language space over a small separable vocabulary."""
    table = table_from_tokens(HATE_TOKENS + NEUTRAL_TOKENS, dim, seed)
    return AlignedEmbeddings({language: table})


def toy_dataset(
    n_no_hate: int,
    n_hate: int,
    seed: int = 0,
    language: str = "xx",
    name: str = "toy",
    min_len: int = 4,
    max_len: int = 8,
) -> Dataset:
    """Labeled dataset whose classes are separable by word choice."""
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(n_no_hate + n_hate):
        hateful = i >= n_no_hate
        n_tokens = int(rng.integers(min_len, max_len + 1))
        words = list(rng.choice(NEUTRAL_TOKENS, size=n_tokens))
        if hateful:
            n_h = int(rng.integers(1, 3))
            for pos, tok in zip(rng.integers(0, n_tokens, size=n_h), rng.choice(HATE_TOKENS, size=n_h)):
                words[int(pos)] = str(tok)
        examples.append(
            Example(
                id=f"{name}-{i:04d}",
                text=" ".join(words),
                label=Label.HATE if hateful else Label.NO_HATE,
                source=name,
            )
        )
    order = rng.permutation(len(examples))
    return make_dataset(name, [examples[j] for j in order], language=language)


def write_official_german_files(root, seed: int = 2) -> None:
    """Synthetic official shared-task files with the published pre-relabeling
    class counts (train 3321/1022/595/71, test 2330/773/381/48), the training
    file ordered so its 809-record tail relabels to 642 noHate / 167 Hate."""
    rng = np.random.default_rng(seed)

    def rows(n_other, n_abuse, n_insult, n_profanity):
        out = []
        for fine, coarse, n in (
            ("OTHER", "OTHER", n_other),
            ("ABUSE", "OFFENSE", n_abuse),
            ("INSULT", "OFFENSE", n_insult),
            ("PROFANITY", "OFFENSE", n_profanity),
        ):
            out += [f"ein tweet über dinge {fine} {i}\t{coarse}\t{fine}" for i in range(n)]
        return [out[i] for i in rng.permutation(len(out))]

    head = rows(2745, 855, 529, 71)
    tail = rows(576, 167, 66, 0)
    (root / "train.tsv").write_text("\n".join(head + tail) + "\n", encoding="utf-8")
    (root / "test.tsv").write_text("\n".join(rows(2330, 773, 381, 48)) + "\n", encoding="utf-8")


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> str:
    """Miniature multilingual encoder checkpoint on disk (random weights)."""
    from crosshate.synth import build_tiny_checkpoint

    path = tmp_path_factory.mktemp("ckpt") / "tiny-bert"
    build_tiny_checkpoint(path, extra_tokens=HATE_TOKENS + NEUTRAL_TOKENS, seed=11)
    return str(path)


@pytest.fixture(scope="session")
def small_space() -> AlignedEmbeddings:
    return toy_space(dim=8)


@pytest.fixture(scope="session")
def small_train() -> Dataset:
    return toy_dataset(40, 40, seed=1, name="toy-train")


@pytest.fixture(scope="session")
def small_dev() -> Dataset:
    return toy_dataset(10, 10, seed=2, name="toy-dev")
