"""Synthetic bilingual world for pipeline validation and demos.

Builds everything the experiment CLI needs, without any external corpora:

* two vocabularies of translation pairs whose vectors are noisy copies of
  shared latent concepts (the shape a real embedding-alignment procedure
  produces), written as word-vector text files;
* label-separable sentence corpora for both languages with configurable
  class counts (defaults follow the published split sizes);
* a raw forum-style dump for the cleaning stage;
* optionally a tiny multilingual encoder checkpoint in the standard
  on-disk layout, for the transformer lane.

The target-language Hate vocabulary is deliberately noisy and its hashtag
cues sparse, so zero-shot transfer shows the realistic pattern: strong on
noHate, weak recall on Hate. Shared hashtags are the one surface both
languages have in common, which is what a subword model can latch onto.
"""

from __future__ import annotations

import argparse
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, Example, Label, make_dataset, write_tsv

# (noHate, Hate) per split, as published.
PAPER_COUNTS = {
    "en_train": (9018, 1281),
    "en_dev": (134, 20),
    "en_test": (427, 63),
    "de_train": (3345, 855),
    "de_dev": (642, 167),
    "de_test": (2759, 773),
}


@dataclass(frozen=True)
class SynthParams:
    dim: int = 24
    n_neutral: int = 240
    n_hate: int = 40
    n_tags: int = 8
    en_noise: float = 0.1
    de_neutral_noise: float = 0.15
    de_hate_noise: float = 8.0  # badly aligned target-language Hate words
    en_hate_tokens: tuple[int, int] = (2, 4)
    de_hate_tokens: tuple[int, int] = (1, 2)
    tag_prob_en_hate: float = 0.8
    tag_prob_de_hate: float = 0.08
    tag_prob_no_hate: float = 0.005
    sentence_len: tuple[int, int] = (6, 12)


@dataclass
class SynthWorld:
    root: Path
    embeddings: dict[str, Path]
    datasets: dict[str, Path]
    forum_dump: Path
    checkpoint: Path | None = None
    params: SynthParams = field(default_factory=SynthParams)


def _umlaut(i: int) -> str:
    return "äöüß"[i % 4]


class _Vocab:
    def __init__(self, params: SynthParams):
        p = params
        self.en_neutral = [f"enw{i}" for i in range(p.n_neutral)]
        self.en_hate = [f"enh{i}" for i in range(p.n_hate)]
        # target-language words carry German orthography so the forum
        # language gate sees them as German
        self.de_neutral = [f"dew{_umlaut(i)}{i}" for i in range(p.n_neutral)]
        self.de_hate = [f"deh{_umlaut(i)}{i}" for i in range(p.n_hate)]
        self.tags = [f"#tag{i}" for i in range(p.n_tags)]

    def all_words(self) -> list[str]:
        return self.en_neutral + self.en_hate + self.de_neutral + self.de_hate + self.tags


def _write_vec(path: Path, rows: list[tuple[str, np.ndarray]], dim: int) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(rows)} {dim}\n")
        for token, vec in rows:
            fh.write(token + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")


def _write_embeddings(root: Path, vocab: _Vocab, params: SynthParams, rng: np.random.Generator) -> dict[str, Path]:
    p = params
    neutral_base = rng.normal(size=(p.n_neutral, p.dim))
    hate_base = rng.normal(size=(p.n_hate, p.dim))
    tag_base = rng.normal(size=(p.n_tags, p.dim))

    def noisy(base, sigma):
        # interpolation keeps component variance at 1 so vector norms carry
        # no class signal; alignment to the latent concept is 1/sqrt(1+s^2)
        mixed = base + sigma * rng.normal(size=base.shape)
        return mixed / np.sqrt(1.0 + sigma * sigma)

    en_rows = (
        list(zip(vocab.en_neutral, noisy(neutral_base, p.en_noise)))
        + list(zip(vocab.en_hate, noisy(hate_base, p.en_noise)))
        + list(zip(vocab.tags, tag_base))
    )
    de_rows = (
        list(zip(vocab.de_neutral, noisy(neutral_base, p.de_neutral_noise)))
        + list(zip(vocab.de_hate, noisy(hate_base, p.de_hate_noise)))
        + list(zip(vocab.tags, tag_base))  # shared surface forms, shared vectors
    )
    paths = {"en": root / "emb" / "en.vec", "de": root / "emb" / "de.vec"}
    _write_vec(paths["en"], en_rows, p.dim)
    _write_vec(paths["de"], de_rows, p.dim)
    return paths


def _sentence(
    rng: np.random.Generator,
    vocab: _Vocab,
    params: SynthParams,
    language: str,
    hateful: bool,
) -> str:
    p = params
    neutral = vocab.en_neutral if language == "en" else vocab.de_neutral
    hate = vocab.en_hate if language == "en" else vocab.de_hate
    n_tokens = int(rng.integers(p.sentence_len[0], p.sentence_len[1] + 1))
    words = [str(w) for w in rng.choice(neutral, size=n_tokens)]
    if hateful:
        lo, hi = p.en_hate_tokens if language == "en" else p.de_hate_tokens
        for pos, tok in zip(
            rng.integers(0, n_tokens, size=int(rng.integers(lo, hi + 1))),
            rng.choice(hate, size=hi),
        ):
            words[int(pos)] = str(tok)
        tag_prob = p.tag_prob_en_hate if language == "en" else p.tag_prob_de_hate
    else:
        tag_prob = p.tag_prob_no_hate
    if rng.random() < tag_prob:
        n_tags = int(rng.integers(1, 3)) if hateful and language == "en" else 1
        for tag in rng.choice(vocab.tags, size=n_tags):
            words.insert(int(rng.integers(0, len(words) + 1)), str(tag))
    return " ".join(words)


def _corpus(
    rng: np.random.Generator,
    vocab: _Vocab,
    params: SynthParams,
    name: str,
    language: str,
    n_no_hate: int,
    n_hate: int,
) -> Dataset:
    examples = []
    for i in range(n_no_hate + n_hate):
        hateful = i >= n_no_hate
        label = Label.HATE if hateful else Label.NO_HATE
        text = _sentence(rng, vocab, params, language, hateful)
        examples.append(Example(id=f"{name}-{i:05d}", text=text, label=label, source=name))
    order = rng.permutation(len(examples))
    return make_dataset(name, [examples[j] for j in order], language=language)


def _forum_dump(rng: np.random.Generator, vocab: _Vocab, params: SynthParams, n_posts: int) -> str:
    """Raw posts with the artifacts the cleaning stage must handle."""
    posts = []
    for i in range(n_posts):
        paragraphs = [
            _sentence(rng, vocab, params, "de", hateful=rng.random() < 0.2)
            for _ in range(int(rng.integers(1, 4)))
        ]
        if i % 7 == 0:
            paragraphs.append("this paragraph is written in plain english and should go")
        if i % 9 == 0:
            paragraphs.append("Danke")  # one-word response
        if i % 11 == 0:
            paragraphs.append("- " + " ".join(str(w) for w in rng.choice(vocab.de_neutral, size=6)))
        if i % 13 == 0:
            long_quote = " ".join(str(w) for w in rng.choice(vocab.de_neutral, size=220))
            paragraphs.append(long_quote)  # well over the quote limit
        if i == 3:
            paragraphs.append("es tut mir\nleid für die sache da drüben")
        posts.append("\n".join(paragraphs))
    return "\n\n".join(posts) + "\n"


def build_tiny_checkpoint(
    path: str | Path,
    extra_tokens: list[str] | None = None,
    seed: int = 0,
    hidden_size: int = 32,
    num_layers: int = 2,
    num_heads: int = 2,
    max_positions: int = 64,
    params: SynthParams | None = None,
) -> Path:
    """Write a miniature multilingual encoder checkpoint (random weights) in
    the standard on-disk layout, covering both synthetic vocabularies."""
    import torch
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

    from .transformer import COVERAGE_PROBES

    path = Path(path)
    vocab = _Vocab(params or SynthParams())
    words = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "#"]
    words += [t.lstrip("#") for t in vocab.tags]
    words += vocab.en_neutral + vocab.en_hate + vocab.de_neutral + vocab.de_hate
    for probe in COVERAGE_PROBES.values():
        words += probe.split()
    words += extra_tokens or []
    seen = set()
    ordered = [w for w in words if not (w in seen or seen.add(w))]

    tokenizer = BertTokenizer(
        vocab={w: i for i, w in enumerate(ordered)}, do_lower_case=True, strip_accents=False
    )
    config = BertConfig(
        vocab_size=len(ordered),
        hidden_size=hidden_size,
        num_hidden_layers=num_layers,
        num_attention_heads=num_heads,
        intermediate_size=hidden_size * 2,
        max_position_embeddings=max_positions,
        num_labels=2,
    )
    torch.manual_seed(seed)
    model = BertForSequenceClassification(config)
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return path


def generate_world(
    root: str | Path,
    seed: int = 7,
    params: SynthParams | None = None,
    counts: dict[str, tuple[int, int]] | None = None,
    scale: float = 1.0,
    with_checkpoint: bool = False,
    n_forum_posts: int = 60,
) -> SynthWorld:
    """Generate the full on-disk world under ``root``. Deterministic in
    ``seed``; ``scale`` shrinks every split for smoke-sized runs."""
    root = Path(root).resolve()  # emitted configs must not depend on the cwd
    params = params or SynthParams()
    counts = dict(counts or PAPER_COUNTS)
    if scale != 1.0:
        counts = {k: (max(1, round(a * scale)), max(1, round(b * scale))) for k, (a, b) in counts.items()}

    rng = np.random.default_rng(seed)
    vocab = _Vocab(params)
    emb_paths = _write_embeddings(root, vocab, params, rng)

    dataset_paths: dict[str, Path] = {}
    data_dir = root / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    for split, (n_no, n_hate) in counts.items():
        language = split.split("_")[0]
        ds = _corpus(rng, vocab, params, split.upper().replace("_", "-"), language, n_no, n_hate)
        path = data_dir / f"{split}.tsv"
        write_tsv(ds, path)
        dataset_paths[split] = path

    forum_path = data_dir / "de_new_raw.txt"
    forum_path.write_text(_forum_dump(rng, vocab, params, n_forum_posts), encoding="utf-8")

    checkpoint = None
    if with_checkpoint:
        checkpoint = build_tiny_checkpoint(root / "checkpoint", seed=seed, params=params)

    if {"en_train", "de_train", "de_dev", "de_test"} <= dataset_paths.keys():
        _write_demo_configs(root, emb_paths, dataset_paths, checkpoint, seed)

    manifest = {
        "seed": seed,
        "scale": scale,
        "counts": {k: list(v) for k, v in counts.items()},
        "embeddings": {k: str(v) for k, v in emb_paths.items()},
        "datasets": {k: str(v) for k, v in dataset_paths.items()},
        "forum_dump": str(forum_path),
        "checkpoint": str(checkpoint) if checkpoint else None,
    }
    with open(root / "world.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return SynthWorld(
        root=root,
        embeddings=emb_paths,
        datasets=dataset_paths,
        forum_dump=forum_path,
        checkpoint=checkpoint,
        params=params,
    )


def _write_demo_configs(root: Path, emb, data, checkpoint, seed: int) -> None:
    """Ready-to-run experiment configs wired to the generated files.

    The crosslingual config trains on ``data/en_os_1_1.tsv``, which the
    sample verb produces from the generated training set.
    """
    cfg_dir = root / "configs"
    cfg_dir.mkdir(parents=True, exist_ok=True)
    archs = "cnn,bilstm,transformer" if checkpoint else "cnn,bilstm"

    def arch_sections(cnn_hp, bilstm_hp, transformer_hp):
        text = (
            f"[embeddings]\nen = {emb['en']}\nde = {emb['de']}\n"
            f"\n[cnn]\nfilter_sizes = 3,4,5\nfilters_per_size = 100\n{cnn_hp}"
            f"\n[bilstm]\nrecurrent_units = 100\nconv_feature_maps = 200\nkernel_sizes = 3,4,5\n"
            f"dense_units = 100\n{bilstm_hp}"
        )
        if checkpoint:
            text += f"\n[transformer]\ncheckpoint = {checkpoint}\nmax_subword_len = 32\n{transformer_hp}"
        return text

    train_sections = arch_sections(
        "class_weight_nohate = 0.6\nclass_weight_hate = 0.4\n"
        "dropout = 0.7\nlearning_rate = 1e-4\nbatch_size = 50\nepochs = 1\n",
        "dropout = 0.2\nlearning_rate = 3e-3\nbatch_size = 40\nepochs = 5\n",
        "dropout = 0.2\nlearning_rate = 1e-3\nbatch_size = 8\nepochs = 3\n",
    )
    # bootstrapped data is heavily skewed; fine-tune gently, hate-weighted
    fine_tune_sections = arch_sections(
        "class_weight_nohate = 0.02\nclass_weight_hate = 0.98\n"
        "dropout = 0.2\nlearning_rate = 3e-4\nbatch_size = 50\nepochs = 2\n",
        "class_weight_nohate = 0.02\nclass_weight_hate = 0.98\n"
        "dropout = 0.2\nlearning_rate = 3e-4\nbatch_size = 50\nepochs = 4\n",
        "dropout = 0.2\nlearning_rate = 1e-5\nbatch_size = 8\nepochs = 2\n",
    )
    (cfg_dir / "crosslingual.ini").write_text(
        f"[experiment]\nstage = crosslingual\nseed = {seed}\n"
        f"out_dir = {root / 'runs' / 'crosslingual'}\nmax_len = 16\narchitectures = {archs}\n"
        f"\n[data]\ntrain = {root / 'data' / 'en_os_1_1.tsv'}\ntrain_language = en\n"
        f"dev = {data['de_dev']}\ndev_language = de\ntest = {data['de_test']}\ntest_language = de\n\n"
        + train_sections,
        encoding="utf-8",
    )
    (cfg_dir / "bootstrap.ini").write_text(
        f"[experiment]\nstage = bootstrap\nseed = {seed}\n"
        f"out_dir = {root / 'runs' / 'bootstrap'}\nmax_len = 16\narchitectures = {archs}\n"
        f"\n[data]\nunlabeled = {data['de_train']}\nunlabeled_language = de\n"
        f"dev = {data['de_dev']}\ndev_language = de\ntest = {data['de_test']}\ntest_language = de\n"
        f"ensemble = {root / 'runs' / 'crosslingual' / 'ensemble'}\n\n"
        + fine_tune_sections,
        encoding="utf-8",
    )
    (cfg_dir / "sweep.ini").write_text(
        f"[experiment]\nstage = imbalance_sweep\nseed = {seed}\n"
        f"out_dir = {root / 'runs' / 'sweep'}\nmax_len = 16\narchitectures = {archs}\n"
        f"\n[data]\ntrain = {data['de_train']}\ntrain_language = de\n"
        f"dev = {data['de_dev']}\ndev_language = de\ntest = {data['de_test']}\ntest_language = de\n"
        "\n[sampling]\nspecs = 7:1 oversample; 2:1 undersample; 1:1 undersample; 1:1 oversample\n\n"
        + train_sections,
        encoding="utf-8",
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="generate a synthetic bilingual demo world")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--scale", type=float, default=1.0, help="shrink factor for all split sizes")
    parser.add_argument("--checkpoint", action="store_true", help="also build a tiny transformer checkpoint")
    args = parser.parse_args(argv)
    world = generate_world(args.out, seed=args.seed, scale=args.scale, with_checkpoint=args.checkpoint)
    print(f"world written under {world.root}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
