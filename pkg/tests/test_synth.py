import json

import pytest

from crosshate.data import read_tsv
from crosshate.embeddings import AlignedEmbeddings, load_embeddings
from crosshate.synth import PAPER_COUNTS, SynthParams, generate_world


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    return generate_world(tmp_path_factory.mktemp("synth"), seed=3, scale=0.05, n_forum_posts=8)


def test_split_counts_scale(world):
    for split, (n_no, n_hate) in PAPER_COUNTS.items():
        ds = read_tsv(world.datasets[split])
        counts = ds.class_counts()
        assert counts.no_hate == max(1, round(n_no * 0.05))
        assert counts.hate == max(1, round(n_hate * 0.05))


def test_full_scale_uses_published_counts(tmp_path):
    world = generate_world(tmp_path, seed=1, counts={"de_test": PAPER_COUNTS["de_test"]}, n_forum_posts=2)
    assert tuple(read_tsv(world.datasets["de_test"]).class_counts()) == (2759, 773)


def test_embeddings_are_one_aligned_space(world):
    space = AlignedEmbeddings({lang: load_embeddings(p) for lang, p in world.embeddings.items()})
    assert space.dimension == SynthParams().dim
    en = space.table_for("en")
    de = space.table_for("de")
    # shared hashtags carry identical surface forms and identical vectors
    tag = "#tag0"
    assert (en.matrix[en.vocabulary[tag]] == de.matrix[de.vocabulary[tag]]).all()


def test_language_tags_and_vocab_side(world):
    en = read_tsv(world.datasets["en_train"], language="en")
    de = read_tsv(world.datasets["de_test"], language="de")
    assert all(tok.startswith(("en", "#")) for tok in en[0].text.split())
    assert all(tok.startswith(("de", "#")) for tok in de[0].text.split())


def test_generation_is_seed_deterministic(tmp_path):
    a = generate_world(tmp_path / "a", seed=9, scale=0.02, n_forum_posts=3)
    b = generate_world(tmp_path / "b", seed=9, scale=0.02, n_forum_posts=3)
    assert (a.root / "data" / "en_train.tsv").read_bytes() == (b.root / "data" / "en_train.tsv").read_bytes()
    assert (a.embeddings["de"]).read_bytes() == (b.embeddings["de"]).read_bytes()


def test_world_manifest_and_demo_configs(world):
    manifest = json.loads((world.root / "world.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 3
    for name in ("crosslingual.ini", "bootstrap.ini", "sweep.ini"):
        assert (world.root / "configs" / name).exists()


def test_forum_dump_has_cleanable_structure(world):
    raw = world.forum_dump.read_text(encoding="utf-8")
    assert "\n\n" in raw  # post separators
    assert "tut mir\nleid" in raw  # the split-phrase case travels through
