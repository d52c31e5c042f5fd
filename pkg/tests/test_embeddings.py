import numpy as np
import pytest

from conftest import table_from_tokens
from crosshate.embeddings import (
    PAD_INDEX,
    UNK_INDEX,
    AlignedEmbeddings,
    encode,
    encode_texts,
    load_embeddings,
    tokenize,
)
from crosshate.errors import ValidationError


def write_vec(path, rows, header=None):
    lines = []
    if header:
        lines.append(header)
    for token, values in rows:
        lines.append(token + " " + " ".join(str(v) for v in values))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestLoader:
    def test_three_tokens_dim_four(self, tmp_path):
        path = write_vec(tmp_path / "v.vec", [(f"t{i}", [i, i + 1, i + 2, i + 3]) for i in range(3)])
        table = load_embeddings(path)
        assert table.dimension == 4
        assert table.n_rows == 5  # PAD + UNK + 3
        assert list(table.vocabulary) == ["t0", "t1", "t2"]
        assert np.array_equal(table.matrix[PAD_INDEX], np.zeros(4))
        assert np.allclose(table.matrix[UNK_INDEX], table.matrix[2:].mean(axis=0))

    def test_header_line(self, tmp_path):
        path = write_vec(tmp_path / "v.vec", [("a", [1.0, 2.0]), ("b", [3.0, 4.0])], header="2 2")
        table = load_embeddings(path)
        assert table.dimension == 2
        assert len(table) == 2

    def test_inconsistent_dimension_names_line(self, tmp_path):
        path = write_vec(tmp_path / "v.vec", [("a", [1, 2, 3]), ("b", [1, 2])])
        with pytest.raises(ValidationError, match=":2"):
            load_embeddings(path)

    def test_duplicate_first_occurrence_wins(self, tmp_path):
        path = write_vec(tmp_path / "v.vec", [("a", [1.0]), ("a", [9.0]), ("b", [2.0])])
        table = load_embeddings(path)
        assert table.matrix[table.vocabulary["a"]][0] == 1.0
        assert len(table.warnings) == 1 and "duplicate" in table.warnings[0]

    def test_max_vocab_keeps_file_order(self, tmp_path):
        path = write_vec(tmp_path / "v.vec", [(f"t{i}", [float(i)]) for i in range(10)])
        table = load_embeddings(path, max_vocab=4)
        assert list(table.vocabulary) == ["t0", "t1", "t2", "t3"]

    def test_non_finite_rejected(self, tmp_path):
        path = write_vec(tmp_path / "v.vec", [("a", ["nan", "1.0"])])
        with pytest.raises(ValidationError, match="non-finite"):
            load_embeddings(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "v.vec"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ValidationError, match="no vectors"):
            load_embeddings(path)


class TestTokenizer:
    def test_punctuation_split(self):
        assert tokenize("Wir wollen keine Russen hier!") == ["wir", "wollen", "keine", "russen", "hier", "!"]

    def test_empty(self):
        assert tokenize("") == []

    def test_mention_preserved(self):
        assert tokenize("@user Danke!") == ["@user", "danke", "!"]

    def test_hashtag_and_url_preserved(self):
        assert tokenize("#Merkel liest https://example.org/x?y=1 heute") == [
            "#merkel",
            "liest",
            "https://example.org/x?y=1",
            "heute",
        ]

    def test_deterministic_and_lowercased(self):
        text = "MiXeD Case, punct."
        assert tokenize(text) == tokenize(text)
        assert tokenize(text) == ["mixed", "case", ",", "punct", "."]


@pytest.fixture(scope="module")
def table():
    return table_from_tokens(["alpha", "beta", "gamma"], dim=4)


class TestEncode:
    def test_pad_fill(self, table):
        enc = encode(["alpha", "beta", "gamma"], table, max_len=5)
        assert enc.true_length == 3
        assert enc.indices.tolist()[:3] == [table.vocabulary[t] for t in ("alpha", "beta", "gamma")]
        assert enc.indices.tolist()[3:] == [PAD_INDEX, PAD_INDEX]

    def test_oov_maps_to_unk(self, table):
        enc = encode(["alpha", "zzz"], table, max_len=4)
        assert enc.indices[1] == UNK_INDEX

    def test_truncation(self, table):
        enc = encode(["alpha"] * 80, table, max_len=64)
        assert enc.true_length == 64
        assert len(enc.indices) == 64

    def test_roundtrip_in_vocab_tokens(self, table):
        tokens = ["beta", "gamma", "alpha"]
        enc = encode(tokens, table, max_len=3)
        assert table.decode(enc.indices) == tokens

    def test_max_len_validation(self, table):
        with pytest.raises(ValidationError):
            encode(["alpha"], table, max_len=0)

    def test_encode_texts_batch(self, table):
        X, L = encode_texts(["alpha beta", "", "gamma zzz gamma"], table, max_len=4)
        assert X.shape == (3, 4)
        assert L.tolist() == [2, 0, 3]
        assert X[1].tolist() == [PAD_INDEX] * 4


class TestAlignedEmbeddings:
    def test_dimension_mismatch_rejected(self):
        a = table_from_tokens(["x"], dim=4)
        b = table_from_tokens(["y"], dim=5)
        with pytest.raises(ValidationError, match="differ"):
            AlignedEmbeddings({"en": a, "de": b})

    def test_table_resolution(self):
        a = table_from_tokens(["x"], dim=4)
        b = table_from_tokens(["y"], dim=4, seed=1)
        space = AlignedEmbeddings({"en": a, "de": b})
        assert space.dimension == 4
        assert space.table_for("de") is b
        with pytest.raises(ValidationError, match="no embedding table"):
            space.table_for("fr")
        with pytest.raises(ValidationError, match="language tag"):
            space.table_for(None)

    def test_single_table_used_for_untagged_data(self):
        a = table_from_tokens(["x"], dim=4)
        space = AlignedEmbeddings({"xx": a})
        assert space.table_for(None) is a

    def test_fingerprints_change_with_content(self):
        a = table_from_tokens(["x"], dim=4, seed=0)
        b = table_from_tokens(["x"], dim=4, seed=9)
        assert a.fingerprint() != b.fingerprint()
        assert a.fingerprint() == table_from_tokens(["x"], dim=4, seed=0).fingerprint()
