import numpy as np
import pytest

from conftest import toy_dataset
from crosshate.errors import ValidationError
from crosshate.models import TrainingHyperparams, TransformerConfig, fine_tune, load_model, predict, train
from crosshate.transformer import TransformerClassifier, build_transformer_classifier


@pytest.fixture(scope="module")
def built(tiny_checkpoint):
    cfg = TransformerConfig(model_identifier=tiny_checkpoint, dropout=0.1, max_subword_len=32)
    return build_transformer_classifier(cfg, seed=1)


def hp(**kw):
    base = dict(learning_rate=1e-3, batch_size=8, epochs=2, seed=0)
    base.update(kw)
    return TrainingHyperparams(**base)


class TestBuild:
    def test_predicts_target_language_without_vector_tables(self, built):
        """German-side input yields a probability pair with no aligned
        word-vector file anywhere in the loop."""
        data = toy_dataset(3, 3, seed=1, language="de")
        preds = predict(built, data)
        assert len(preds) == len(data)
        for p in preds:
            assert p.probs is not None
            assert abs(sum(p.probs) - 1.0) < 1e-6

    def test_head_parameter_count(self, built):
        hidden = built.model.config.hidden_size
        assert built.head_parameter_count == hidden * 2 + 2

    def test_missing_checkpoint_rejected(self):
        cfg = TransformerConfig(model_identifier="/nonexistent/checkpoint-dir")
        with pytest.raises(ValidationError, match="not reachable"):
            build_transformer_classifier(cfg)

    def test_monolingual_checkpoint_rejected(self, tmp_path):
        """A checkpoint whose vocabulary covers only one pipeline language
        fails the coverage probe."""
        import torch
        from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

        from crosshate.transformer import COVERAGE_PROBES

        words = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + COVERAGE_PROBES["en"].split()
        tok = BertTokenizer(vocab={w: i for i, w in enumerate(words)}, do_lower_case=True, strip_accents=False)
        config = BertConfig(
            vocab_size=len(words), hidden_size=16, num_hidden_layers=1, num_attention_heads=2,
            intermediate_size=32, max_position_embeddings=32, num_labels=2,
        )
        torch.manual_seed(0)
        BertForSequenceClassification(config).save_pretrained(tmp_path / "mono")
        tok.save_pretrained(tmp_path / "mono")
        cfg = TransformerConfig(model_identifier=str(tmp_path / "mono"))
        with pytest.raises(ValidationError, match="multilingual"):
            build_transformer_classifier(cfg)

    def test_dropout_applied_to_config(self, tiny_checkpoint):
        cfg = TransformerConfig(model_identifier=tiny_checkpoint, dropout=0.37, max_subword_len=32)
        model = build_transformer_classifier(cfg, seed=0)
        assert model.model.config.hidden_dropout_prob == 0.37


class TestTraining:
    def test_zero_epochs_leaves_predictions_unchanged(self, built):
        data = toy_dataset(6, 6, seed=2, language="xx")
        dev = toy_dataset(2, 2, seed=3, language="xx")
        trained = train(built, data, hp(epochs=0), dev)
        assert [p.probs for p in predict(trained, data)] == [p.probs for p in predict(built, data)]

    def test_seed_deterministic_training(self, built):
        data = toy_dataset(8, 8, seed=4)
        dev = toy_dataset(3, 3, seed=5)
        a = train(built, data, hp(seed=9, dropout=0.2), dev)
        b = train(built, data, hp(seed=9, dropout=0.2), dev)
        pa = [p.probs for p in predict(a, data)]
        pb = [p.probs for p in predict(b, data)]
        assert pa == pb

    def test_class_weights_marked_ignored(self, built):
        data = toy_dataset(6, 6, seed=6)
        dev = toy_dataset(2, 2, seed=7)
        trained = train(built, data, hp(class_weight_no_hate=0.01, class_weight_hate=0.99, epochs=1), dev)
        assert trained.provenance["class_weights_ignored"] is True

    def test_memorizes_tiny_balanced_set(self, built):
        data = toy_dataset(16, 16, seed=8, name="toy-32")
        dev = toy_dataset(4, 4, seed=9)
        trained = train(built, data, hp(epochs=15, learning_rate=2e-3), dev)
        preds = predict(trained, data)
        accuracy = np.mean([p.label is e.label for e, p in zip(data, preds)])
        assert accuracy >= 0.95

    def test_fine_tune_chains_provenance(self, built):
        data = toy_dataset(6, 6, seed=10)
        dev = toy_dataset(2, 2, seed=11)
        trained = train(built, data, hp(epochs=1), dev)
        tuned = fine_tune(trained, data, hp(epochs=1))
        assert tuned.provenance["stage"] == "fine-tune"
        assert len(tuned.provenance["lineage"]) == 2


class TestSerialization:
    def test_roundtrip_identical_logits(self, built, tmp_path):
        data = toy_dataset(5, 5, seed=12)
        before = [p.probs for p in predict(built, data)]
        built.save(tmp_path / "ck")
        loaded = load_model(tmp_path / "ck")
        assert isinstance(loaded, TransformerClassifier)
        after = [p.probs for p in predict(loaded, data)]
        assert before == after
