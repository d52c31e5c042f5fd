"""Multilingual transformer classifier behind a thin adapter boundary.

Wraps a pretrained multilingual encoder checkpoint consumed in its
ecosystem's standard on-disk layout (config + weights + subword tokenizer)
with a fresh 2-way classification head. No aligned word-vector tables are
involved: the checkpoint's own subword tokenizer replaces that pipeline.
Class weights are not implemented for this architecture; they are treated
as (1, 1) and the fact is recorded in the training provenance.

torch/transformers are imported lazily so the vector-model pipeline works
without them.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import LABELS, Dataset
from .errors import TrainingDivergedError, ValidationError
from .models import (
    Prediction,
    TrainingHyperparams,
    TransformerConfig,
    _dev_macro_f1,
    _fit_provenance,
    _require_labeled,
)

# One sentence per pipeline language; a checkpoint that maps too much of
# either to UNK cannot cover both languages.
COVERAGE_PROBES = {
    "en": "we do not want these people here",
    "de": "wir wollen diese leute hier nicht",
}
MAX_UNK_FRACTION = 0.5


def _torch():
    try:
        import torch
    except ImportError as exc:
        raise ValidationError("the transformer architecture requires torch to be installed") from exc
    return torch


class TransformerClassifier:
    arch = "transformer"

    def __init__(self, cfg: TransformerConfig, model, tokenizer, provenance: dict):
        self.cfg = cfg
        self.model = model
        self.tokenizer = tokenizer
        self.provenance = provenance

    @property
    def head_parameter_count(self) -> int:
        return sum(p.numel() for p in self.model.classifier.parameters())

    def copy(self) -> "TransformerClassifier":
        import copy as _copy

        return TransformerClassifier(self.cfg, _copy.deepcopy(self.model), self.tokenizer, dict(self.provenance))

    def _encode(self, texts: list[str]):
        return self.tokenizer(
            texts,
            padding=True,
            truncation=True,
            max_length=self.cfg.max_subword_len,
            return_tensors="pt",
        )

    def predict_proba_texts(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        torch = _torch()
        self.model.eval()
        chunks = []
        with torch.no_grad():
            for start in range(0, len(texts), batch_size):
                enc = self._encode(texts[start : start + batch_size])
                logits = self.model(**enc).logits
                chunks.append(torch.softmax(logits, dim=1).numpy())
        return np.concatenate(chunks) if chunks else np.zeros((0, 2))

    def predict_dataset(self, dataset: Dataset, batch_size: int = 32) -> list[Prediction]:
        out: list[Prediction] = []
        probs = self.predict_proba_texts([ex.text for ex in dataset], batch_size)
        for p in probs:
            label = LABELS[int(np.argmax(p))]
            out.append(Prediction(label=label, probs=(float(p[0]), float(p[1]))))
        return out

    def _fit(self, data: Dataset, hp: TrainingHyperparams, dev: Dataset | None, stage: str):
        torch = _torch()
        targets_np = _require_labeled(data)
        model = self.copy()
        if hp.epochs == 0 or len(data) == 0:
            model.provenance = _transformer_provenance(self, stage, data, hp, -1, -1.0, [])
            return model

        torch.manual_seed(hp.seed)
        net = model.model
        for module in net.modules():
            if isinstance(module, torch.nn.Dropout):
                module.p = hp.dropout
        optimizer = torch.optim.Adam(net.parameters(), lr=hp.learning_rate)
        rng = np.random.default_rng(hp.seed)
        texts = [ex.text for ex in data]
        targets = torch.from_numpy(targets_np)

        best_state = None
        best_score = -1.0
        best_epoch = -1
        dev_history: list[float] = []
        n = len(data)
        for epoch in range(hp.epochs):
            net.train()
            perm = rng.permutation(n)
            for batch_no, start in enumerate(range(0, n, hp.batch_size)):
                idx = perm[start : start + hp.batch_size]
                enc = self._encode([texts[i] for i in idx])
                logits = net(**enc).logits
                # class weights are not implemented for this architecture
                loss = torch.nn.functional.cross_entropy(logits, targets[idx])
                if not torch.isfinite(loss):
                    raise TrainingDivergedError(
                        f"non-finite transformer loss at epoch {epoch}, batch {batch_no}",
                        epoch=epoch,
                        batch=batch_no,
                    )
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            if dev is not None and len(dev) > 0:
                score = _dev_macro_f1(model, dev)
                dev_history.append(score)
                if score > best_score:
                    best_score = score
                    best_epoch = epoch
                    best_state = {k: v.detach().clone() for k, v in net.state_dict().items()}

        if best_state is not None:
            net.load_state_dict(best_state)
        net.eval()
        model.provenance = _transformer_provenance(self, stage, data, hp, best_epoch, best_score, dev_history)
        return model

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        manifest = {
            "architecture": self.arch,
            "config": asdict(self.cfg),
            "provenance": self.provenance,
        }
        with open(path / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.model.save_pretrained(path / "checkpoint")
        self.tokenizer.save_pretrained(path / "checkpoint")

    @classmethod
    def load(cls, path: str | Path) -> "TransformerClassifier":
        _torch()
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        path = Path(path)
        with open(path / "manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
        cfg = TransformerConfig(**manifest["config"])
        model = AutoModelForSequenceClassification.from_pretrained(path / "checkpoint")
        model.eval()
        tokenizer = AutoTokenizer.from_pretrained(path / "checkpoint")
        return cls(cfg, model, tokenizer, manifest["provenance"])


def _transformer_provenance(model, stage, data, hp, best_epoch, best_score, dev_history) -> dict:
    prov = _fit_provenance(model, stage, data, hp, best_epoch, best_score, dev_history)
    prov["class_weights_ignored"] = True
    return prov


def _check_multilingual_coverage(tokenizer, identifier: str) -> None:
    unk_id = tokenizer.unk_token_id
    if unk_id is None:  # byte-fallback vocabularies cover everything
        return
    special = set(tokenizer.all_special_ids)
    for lang, probe in COVERAGE_PROBES.items():
        ids = [i for i in tokenizer(probe)["input_ids"] if i not in special or i == unk_id]
        if not ids:
            continue
        unk_fraction = sum(1 for i in ids if i == unk_id) / len(ids)
        if unk_fraction > MAX_UNK_FRACTION:
            raise ValidationError(
                f"checkpoint {identifier!r} does not look multilingual: "
                f"{unk_fraction:.0%} of a {lang!r} probe sentence maps to UNK"
            )


def build_transformer_classifier(cfg: TransformerConfig, seed: int = 0) -> TransformerClassifier:
    """Pretrained multilingual encoder + fresh 2-way head (untrained).

    The checkpoint must be reachable on disk (or via a configured model
    registry) and must cover both pipeline languages; otherwise it is
    rejected.
    """
    torch = _torch()
    from transformers import AutoConfig, AutoModelForSequenceClassification, AutoTokenizer

    identifier = cfg.model_identifier
    try:
        hf_config = AutoConfig.from_pretrained(identifier, num_labels=2)
        tokenizer = AutoTokenizer.from_pretrained(identifier)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"transformer checkpoint not reachable: {identifier!r} ({exc})") from None

    for attr in ("hidden_dropout_prob", "attention_probs_dropout_prob", "classifier_dropout"):
        if hasattr(hf_config, attr):
            setattr(hf_config, attr, cfg.dropout)

    _check_multilingual_coverage(tokenizer, identifier)

    torch.manual_seed(seed)  # fresh-head initialization
    model = AutoModelForSequenceClassification.from_pretrained(identifier, config=hf_config)
    model.eval()
    provenance = {"architecture": "transformer", "stage": "built", "seed": seed, "checkpoint": str(identifier)}
    return TransformerClassifier(cfg, model, tokenizer, provenance)
