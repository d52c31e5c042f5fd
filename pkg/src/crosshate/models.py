"""The classifier architectures and their training/prediction contracts.

Two vector-based models run on the aligned cross-lingual tables with a
frozen embedding lookup:

* ``cnn`` — parallel valid convolutions over the embedded sequence, ReLU,
  masked global max-pool per filter, concatenate, dropout, softmax layer
  (optionally through one hidden dense layer);
* ``bilstm`` — a bidirectional recurrent layer (``recurrent_units`` per
  direction), three convolutions over its output sequence, masked max-pool,
  concatenate, dropout, hidden dense layer, softmax layer.

The third architecture (``transformer``) wraps an external pretrained
multilingual encoder and lives in :mod:`crosshate.transformer`; it shares
the train/fine-tune/predict contract defined here.

Training minimizes class-weighted cross-entropy (per-example loss scaled by
the weight of its gold class, normalized by the batch weight sum) with Adam,
epoch-shuffled mini-batches seeded by the hyperparameters, and returns the
parameter state of the best dev-macro-F1 epoch.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import LABEL_INDEX, LABELS, Dataset, Label
from .embeddings import AlignedEmbeddings, DEFAULT_MAX_LEN, encode, tokenize
from .errors import ValidationError
from .evaluation import confusion, metrics
from .nn import (
    Adam,
    check_finite,
    conv_pool_backward,
    conv_pool_forward,
    dense_backward,
    dense_forward,
    dropout_mask,
    glorot_uniform,
    lstm_layer_backward,
    lstm_layer_forward,
    reverse_within_lengths,
    single_thread_blas,
    softmax,
    weighted_softmax_cross_entropy,
)


@dataclass(frozen=True)
class CNNConfig:
    filter_sizes: tuple[int, ...] = (3, 4, 5)
    filters_per_size: int = 100
    dense_units: int = 0  # 0: pooled features feed the softmax layer directly
    dropout: float = 0.5
    freeze_embeddings: bool = True

    def __post_init__(self):
        if not self.filter_sizes:
            raise ValidationError("filter_sizes must not be empty")
        if not self.freeze_embeddings:
            raise ValidationError("embedding updates are not supported; embeddings stay frozen")


@dataclass(frozen=True)
class BiLSTMConfig:
    recurrent_units: int = 100
    conv_feature_maps: int = 200
    kernel_sizes: tuple[int, ...] = (3, 4, 5)
    dense_units: int = 100
    dropout: float = 0.5

    def __post_init__(self):
        if not self.kernel_sizes:
            raise ValidationError("kernel_sizes must not be empty")


@dataclass(frozen=True)
class TransformerConfig:
    model_identifier: str
    dropout: float = 0.1
    max_subword_len: int = 128


@dataclass(frozen=True)
class TrainingHyperparams:
    class_weight_no_hate: float = 1.0
    class_weight_hate: float = 1.0
    dropout: float = 0.0
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.class_weight_no_hate < 0 or self.class_weight_hate < 0:
            raise ValidationError("class weights must be non-negative")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValidationError(f"dropout must be in [0, 1], got {self.dropout}")
        if self.learning_rate <= 0:
            raise ValidationError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValidationError("batch size must be >= 1")
        if self.epochs < 0:
            raise ValidationError("epoch count must be >= 0")


@dataclass(frozen=True)
class Prediction:
    """Per-example model output; ``error`` is set instead of label/probs when
    an example could not be processed (the batch continues)."""

    label: Label | None
    probs: tuple[float, float] | None  # (p_noHate, p_Hate)
    error: str | None = None


def _require_labeled(dataset: Dataset) -> np.ndarray:
    targets = np.empty(len(dataset), dtype=np.int64)
    for i, ex in enumerate(dataset):
        if ex.label is None:
            raise ValidationError(f"example {ex.id!r} is unlabeled; training data must be fully labeled")
        targets[i] = LABEL_INDEX[ex.label]
    return targets


class VectorClassifier:
    """Shared machinery for the two embedding-table architectures."""

    arch = ""

    def __init__(self, cfg, embeddings: AlignedEmbeddings, max_len: int,
                 params: dict[str, np.ndarray], provenance: dict):
        self.cfg = cfg
        self.embeddings = embeddings
        self.max_len = max_len
        self.params = params
        self.provenance = provenance

    # subclasses provide _init_params / _forward / _backward

    def copy(self) -> "VectorClassifier":
        return type(self)(
            cfg=self.cfg,
            embeddings=self.embeddings,
            max_len=self.max_len,
            params={k: v.copy() for k, v in self.params.items()},
            provenance=dict(self.provenance),
        )

    def loss_and_grads(self, E, lengths, targets, sample_weights, drop_rate, rng):
        logits, cache = self._forward(E, lengths, drop_rate, rng)
        loss, dlogits = weighted_softmax_cross_entropy(logits, targets, sample_weights)
        grads = self._backward(dlogits, cache)
        return loss, grads

    def predict_proba(self, indices: np.ndarray, lengths: np.ndarray, table) -> np.ndarray:
        E = table.matrix[indices]
        logits, _ = self._forward(E, lengths, 0.0, None)
        return softmax(logits)

    def predict_dataset(self, dataset: Dataset, batch_size: int = 256) -> list[Prediction]:
        table = self.embeddings.table_for(dataset.language)
        encoded: list[tuple[int, np.ndarray, int]] = []
        out: list[Prediction | None] = [None] * len(dataset)
        for i, ex in enumerate(dataset):
            try:
                enc = encode(tokenize(ex.text), table, self.max_len)
            except Exception as exc:  # per-example failure, batch continues
                out[i] = Prediction(label=None, probs=None, error=f"{type(exc).__name__}: {exc}")
                continue
            encoded.append((i, enc.indices, enc.true_length))
        with single_thread_blas():
            for start in range(0, len(encoded), batch_size):
                chunk = encoded[start : start + batch_size]
                X = np.stack([c[1] for c in chunk])
                L = np.array([c[2] for c in chunk], dtype=np.int64)
                probs = self.predict_proba(X, L, table)
                for (i, _, _), p in zip(chunk, probs):
                    label = LABELS[int(np.argmax(p))]
                    out[i] = Prediction(label=label, probs=(float(p[0]), float(p[1])))
        return out  # type: ignore[return-value]

    def _fit(self, data: Dataset, hp: TrainingHyperparams, dev: Dataset | None, stage: str):
        targets = _require_labeled(data)
        table = self.embeddings.table_for(data.language)
        model = self.copy()

        n = len(data)
        X = np.zeros((n, self.max_len), dtype=np.int64)
        L = np.zeros(n, dtype=np.int64)
        for i, ex in enumerate(data):
            enc = encode(tokenize(ex.text), table, self.max_len)
            X[i] = enc.indices
            L[i] = enc.true_length

        rng = np.random.default_rng(hp.seed)
        optimizer = Adam(model.params, lr=hp.learning_rate)
        class_weights = np.array([hp.class_weight_no_hate, hp.class_weight_hate])

        best_params = None
        best_score = -1.0
        best_epoch = -1
        dev_history: list[float] = []
        with single_thread_blas():
            for epoch in range(hp.epochs):
                perm = rng.permutation(n)
                for batch_no, start in enumerate(range(0, n, hp.batch_size)):
                    idx = perm[start : start + hp.batch_size]
                    E = table.matrix[X[idx]]
                    weights = class_weights[targets[idx]]
                    loss, grads = model.loss_and_grads(E, L[idx], targets[idx], weights, hp.dropout, rng)
                    check_finite(loss, epoch, batch_no)
                    optimizer.step(grads)
                if dev is not None and len(dev) > 0:
                    score = _dev_macro_f1(model, dev)
                    dev_history.append(score)
                    if score > best_score:
                        best_score = score
                        best_epoch = epoch
                        best_params = {k: v.copy() for k, v in model.params.items()}

        if best_params is not None:
            model.params = best_params

        model.provenance = _fit_provenance(self, stage, data, hp, best_epoch, best_score, dev_history)
        return model

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        manifest = {
            "architecture": self.arch,
            "config": _config_to_json(self.cfg),
            "max_len": self.max_len,
            "provenance": self.provenance,
            "embedding_fingerprints": self.embeddings.fingerprints(),
        }
        with open(path / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        np.savez(path / "params.npz", **self.params)


def _dev_macro_f1(model, dev: Dataset) -> float:
    gold = [ex.label for ex in dev]
    preds = [p.label for p in model.predict_dataset(dev)]
    pairs = [(g, p) for g, p in zip(gold, preds) if g is not None and p is not None]
    if not pairs:
        return 0.0
    report = metrics(confusion([g for g, _ in pairs], [p for _, p in pairs]))
    return report.macro.f1


def _fit_provenance(model, stage, data, hp, best_epoch, best_score, dev_history) -> dict:
    counts = data.class_counts()
    lineage = list(model.provenance.get("lineage", []))
    lineage.append(f"{stage}:{data.name}")
    return {
        "architecture": model.arch,
        "stage": stage,
        "dataset": data.name,
        "dataset_counts": {"noHate": counts.no_hate, "Hate": counts.hate},
        "hyperparams": asdict(hp),
        "seed": hp.seed,
        "best_epoch": best_epoch,
        "dev_macro_f1": best_score if best_score >= 0 else None,
        "dev_history": dev_history,
        "lineage": lineage,
    }


def _config_to_json(cfg) -> dict:
    out = {}
    for key, value in asdict(cfg).items():
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


class CNNClassifier(VectorClassifier):
    arch = "cnn"

    def _init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        D = self.embeddings.dimension
        F = self.cfg.filters_per_size
        params: dict[str, np.ndarray] = {}
        for k in self.cfg.filter_sizes:
            params[f"conv{k}_W"] = glorot_uniform(rng, k * D, F)
            params[f"conv{k}_b"] = np.zeros(F)
        feat = F * len(self.cfg.filter_sizes)
        head_in = feat
        if self.cfg.dense_units > 0:
            params["dense_W"] = glorot_uniform(rng, feat, self.cfg.dense_units)
            params["dense_b"] = np.zeros(self.cfg.dense_units)
            head_in = self.cfg.dense_units
        params["out_W"] = glorot_uniform(rng, head_in, 2)
        params["out_b"] = np.zeros(2)
        return params

    def _forward(self, E, lengths, drop_rate, rng):
        pooled = []
        conv_caches = []
        for k in self.cfg.filter_sizes:
            p, cache = conv_pool_forward(E, lengths, self.params[f"conv{k}_W"], self.params[f"conv{k}_b"], k)
            pooled.append(p)
            conv_caches.append(cache)
        feat = np.concatenate(pooled, axis=1)
        mask = dropout_mask(rng, feat.shape, drop_rate) if rng is not None else None
        dropped = feat * mask if mask is not None else feat
        hidden_z = None
        head_in = dropped
        if self.cfg.dense_units > 0:
            hidden_z = dense_forward(dropped, self.params["dense_W"], self.params["dense_b"])
            head_in = np.maximum(hidden_z, 0.0)
        logits = dense_forward(head_in, self.params["out_W"], self.params["out_b"])
        return logits, (conv_caches, dropped, mask, hidden_z, head_in)

    def _backward(self, dlogits, cache):
        conv_caches, dropped, mask, hidden_z, head_in = cache
        grads: dict[str, np.ndarray] = {}
        dhead_in, grads["out_W"], grads["out_b"] = dense_backward(head_in, self.params["out_W"], dlogits)
        if self.cfg.dense_units > 0:
            dz = dhead_in * (hidden_z > 0.0)
            ddropped, grads["dense_W"], grads["dense_b"] = dense_backward(dropped, self.params["dense_W"], dz)
        else:
            ddropped = dhead_in
        dfeat = ddropped * mask if mask is not None else ddropped
        F = self.cfg.filters_per_size
        for pos, k in enumerate(self.cfg.filter_sizes):
            chunk = dfeat[:, pos * F : (pos + 1) * F]
            dW, db, _ = conv_pool_backward(chunk, self.params[f"conv{k}_W"], conv_caches[pos], need_dx=False)
            grads[f"conv{k}_W"] = dW
            grads[f"conv{k}_b"] = db
        return grads


class BiLSTMClassifier(VectorClassifier):
    arch = "bilstm"

    def _init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        D = self.embeddings.dimension
        H = self.cfg.recurrent_units
        F = self.cfg.conv_feature_maps
        params: dict[str, np.ndarray] = {}
        for direction in ("fwd", "bwd"):
            params[f"{direction}_W"] = glorot_uniform(rng, D, 4 * H)
            params[f"{direction}_U"] = glorot_uniform(rng, H, 4 * H)
            bias = np.zeros(4 * H)
            bias[H : 2 * H] = 1.0  # forget-gate bias
            params[f"{direction}_b"] = bias
        for k in self.cfg.kernel_sizes:
            params[f"conv{k}_W"] = glorot_uniform(rng, k * 2 * H, F)
            params[f"conv{k}_b"] = np.zeros(F)
        feat = F * len(self.cfg.kernel_sizes)
        params["dense_W"] = glorot_uniform(rng, feat, self.cfg.dense_units)
        params["dense_b"] = np.zeros(self.cfg.dense_units)
        params["out_W"] = glorot_uniform(rng, self.cfg.dense_units, 2)
        params["out_b"] = np.zeros(2)
        return params

    def _forward(self, E, lengths, drop_rate, rng):
        p = self.params
        h_fwd, cache_fwd = lstm_layer_forward(E, lengths, p["fwd_W"], p["fwd_U"], p["fwd_b"])
        E_rev = np.ascontiguousarray(reverse_within_lengths(E, lengths))
        h_bwd_rev, cache_bwd = lstm_layer_forward(E_rev, lengths, p["bwd_W"], p["bwd_U"], p["bwd_b"])
        h_bwd = reverse_within_lengths(h_bwd_rev, lengths)
        states = np.ascontiguousarray(np.concatenate([h_fwd, h_bwd], axis=2))

        pooled = []
        conv_caches = []
        for k in self.cfg.kernel_sizes:
            pk, cache = conv_pool_forward(states, lengths, p[f"conv{k}_W"], p[f"conv{k}_b"], k)
            pooled.append(pk)
            conv_caches.append(cache)
        feat = np.concatenate(pooled, axis=1)
        mask = dropout_mask(rng, feat.shape, drop_rate) if rng is not None else None
        dropped = feat * mask if mask is not None else feat
        hidden_z = dense_forward(dropped, p["dense_W"], p["dense_b"])
        hidden = np.maximum(hidden_z, 0.0)
        logits = dense_forward(hidden, p["out_W"], p["out_b"])
        cache = (cache_fwd, cache_bwd, lengths, conv_caches, dropped, mask, hidden_z, hidden)
        return logits, cache

    def _backward(self, dlogits, cache):
        cache_fwd, cache_bwd, lengths, conv_caches, dropped, mask, hidden_z, hidden = cache
        p = self.params
        grads: dict[str, np.ndarray] = {}
        dhidden, grads["out_W"], grads["out_b"] = dense_backward(hidden, p["out_W"], dlogits)
        dz = dhidden * (hidden_z > 0.0)
        ddropped, grads["dense_W"], grads["dense_b"] = dense_backward(dropped, p["dense_W"], dz)
        dfeat = ddropped * mask if mask is not None else ddropped

        F = self.cfg.conv_feature_maps
        dstates = None
        for pos, k in enumerate(self.cfg.kernel_sizes):
            chunk = dfeat[:, pos * F : (pos + 1) * F]
            dW, db, dx = conv_pool_backward(chunk, p[f"conv{k}_W"], conv_caches[pos], need_dx=True)
            grads[f"conv{k}_W"] = dW
            grads[f"conv{k}_b"] = db
            dstates = dx if dstates is None else dstates + dx

        H = self.cfg.recurrent_units
        dh_fwd = np.ascontiguousarray(dstates[:, :, :H])
        dh_bwd = dstates[:, :, H:]
        dh_bwd_rev = np.ascontiguousarray(reverse_within_lengths(dh_bwd, lengths))
        for direction, dh, lstm_cache in (
            ("fwd", dh_fwd, cache_fwd),
            ("bwd", dh_bwd_rev, cache_bwd),
        ):
            dW, dU, db, _ = lstm_layer_backward(dh, lstm_cache, need_dx=False)
            grads[f"{direction}_W"] = dW
            grads[f"{direction}_U"] = dU
            grads[f"{direction}_b"] = db
        return grads


_VECTOR_CLASSES = {"cnn": CNNClassifier, "bilstm": BiLSTMClassifier}


def _check_filter_fit(sizes, max_len: int) -> None:
    too_big = [k for k in sizes if k > max_len]
    if too_big:
        raise ValidationError(f"filter sizes {too_big} exceed max_len={max_len}")


def build_cnn(cfg: CNNConfig, embeddings: AlignedEmbeddings,
              max_len: int = DEFAULT_MAX_LEN, seed: int = 0) -> CNNClassifier:
    """Untrained CNN over the aligned space; identical seeds give identical
    initial parameters."""
    _check_filter_fit(cfg.filter_sizes, max_len)
    model = CNNClassifier(cfg, embeddings, max_len, params={}, provenance={"architecture": "cnn", "stage": "built", "seed": seed})
    model.params = model._init_params(np.random.default_rng(seed))
    return model


def build_bilstm_cnn(cfg: BiLSTMConfig, embeddings: AlignedEmbeddings,
                     max_len: int = DEFAULT_MAX_LEN, seed: int = 0) -> BiLSTMClassifier:
    """Untrained BiLSTM-CNN over the aligned space."""
    _check_filter_fit(cfg.kernel_sizes, max_len)
    model = BiLSTMClassifier(cfg, embeddings, max_len, params={}, provenance={"architecture": "bilstm", "stage": "built", "seed": seed})
    model.params = model._init_params(np.random.default_rng(seed))
    return model


def train(model, data: Dataset, hp: TrainingHyperparams, dev: Dataset):
    """Train from the model's current state; returns a new model holding the
    parameters of the best dev-macro-F1 epoch (the input model is untouched)."""
    if dev is None or len(dev) == 0:
        raise ValidationError("training requires a non-empty dev set for epoch selection")
    return model._fit(data, hp, dev, stage="train")


def fine_tune(model, data: Dataset, hp: TrainingHyperparams, dev: Dataset | None = None):
    """Resume training from a trained model's parameter state.

    Without a dev set the final-epoch parameters are returned; with one,
    epoch selection works exactly as in :func:`train`.
    """
    stage = model.provenance.get("stage")
    if stage not in ("train", "fine-tune"):
        raise ValidationError("fine_tune expects an already-trained model")
    return model._fit(data, hp, dev, stage="fine-tune")


def predict(model, data: Dataset) -> list[Prediction]:
    """Deterministic inference (dropout disabled); output order matches input."""
    return model.predict_dataset(data)


def save_model(model, path: str | Path) -> None:
    model.save(path)


def load_model(path: str | Path, embeddings: AlignedEmbeddings | None = None):
    """Reload a checkpoint directory. Vector models need the same aligned
    tables they were built with (verified by fingerprint)."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"no manifest.json under {path}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    arch = manifest.get("architecture")
    if arch == "transformer":
        from . import transformer

        return transformer.TransformerClassifier.load(path)
    if arch not in _VECTOR_CLASSES:
        raise ValidationError(f"unknown architecture {arch!r} in {manifest_path}")
    if embeddings is None:
        raise ValidationError(f"loading a {arch} checkpoint requires the aligned embedding tables")
    expected = manifest.get("embedding_fingerprints", {})
    actual = embeddings.fingerprints()
    for lang, fp in expected.items():
        if actual.get(lang) != fp:
            raise ValidationError(
                f"embedding table for {lang!r} does not match the one this checkpoint was trained with"
            )
    cfg_dict = dict(manifest["config"])
    for key, value in cfg_dict.items():
        if isinstance(value, list):
            cfg_dict[key] = tuple(value)
    cfg = (CNNConfig if arch == "cnn" else BiLSTMConfig)(**cfg_dict)
    with np.load(path / "params.npz") as npz:
        params = {k: npz[k].copy() for k in npz.files}
    cls = _VECTOR_CLASSES[arch]
    return cls(cfg, embeddings, manifest["max_len"], params, manifest["provenance"])
