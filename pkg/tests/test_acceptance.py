"""Acceptance gate: one test per criterion, each printing a PASS line.

Criteria 1-7 and 10 are exact or tolerance-pinned checks on synthetic
inputs carrying the published counts. Criteria 8 and 9 are the stochastic
transfer properties; they train real models on the generated bilingual
world at desk scale (a few minutes on CPU) and assert the qualitative
pattern, not exact scores. Run with ``pytest tests/test_acceptance.py -v``.
"""

import itertools
import json
import time

import numpy as np
import pytest

from conftest import toy_dataset, toy_space, write_official_german_files
from crosshate.bootstrap import Ensemble, ensemble_label, majority
from crosshate.cli import main as cli_main
from crosshate.data import Example, Label, make_dataset, read_tsv, write_tsv
from crosshate.embeddings import AlignedEmbeddings, load_embeddings
from crosshate.evaluation import ConfusionMatrix, confusion, metrics
from crosshate.models import (
    BiLSTMConfig,
    CNNConfig,
    TrainingHyperparams,
    TransformerConfig,
    build_bilstm_cnn,
    build_cnn,
    fine_tune,
    predict,
    train,
)
from crosshate.sampling import SamplingSpec, SamplingMode, resample
from crosshate.synth import SynthParams, generate_world

N, H = Label.NO_HATE, Label.HATE


def record(criterion: int, message: str) -> None:
    print(f"CRITERION {criterion} PASS - {message}")


def labeled_dataset(n_no_hate, n_hate, name):
    examples = [Example(f"n{i}", f"neutral text {i}", N, source=name) for i in range(n_no_hate)]
    examples += [Example(f"h{i}", f"hateful text {i}", H, source=name) for i in range(n_hate)]
    return make_dataset(name, examples)


def eval_model(model, dataset):
    preds = predict(model, dataset)
    pairs = [(e.label, p.label) for e, p in zip(dataset, preds)]
    return metrics(confusion([g for g, _ in pairs], [p for _, p in pairs]))


def test_criterion_01_deterministic_relabel_split(tmp_path):
    """prepare on official-layout files with the published pre-relabeling
    counts yields DE-TRAIN 3345/855, DE-DEV 642/167, DE-TEST 2759/773,
    exactly, in under 5 seconds."""
    write_official_german_files(tmp_path)
    out = tmp_path / "prepared"
    start = time.perf_counter()
    code = cli_main([
        "prepare",
        "--germeval-train", str(tmp_path / "train.tsv"),
        "--germeval-test", str(tmp_path / "test.tsv"),
        "--out", str(out),
    ])
    elapsed = time.perf_counter() - start
    assert code == 0
    got = {
        "DE-TRAIN": tuple(read_tsv(out / "de_train.tsv").class_counts()),
        "DE-DEV": tuple(read_tsv(out / "de_dev.tsv").class_counts()),
        "DE-TEST": tuple(read_tsv(out / "de_test.tsv").class_counts()),
    }
    assert got == {"DE-TRAIN": (3345, 855), "DE-DEV": (642, 167), "DE-TEST": (2759, 773)}
    assert elapsed < 5.0
    record(1, f"DE splits reproduced exactly in {elapsed:.2f}s")


def test_criterion_02_sampling_reproduction(tmp_path):
    """Every published sampled-dataset row reproduced exactly by `sample`."""
    en_path = tmp_path / "en_train.tsv"
    de_path = tmp_path / "de_train.tsv"
    write_tsv(labeled_dataset(9018, 1281, "EN-TRAIN"), en_path)
    write_tsv(labeled_dataset(3345, 855, "DE-TRAIN"), de_path)
    rows = [
        (en_path, "1:1", "oversample", (9018, 9018)),  # EN-OS[1:1]
        (en_path, "2:1", "undersample", (2562, 1281)),  # EN-US[2:1]
        (en_path, "1:1", "undersample", (1281, 1281)),  # EN-US[1:1]
        (de_path, "7:1", "oversample", (5985, 855)),  # DE-OS[7:1]
        (de_path, "2:1", "undersample", (1710, 855)),  # DE-US[2:1]
        (de_path, "1:1", "undersample", (855, 855)),  # DE-US[1:1]
        (de_path, "1:1", "oversample", (3345, 3345)),  # DE-OS[1:1]
    ]
    start = time.perf_counter()
    for i, (src, ratio, mode, expected) in enumerate(rows):
        out = tmp_path / f"row{i}.tsv"
        code = cli_main([
            "sample", "--in", str(src), "--ratio", ratio, "--mode", mode,
            "--seed", "7", "--out", str(out),
        ])
        assert code == 0
        assert tuple(read_tsv(out).class_counts()) == expected, (src.name, ratio, mode)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    record(2, f"all {len(rows)} published rows exact in {elapsed:.2f}s")


def test_criterion_03_metrics_oracle():
    """All-noHate predictor over the DE test distribution reproduces the
    published degenerate row exactly at two decimals."""
    gold = [N] * 2759 + [H] * 773
    pred = [N] * 3532
    report = metrics(confusion(gold, pred))
    r = report.rounded()
    assert r["noHate"] == {"precision": 78.11, "recall": 100.00, "f1": 87.71}
    assert r["Hate"] == {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    assert r["macro"]["f1"] == 43.86
    record(3, "all-noHate row: 78.11 / 100.00 / 87.71, macro-F1 43.86")


def test_criterion_04_confusion_matrix_audit():
    """The published ensemble-audit cell counts reproduce the matrix exactly
    and derive Hate precision 44.74 / recall 5.60."""
    cells = {(N, N): 2688, (N, H): 42, (H, N): 573, (H, H): 34}
    gold, pred = [], []
    for (g, p), count in cells.items():
        gold += [g] * count
        pred += [p] * count
    matrix = confusion(gold, pred)
    assert matrix == ConfusionMatrix(counts=((2688, 42), (573, 34)))
    r = metrics(matrix).rounded()
    assert r["Hate"]["precision"] == 44.74
    assert r["Hate"]["recall"] == 5.60
    record(4, "audit matrix exact; Hate P 44.74, R 5.60")


def test_criterion_05_majority_vote_exhaustive():
    """All 8 three-voter binary patterns resolve to the strict majority; the
    tie branch never executes."""
    for ballot in itertools.product((N, H), repeat=3):
        got = majority(ballot)
        expected = H if sum(v is H for v in ballot) >= 2 else N
        assert got is expected
    record(5, "8/8 vote patterns resolve strictly")


def _gradient_check(model, table, n_samples, rtol=1e-3):
    data = toy_dataset(2, 2, seed=7)
    from crosshate.embeddings import encode_texts

    X, L = encode_texts([e.text for e in data], table, model.max_len)
    y = np.array([0 if e.label is N else 1 for e in data])
    w = np.where(y == 1, 0.9, 0.3)

    def loss_value():
        E = table.matrix[X]
        loss, _ = model.loss_and_grads(E, L, y, w, drop_rate=0.0, rng=None)
        return loss

    E = table.matrix[X]
    _, grads = model.loss_and_grads(E, L, y, w, drop_rate=0.0, rng=None)
    rng = np.random.default_rng(3)
    names = sorted(grads)
    eps = 1e-5
    checked = 0
    while checked < n_samples:
        name = names[int(rng.integers(len(names)))]
        flat = model.params[name].reshape(-1)
        idx = int(rng.integers(flat.size))
        orig = flat[idx]
        flat[idx] = orig + eps
        up = loss_value()
        flat[idx] = orig - eps
        down = loss_value()
        flat[idx] = orig
        numeric = (up - down) / (2 * eps)
        analytic = grads[name].reshape(-1)[idx]
        scale = max(abs(numeric), abs(analytic))
        if scale < 1e-10:
            continue
        assert abs(numeric - analytic) / scale < rtol, f"{name}[{idx}]"
        checked += 1
    return checked


def test_criterion_06_gradient_correctness(tiny_checkpoint):
    """CNN and BiLSTM analytic gradients of the weighted loss match central
    finite differences within 1e-3 relative error on >= 20 sampled
    parameters each; probability pairs sum to 1 within 1e-6 for all three
    architectures."""
    space = toy_space(dim=8)
    table = space.table_for("xx")
    cnn = build_cnn(CNNConfig(), space, max_len=12, seed=5)
    lstm = build_bilstm_cnn(BiLSTMConfig(), space, max_len=12, seed=5)
    checked_cnn = _gradient_check(cnn, table, n_samples=25)
    checked_lstm = _gradient_check(lstm, table, n_samples=25)
    assert checked_cnn >= 20 and checked_lstm >= 20

    probe = toy_dataset(8, 8, seed=9)
    from crosshate.transformer import build_transformer_classifier

    transformer = build_transformer_classifier(
        TransformerConfig(model_identifier=tiny_checkpoint, max_subword_len=32), seed=1
    )
    for model in (cnn, lstm, transformer):
        preds = predict(model, probe)
        for p in preds:
            assert abs(sum(p.probs) - 1.0) < 1e-6
    record(6, f"FD match on {checked_cnn}+{checked_lstm} params; softmax sums within 1e-6")


def test_criterion_07_memorization(tiny_checkpoint):
    """Every architecture reaches >= 95% training accuracy on a 32-example
    balanced toy set (200 epochs budget; transformer 20)."""
    space = toy_space(dim=8)
    data = toy_dataset(16, 16, seed=21, name="toy-32")
    dev = toy_dataset(4, 4, seed=22)
    results = {}

    hp = TrainingHyperparams(learning_rate=1e-2, batch_size=8, epochs=120, seed=3)
    for name, model in (
        ("cnn", build_cnn(CNNConfig(), space, max_len=12, seed=3)),
        ("bilstm", build_bilstm_cnn(BiLSTMConfig(), space, max_len=12, seed=3)),
    ):
        trained = train(model, data, hp, dev)
        preds = predict(trained, data)
        results[name] = float(np.mean([p.label is e.label for e, p in zip(data, preds)]))

    from crosshate.transformer import build_transformer_classifier

    transformer = build_transformer_classifier(
        TransformerConfig(model_identifier=tiny_checkpoint, max_subword_len=32), seed=3
    )
    hp_tr = TrainingHyperparams(learning_rate=2e-3, batch_size=8, epochs=20, seed=3)
    trained = train(transformer, data, hp_tr, dev)
    preds = predict(trained, data)
    results["transformer"] = float(np.mean([p.label is e.label for e, p in zip(data, preds)]))

    assert all(acc >= 0.95 for acc in results.values()), results
    record(7, "training accuracy " + ", ".join(f"{k} {v:.2f}" for k, v in results.items()))


# --- desk-scale transfer criteria (8, 9) -------------------------------------


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    """Full-size bilingual world: published split counts, weakly aligned
    target-language Hate vocabulary, sparse shared hashtags."""
    return generate_world(
        tmp_path_factory.mktemp("acceptance-world"),
        seed=7,
        params=SynthParams(),
        with_checkpoint=True,
    )


@pytest.fixture(scope="module")
def trained_ensemble(world):
    """CNN (full train set), BiLSTM and transformer (documented 2k-example
    subsamples) trained with the published EN-OS[1:1] hyperparameters."""
    space = AlignedEmbeddings({l: load_embeddings(p) for l, p in world.embeddings.items()})
    en_train = read_tsv(world.datasets["en_train"], language="en")
    de_dev = read_tsv(world.datasets["de_dev"], language="de")
    en_os = resample(en_train, SamplingSpec(ratio=(1, 1), mode=SamplingMode.OVERSAMPLE, seed=7))
    assert tuple(en_os.class_counts()) == (9018, 9018)

    hp_cnn = TrainingHyperparams(
        class_weight_no_hate=0.6, class_weight_hate=0.4,
        dropout=0.7, learning_rate=1e-4, batch_size=50, epochs=1, seed=71,
    )
    cnn = train(build_cnn(CNNConfig(), space, max_len=16, seed=71), en_os, hp_cnn, de_dev)

    rng = np.random.default_rng(0)
    sub_idx = rng.permutation(len(en_os))[:2000]
    en_sub = make_dataset("EN-OS-2K", [en_os[int(i)] for i in sub_idx], language="en")
    hp_lstm = TrainingHyperparams(
        class_weight_no_hate=0.5, class_weight_hate=0.5,
        dropout=0.2, learning_rate=3e-3, batch_size=40, epochs=30, seed=72,
    )
    lstm = train(build_bilstm_cnn(BiLSTMConfig(), space, max_len=16, seed=72), en_sub, hp_lstm, de_dev)

    from crosshate.transformer import build_transformer_classifier

    cfg = TransformerConfig(model_identifier=str(world.checkpoint), dropout=0.2, max_subword_len=32)
    hp_tr = TrainingHyperparams(dropout=0.2, learning_rate=1e-5, batch_size=5, epochs=10, seed=73)
    transformer = train(build_transformer_classifier(cfg, seed=73), en_sub, hp_tr, de_dev)
    return space, cnn, lstm, transformer


def test_criterion_08_crosslingual_zero_shot_sanity(world, trained_ensemble):
    """With the published hyperparameters, at least one trained model beats
    the 43.86 all-noHate macro-F1 baseline on the target test set, and the
    transformer's Hate-class F1 is nonzero."""
    _, cnn, lstm, transformer = trained_ensemble
    de_test = read_tsv(world.datasets["de_test"], language="de")
    assert tuple(de_test.class_counts()) == (2759, 773)  # anchors the 43.86 baseline
    reports = {m.arch: eval_model(m, de_test) for m in (cnn, lstm, transformer)}
    macro_f1 = {arch: r.macro.f1 for arch, r in reports.items()}
    assert any(f1 > 43.86 for f1 in macro_f1.values()), macro_f1
    hate_f1 = reports["transformer"].per_class["Hate"].f1
    assert hate_f1 > 0.0
    record(8, "macro-F1 " + ", ".join(f"{a} {v:.2f}" for a, v in macro_f1.items())
           + f" (baseline 43.86); transformer Hate-F1 {hate_f1:.2f}")


def test_criterion_09_bootstrap_skew_and_fine_tune_direction(world, trained_ensemble):
    """The ensemble labeling of the held-back target training set is skewed
    beyond 20:1 noHate:Hate, and fine-tuning the BiLSTM on the bootstrapped
    data raises its target-test Hate recall in at least 2 of 3 seeded runs
    (property-based; exact published deltas are not reproducible)."""
    space, cnn, lstm, transformer = trained_ensemble
    de_train = read_tsv(world.datasets["de_train"], language="de")
    de_dev = read_tsv(world.datasets["de_dev"], language="de")
    de_test = read_tsv(world.datasets["de_test"], language="de")

    boot = ensemble_label(Ensemble(members=(cnn, lstm, transformer)), de_train)
    counts = boot.dataset.class_counts()
    ratio = counts.no_hate / max(1, counts.hate)
    assert ratio > 20.0, f"labeled {counts.no_hate}/{counts.hate}"

    base_recall = eval_model(lstm, de_test).per_class["Hate"].recall
    ups = 0
    deltas = []
    for seed in (1, 2, 3):
        # hate-heavy class weighting as in the published fine-tuning rounds,
        # with the rate/weights scaled to this fixture regime and dev-based
        # epoch selection (the criterion is explicitly property-based)
        hp = TrainingHyperparams(
            class_weight_no_hate=0.02, class_weight_hate=0.98,
            dropout=0.2, learning_rate=3e-4, batch_size=50, epochs=4, seed=seed,
        )
        tuned = fine_tune(lstm, boot.dataset, hp, dev=de_dev)
        delta = eval_model(tuned, de_test).per_class["Hate"].recall - base_recall
        deltas.append(delta)
        ups += delta > 0
    assert ups >= 2, f"recall deltas {deltas}"
    record(9, f"skew {ratio:.1f}:1 (> 20:1); Hate-recall up in {ups}/3 runs ({['%+.2f' % d for d in deltas]})")


def test_criterion_10_determinism(tmp_path):
    """Re-running a config with fixed seeds reproduces sampled datasets and
    reports byte-identically (fresh output directories, no cache reuse)."""
    from crosshate.experiments import load_config, run_stage

    world = generate_world(tmp_path / "w", seed=11, scale=0.02, n_forum_posts=4)
    sample_bytes = []
    for run in ("s1", "s2"):
        out = tmp_path / run / "sampled.tsv"
        code = cli_main([
            "sample", "--in", str(world.datasets["en_train"]), "--language", "en",
            "--ratio", "1:1", "--mode", "oversample", "--seed", "5", "--out", str(out),
        ])
        assert code == 0
        sample_bytes.append(out.read_bytes())
    assert sample_bytes[0] == sample_bytes[1]

    report_bytes = []
    for run in ("r1", "r2"):
        cfg_path = tmp_path / f"{run}.ini"
        cfg_path.write_text(
            f"""
[experiment]
stage = crosslingual
seed = 13
out_dir = {tmp_path / run}
max_len = 16
architectures = cnn,bilstm

[data]
train = {world.datasets['en_train']}
train_language = en
dev = {world.datasets['de_dev']}
dev_language = de
test = {world.datasets['de_test']}
test_language = de

[embeddings]
en = {world.embeddings['en']}
de = {world.embeddings['de']}

[cnn]
filters_per_size = 16
dropout = 0.3
learning_rate = 1e-3
batch_size = 16
epochs = 2

[bilstm]
recurrent_units = 8
conv_feature_maps = 8
dense_units = 8
dropout = 0.3
learning_rate = 3e-3
batch_size = 16
epochs = 2
""",
            encoding="utf-8",
        )
        run_stage(load_config(cfg_path))
        payload = b""
        for arch in ("cnn", "bilstm"):
            payload += (tmp_path / run / "reports" / f"crosslingual-{arch}.json").read_bytes()
        report_bytes.append(payload)
    assert report_bytes[0] == report_bytes[1]
    record(10, "sampled TSV and stage reports byte-identical across re-runs")
