"""Config-driven experiment stages behind the CLI.

A run is described by a flat INI-style file with one section per
architecture plus ``[experiment]``, ``[data]``, ``[embeddings]`` and
``[sampling]`` sections (diff-able and hand-editable; see configs/ for the
published-hyperparameter presets). Three stages exist:

* ``crosslingual`` — train every architecture on the source-language set,
  evaluate on the target-language test set, persist the ensemble;
* ``bootstrap`` — relabel unlabeled target text with a saved ensemble,
  fine-tune the members on it, report before/after and the gold audit;
* ``imbalance_sweep`` — train every architecture on every ratio-adjusted
  copy of one training set, evaluate monolingually.

Every artifact embeds the config hash and the seed. Trained checkpoints
and sampled datasets are cached under the output directory keyed by the
content hash of everything that determines them, so re-runs skip completed
stages and reproduce outputs byte-identically.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .bootstrap import Ensemble, bootstrap_round, write_votes_sidecar
from .data import Dataset, read_tsv, write_tsv
from .embeddings import AlignedEmbeddings, DEFAULT_MAX_LEN, load_embeddings
from .errors import CrosshateError, ValidationError
from .evaluation import EvalReport, compare, confusion, metrics
from .models import (
    BiLSTMConfig,
    CNNConfig,
    TrainingHyperparams,
    TransformerConfig,
    build_bilstm_cnn,
    build_cnn,
    load_model,
    predict,
    save_model,
    train,
)
from .sampling import SamplingSpec, class_counts, expected_counts, resample

log = logging.getLogger(__name__)

STAGES = ("crosslingual", "bootstrap", "imbalance_sweep")
ARCHITECTURES = ("cnn", "bilstm", "transformer")
# distinct per-architecture seeds derived from the global one
_ARCH_SEED_OFFSET = {"cnn": 1, "bilstm": 2, "transformer": 3}


@dataclass
class ExperimentConfig:
    stage: str
    seed: int
    out_dir: Path
    max_len: int
    architectures: tuple[str, ...]
    data: dict[str, Path]
    data_languages: dict[str, str]
    embedding_paths: dict[str, Path]
    max_vocab: int | None
    sampling_specs: tuple[SamplingSpec, ...]
    model_cfgs: dict[str, object]
    hyperparams: dict[str, TrainingHyperparams]
    normalized: str  # canonical text the hash is computed from

    def config_hash(self) -> str:
        return hashlib.sha256(self.normalized.encode("utf-8")).hexdigest()[:16]

    def arch_seed(self, arch: str) -> int:
        return self.seed * 10 + _ARCH_SEED_OFFSET[arch]


def _get(parser, section, key, default=None, required=False):
    if parser.has_option(section, key):
        return parser.get(section, key)
    if required:
        raise ValidationError(f"config is missing [{section}] {key}")
    return default


def load_config(path: str | Path, seed: int | None = None, out_dir: str | None = None) -> ExperimentConfig:
    """Parse and validate an experiment config; optional seed/out_dir
    overrides take precedence over the file."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ValidationError(f"cannot parse config {path}: {exc}") from None

    stage = _get(parser, "experiment", "stage", required=True)
    if stage not in STAGES:
        raise ValidationError(f"unknown stage {stage!r}; expected one of {STAGES}")
    eff_seed = seed if seed is not None else int(_get(parser, "experiment", "seed", "0"))
    eff_out = Path(out_dir if out_dir is not None else _get(parser, "experiment", "out_dir", required=True))
    max_len = int(_get(parser, "experiment", "max_len", str(DEFAULT_MAX_LEN)))
    archs = tuple(
        a.strip()
        for a in _get(parser, "experiment", "architectures", "cnn,bilstm,transformer").split(",")
        if a.strip()
    )
    for arch in archs:
        if arch not in ARCHITECTURES:
            raise ValidationError(f"unknown architecture {arch!r}")
        if not parser.has_section(arch):
            raise ValidationError(f"config is missing a [{arch}] section")

    base = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else (base / candidate)

    data: dict[str, Path] = {}
    languages: dict[str, str] = {}
    if parser.has_section("data"):
        for key, value in parser.items("data"):
            if key.endswith("_language"):
                languages[key[: -len("_language")]] = value.strip()
            else:
                data[key] = resolve(value.strip())
    required_data = {
        "crosslingual": ("train", "dev", "test"),
        "bootstrap": ("unlabeled", "test", "ensemble"),
        "imbalance_sweep": ("train", "dev", "test"),
    }[stage]
    for key in required_data:
        if key not in data:
            raise ValidationError(f"stage {stage!r} needs [data] {key}")
    for key, p in data.items():
        if not p.exists():
            raise ValidationError(f"[data] {key} does not exist: {p}")

    emb_paths: dict[str, Path] = {}
    max_vocab = None
    if parser.has_section("embeddings"):
        for key, value in parser.items("embeddings"):
            if key == "max_vocab":
                max_vocab = int(value)
            else:
                emb_paths[key] = resolve(value.strip())
        for lang, p in emb_paths.items():
            if not p.exists():
                raise ValidationError(f"[embeddings] {lang} does not exist: {p}")
    needs_vectors = any(a in archs for a in ("cnn", "bilstm"))
    if needs_vectors and not emb_paths:
        raise ValidationError("cnn/bilstm architectures need an [embeddings] section")

    specs: tuple[SamplingSpec | None, ...] = ()
    if parser.has_option("sampling", "specs"):
        specs = tuple(
            None if chunk.strip() == "none" else SamplingSpec.from_string(chunk.strip(), seed=eff_seed)
            for chunk in parser.get("sampling", "specs").split(";")
            if chunk.strip()
        )
    if stage == "imbalance_sweep" and not specs:
        raise ValidationError("stage 'imbalance_sweep' needs [sampling] specs ('none' keeps the base set)")

    model_cfgs: dict[str, object] = {}
    hyperparams: dict[str, TrainingHyperparams] = {}
    for arch in archs:
        section = dict(parser.items(arch))
        hyperparams[arch] = _parse_hyperparams(section, arch, eff_seed)
        model_cfgs[arch] = _parse_model_cfg(section, arch, resolve)

    normalized_lines = [f"seed={eff_seed}"]
    for section in sorted(parser.sections()):
        for key in sorted(dict(parser.items(section))):
            if (section, key) in (("experiment", "seed"), ("experiment", "out_dir")):
                continue
            normalized_lines.append(f"{section}.{key}={parser.get(section, key)}")
    return ExperimentConfig(
        stage=stage,
        seed=eff_seed,
        out_dir=eff_out,
        max_len=max_len,
        architectures=archs,
        data=data,
        data_languages=languages,
        embedding_paths=emb_paths,
        max_vocab=max_vocab,
        sampling_specs=specs,
        model_cfgs=model_cfgs,
        hyperparams=hyperparams,
        normalized="\n".join(normalized_lines),
    )


def _parse_hyperparams(section: dict, arch: str, seed: int) -> TrainingHyperparams:
    def f(key, default):
        return float(section.get(key, default))

    return TrainingHyperparams(
        class_weight_no_hate=f("class_weight_nohate", 1.0),
        class_weight_hate=f("class_weight_hate", 1.0),
        dropout=f("dropout", 0.0),
        learning_rate=f("learning_rate", 1e-3),
        batch_size=int(section.get("batch_size", 32)),
        epochs=int(section.get("epochs", 1)),
        seed=seed * 10 + _ARCH_SEED_OFFSET[arch],
    )


def _parse_model_cfg(section: dict, arch: str, resolve):
    def int_tuple(key, default):
        raw = section.get(key)
        if raw is None:
            return default
        return tuple(int(v) for v in raw.replace(",", " ").split())

    if arch == "cnn":
        return CNNConfig(
            filter_sizes=int_tuple("filter_sizes", (3, 4, 5)),
            filters_per_size=int(section.get("filters_per_size", 100)),
            dense_units=int(section.get("dense_units", 0)),
            dropout=float(section.get("dropout", 0.5)),
        )
    if arch == "bilstm":
        return BiLSTMConfig(
            recurrent_units=int(section.get("recurrent_units", 100)),
            conv_feature_maps=int(section.get("conv_feature_maps", 200)),
            kernel_sizes=int_tuple("kernel_sizes", (3, 4, 5)),
            dense_units=int(section.get("dense_units", 100)),
            dropout=float(section.get("dropout", 0.5)),
        )
    checkpoint = section.get("checkpoint")
    if not checkpoint:
        raise ValidationError("the [transformer] section needs a checkpoint")
    return TransformerConfig(
        model_identifier=str(resolve(checkpoint)),
        dropout=float(section.get("dropout", 0.1)),
        max_subword_len=int(section.get("max_subword_len", 128)),
    )


# --- shared plumbing -------------------------------------------------------------


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _content_hash(*parts: str) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()[:16]


def _load_space(cfg: ExperimentConfig) -> AlignedEmbeddings | None:
    if not any(a in cfg.architectures for a in ("cnn", "bilstm")):
        return None
    tables = {lang: load_embeddings(path, cfg.max_vocab) for lang, path in sorted(cfg.embedding_paths.items())}
    return AlignedEmbeddings(tables)


def _read_dataset(cfg: ExperimentConfig, key: str, name: str | None = None) -> Dataset:
    return read_tsv(cfg.data[key], name=name or key.upper().replace("_", "-"), language=cfg.data_languages.get(key))


def _build(arch: str, cfg: ExperimentConfig, space: AlignedEmbeddings | None):
    seed = cfg.arch_seed(arch)
    if arch == "cnn":
        return build_cnn(cfg.model_cfgs[arch], space, max_len=cfg.max_len, seed=seed)
    if arch == "bilstm":
        return build_bilstm_cnn(cfg.model_cfgs[arch], space, max_len=cfg.max_len, seed=seed)
    from .transformer import build_transformer_classifier

    return build_transformer_classifier(cfg.model_cfgs[arch], seed=seed)


def _evaluate(model, test: Dataset, metadata: dict) -> EvalReport:
    preds = predict(model, test)
    pairs = [(ex.label, p.label) for ex, p in zip(test, preds) if p.error is None and ex.label is not None]
    errors = sum(1 for p in preds if p.error is not None)
    meta = dict(metadata)
    meta["dataset"] = test.name
    if errors:
        meta["prediction_errors"] = errors
    return metrics(confusion([g for g, _ in pairs], [p for _, p in pairs]), metadata=meta)


def _train_cached(arch: str, cfg: ExperimentConfig, space, train_ds: Dataset, dev_ds: Dataset,
                  train_path: Path, dev_path: Path):
    """Train with on-disk caching keyed by everything that determines the
    checkpoint: config slice, data files, seed and backend-independent cfg."""
    key = _content_hash(
        "train", arch, cfg.normalized, str(cfg.max_len), str(cfg.arch_seed(arch)),
        _file_hash(train_path), _file_hash(dev_path),
    )
    cache_dir = cfg.out_dir / "cache" / f"train-{arch}-{key}"
    if (cache_dir / "manifest.json").exists():
        log.info("cache hit for %s (%s)", arch, key)
        return load_model(cache_dir, embeddings=space)
    model = _build(arch, cfg, space)
    trained = train(model, train_ds, cfg.hyperparams[arch], dev_ds)
    save_model(trained, cache_dir)
    return trained


def _report_common(cfg: ExperimentConfig, stage: str, arch: str, extra: dict | None = None) -> dict:
    meta = {"model": arch, "stage": stage, "config_hash": cfg.config_hash(), "seed": cfg.seed}
    if extra:
        meta.update(extra)
    return meta


def _write_artifact_meta(artifact: Path, cfg: ExperimentConfig, **extra) -> None:
    """Sidecar pinning an artifact to the run that produced it."""
    payload = {"config_hash": cfg.config_hash(), "seed": cfg.seed, **extra}
    meta_path = artifact / "run.json" if artifact.is_dir() else artifact.with_suffix(artifact.suffix + ".meta.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_comparison(reports: list[EvalReport], path: Path, baseline: int = 0) -> None:
    table = compare(reports, baseline=baseline)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.with_suffix(".txt").write_text(table.render_text() + "\n", encoding="utf-8")
    path.with_suffix(".csv").write_text(table.render_csv(), encoding="utf-8")


# --- stages ---------------------------------------------------------------------


def run_crosslingual(cfg: ExperimentConfig) -> dict[str, EvalReport]:
    """Train all configured architectures on the source-language training
    set, evaluate each on the target-language test set. Partial results are
    persisted as soon as each model finishes."""
    space = _load_space(cfg)
    train_ds = _read_dataset(cfg, "train")
    dev_ds = _read_dataset(cfg, "dev")
    test_ds = _read_dataset(cfg, "test")
    reports: dict[str, EvalReport] = {}
    report_dir = cfg.out_dir / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    for arch in cfg.architectures:
        trained = _train_cached(arch, cfg, space, train_ds, dev_ds, cfg.data["train"], cfg.data["dev"])
        member_dir = cfg.out_dir / "ensemble" / arch
        save_model(trained, member_dir)
        _write_artifact_meta(member_dir, cfg)
        report = _evaluate(
            trained, test_ds,
            _report_common(cfg, "crosslingual", arch, {"train_dataset": train_ds.name}),
        )
        report.save(report_dir / f"crosslingual-{arch}.json")
        reports[arch] = report
        log.info("%s on %s: macro-F1 %.2f", arch, test_ds.name, report.macro.f1)
    _write_comparison(list(reports.values()), report_dir / "crosslingual-comparison")
    return reports


def run_bootstrap(cfg: ExperimentConfig) -> dict:
    """One ensemble relabel + fine-tune round with before/after evaluation
    and, when gold labels exist, the audit confusion matrix."""
    space = _load_space(cfg)
    unlabeled = _read_dataset(cfg, "unlabeled")
    test_ds = _read_dataset(cfg, "test")
    dev_ds = _read_dataset(cfg, "dev") if "dev" in cfg.data else None

    ensemble_dir = cfg.data["ensemble"]
    members = []
    for arch in cfg.architectures:
        member_dir = ensemble_dir / arch
        if not member_dir.exists():
            raise ValidationError(f"ensemble member checkpoint missing: {member_dir}")
        member = load_model(member_dir, embeddings=space)
        if member.arch != arch:
            raise ValidationError(f"{member_dir} holds a {member.arch!r} checkpoint, expected {arch!r}")
        members.append(member)
    if len(members) != 3:
        raise ValidationError(f"bootstrap needs exactly 3 architectures, config lists {len(members)}")
    ensemble = Ensemble(members=tuple(members))

    report_dir = cfg.out_dir / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    before: dict[str, EvalReport] = {}
    for member in ensemble.members:
        report = _evaluate(member, test_ds, _report_common(cfg, "before-fine-tune", member.arch))
        report.save(report_dir / f"bootstrap-before-{member.arch}.json")
        before[member.arch] = report

    tuned, boot = bootstrap_round(
        ensemble, unlabeled, {arch: cfg.hyperparams[arch] for arch in cfg.architectures}, dev=dev_ds
    )

    boot_dir = cfg.out_dir / "bootstrap"
    boot_dir.mkdir(parents=True, exist_ok=True)
    write_tsv(boot.dataset, boot_dir / "relabeled.tsv")
    write_votes_sidecar(boot, boot_dir / "votes.tsv")
    _write_artifact_meta(boot_dir / "relabeled.tsv", cfg, **boot.provenance)

    audit_payload = None
    gold_ds = None
    if "gold" in cfg.data:
        gold_ds = _read_dataset(cfg, "gold")
    elif boot.gold and len(boot.gold) == len(boot.dataset):
        gold_ds = unlabeled  # the "unlabeled" file carried hidden labels throughout
    if gold_ds is not None and len(gold_ds) > 0:
        from .bootstrap import audit_against_gold

        matrix = audit_against_gold(boot, gold_ds)
        audit_payload = {
            "matrix": matrix.as_lists(),
            "input_size": boot.provenance["input_size"],
            "labeled_size": boot.provenance["labeled_size"],
            "dropped": boot.provenance["dropped"],
            "class_counts": boot.provenance["class_counts"],
            "config_hash": cfg.config_hash(),
            "seed": cfg.seed,
        }
        with open(boot_dir / "audit.json", "w", encoding="utf-8") as fh:
            json.dump(audit_payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    after: dict[str, EvalReport] = {}
    for member in tuned.members:
        member_dir = cfg.out_dir / "ensemble-tuned" / member.arch
        save_model(member, member_dir)
        _write_artifact_meta(member_dir, cfg)
        report = _evaluate(member, test_ds, _report_common(cfg, "after-fine-tune", member.arch))
        report.save(report_dir / f"bootstrap-after-{member.arch}.json")
        after[member.arch] = report

    ordered = [before[a] for a in cfg.architectures] + [after[a] for a in cfg.architectures]
    _write_comparison(ordered, report_dir / "bootstrap-comparison")
    return {"before": before, "after": after, "audit": audit_payload, "bootstrapped": boot}


def run_imbalance_sweep(cfg: ExperimentConfig) -> list[EvalReport]:
    """Monolingual grid: every sampling spec x every architecture."""
    space = _load_space(cfg)
    base_train = _read_dataset(cfg, "train")
    dev_ds = _read_dataset(cfg, "dev")
    test_ds = _read_dataset(cfg, "test")
    report_dir = cfg.out_dir / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)

    reports: list[EvalReport] = []
    for spec in cfg.sampling_specs:
        if spec is None:  # unmodified base row of the grid
            sampled, sampled_path, tag = base_train, cfg.data["train"], "BASE"
        else:
            tag = spec.tag()
            sample_key = _content_hash(
                "sample", _file_hash(cfg.data["train"]), str(spec.ratio), spec.mode.value, str(spec.seed)
            )
            sampled_path = cfg.out_dir / "cache" / f"sample-{sample_key}.tsv"
            if sampled_path.exists():
                sampled = read_tsv(sampled_path, name=f"{base_train.name}-{tag}", language=base_train.language)
            else:
                sampled = resample(base_train, spec)
                write_tsv(sampled, sampled_path)
                _write_artifact_meta(sampled_path, cfg, spec=f"{spec.ratio[0]}:{spec.ratio[1]} {spec.mode.value}")
            counts = class_counts(sampled)
            wanted = expected_counts(class_counts(base_train), spec)
            if tuple(counts) != tuple(wanted):
                raise CrosshateError(
                    f"sampled dataset {sampled.name} has counts {tuple(counts)}, spec demands {tuple(wanted)}"
                )
        for arch in cfg.architectures:
            trained = _train_cached(arch, cfg, space, sampled, dev_ds, sampled_path, cfg.data["dev"])
            report = _evaluate(
                trained, test_ds,
                _report_common(cfg, f"sweep-{tag}", arch, {"train_dataset": sampled.name}),
            )
            report.save(report_dir / f"sweep-{tag}-{arch}.json")
            reports.append(report)
            log.info("%s on %s: macro-F1 %.2f", arch, sampled.name, report.macro.f1)
    _write_comparison(reports, report_dir / "sweep-comparison")
    return reports


def run_stage(cfg: ExperimentConfig):
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "config-used.ini").write_text(
        cfg.normalized + "\n", encoding="utf-8"
    )
    if cfg.stage == "crosslingual":
        return run_crosslingual(cfg)
    if cfg.stage == "bootstrap":
        return run_bootstrap(cfg)
    if cfg.stage == "imbalance_sweep":
        return run_imbalance_sweep(cfg)
    raise CrosshateError(f"unhandled stage {cfg.stage!r}")
