"""Command-line interface.

Verbs: ``prepare`` (relabel + split the raw corpora), ``sample``
(class-ratio adjustment), ``train`` (cross-lingual stage), ``bootstrap``,
``evaluate`` (one checkpoint on one file), ``sweep`` (imbalance grid),
``report`` (comparison tables from saved reports), ``encode`` (tokenizer
and vocabulary debugging).

Exit codes: 0 on success, 2 on validation errors (bad config, missing or
malformed inputs), 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import (
    EnglishSplitCounts,
    preprocess_forum_text,
    read_forum_dump,
    read_germeval_tsv,
    read_stormfront_dir,
    relabel_germeval,
    relabel_stormfront,
    split_english,
    split_german,
)
from .data import read_tsv, write_tsv
from .embeddings import AlignedEmbeddings, encode, load_embeddings, tokenize
from .errors import CrosshateError, ValidationError
from .evaluation import EvalReport, compare, confusion, metrics
from .experiments import load_config, run_stage
from .models import load_model, predict
from .sampling import SamplingSpec, parse_ratio, resample


def _format_report(report: EvalReport) -> str:
    r = report.rounded()
    cells = [f"accuracy {r['accuracy']:.2f}"]
    for klass in ("noHate", "Hate", "macro"):
        m = r[klass]
        cells.append(f"{klass} P {m['precision']:.2f} R {m['recall']:.2f} F1 {m['f1']:.2f}")
    return " | ".join(cells)


def _counts_line(name, dataset) -> str:
    c = dataset.class_counts()
    return f"{name}: {c.no_hate} noHate / {c.hate} Hate ({len(dataset)} total)"


def cmd_prepare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict[str, dict] = {}

    def emit(dataset, filename):
        write_tsv(dataset, out / filename)
        c = dataset.class_counts()
        summary[dataset.name] = {"noHate": c.no_hate, "Hate": c.hate, "total": len(dataset), "file": filename}
        print(_counts_line(dataset.name, dataset))

    if args.germeval_train:
        official = relabel_germeval(read_germeval_tsv(args.germeval_train, id_prefix="germeval-train"))
        de_train, de_dev = split_german(official)
        emit(de_train, "de_train.tsv")
        emit(de_dev, "de_dev.tsv")
    if args.germeval_test:
        test = relabel_germeval(read_germeval_tsv(args.germeval_test, id_prefix="germeval-test"))
        emit(test.with_name("DE-TEST"), "de_test.tsv")
    if args.stormfront_dir:
        full = relabel_stormfront(read_stormfront_dir(args.stormfront_dir))
        counts = EnglishSplitCounts(
            test_no_hate=args.en_test_counts[0],
            test_hate=args.en_test_counts[1],
            dev_no_hate=args.en_dev_counts[0],
            dev_hate=args.en_dev_counts[1],
        )
        en_train, en_dev, en_test = split_english(full, counts=counts, seed=args.seed)
        emit(en_train, "en_train.tsv")
        emit(en_dev, "en_dev.tsv")
        emit(en_test, "en_test.tsv")
    if args.forum_dump:
        de_new = preprocess_forum_text(read_forum_dump(args.forum_dump))
        emit(de_new, "de_new.tsv")
    if not summary:
        raise ValidationError("nothing to prepare: pass at least one input")
    with open(out / "prepare-summary.json", "w", encoding="utf-8") as fh:
        json.dump({"seed": args.seed, "datasets": summary}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_sample(args) -> int:
    dataset = read_tsv(args.infile, language=args.language, name=args.name)
    spec = SamplingSpec(ratio=parse_ratio(args.ratio), mode=_mode(args.mode), seed=args.seed)
    sampled = resample(dataset, spec)
    write_tsv(sampled, args.out)
    print(_counts_line(dataset.name, dataset))
    print(_counts_line(sampled.name, sampled))
    return 0


def _mode(text: str):
    from .sampling import SamplingMode

    try:
        return SamplingMode(text)
    except ValueError:
        raise ValidationError(f"mode must be 'oversample' or 'undersample', got {text!r}") from None


def _run_configured_stage(args, expected_stage: str) -> int:
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
    if cfg.stage != expected_stage:
        raise ValidationError(f"config stage is {cfg.stage!r}, but this verb runs {expected_stage!r}")
    result = run_stage(cfg)
    if isinstance(result, dict) and "before" in result:  # bootstrap payload
        for phase in ("before", "after"):
            for arch, report in result[phase].items():
                print(f"[{phase}] {arch}: {_format_report(report)}")
    elif isinstance(result, dict):
        for arch, report in result.items():
            print(f"{arch}: {_format_report(report)}")
    else:
        for report in result:
            print(f"{report.metadata['stage']} {report.metadata['model']}: {_format_report(report)}")
    print(f"artifacts under {cfg.out_dir}")
    return 0


def cmd_train(args) -> int:
    return _run_configured_stage(args, "crosslingual")


def cmd_bootstrap(args) -> int:
    return _run_configured_stage(args, "bootstrap")


def cmd_sweep(args) -> int:
    return _run_configured_stage(args, "imbalance_sweep")


def cmd_evaluate(args) -> int:
    embeddings = None
    if args.emb:
        tables = {}
        for pair in args.emb:
            lang, _, path = pair.partition("=")
            if not path:
                raise ValidationError(f"--emb expects lang=path, got {pair!r}")
            tables[lang] = load_embeddings(path, args.max_vocab)
        embeddings = AlignedEmbeddings(tables)
    model = load_model(args.model, embeddings=embeddings)
    dataset = read_tsv(args.data, language=args.language)
    preds = predict(model, dataset)
    pairs = [(ex.label, p.label) for ex, p in zip(dataset, preds) if ex.label is not None and p.error is None]
    if not pairs:
        raise ValidationError("dataset has no labeled examples to evaluate on")
    report = metrics(
        confusion([g for g, _ in pairs], [p for _, p in pairs]),
        metadata={"model": model.arch, "stage": "evaluate", "dataset": dataset.name},
    )
    print(f"{model.arch}: {_format_report(report)}")
    if args.out:
        report.save(args.out)
        print(f"report written to {args.out}")
    return 0


def cmd_report(args) -> int:
    reports = [EvalReport.load(p) for p in args.reports]
    table = compare(reports, baseline=args.baseline)
    print(table.render_text())
    if args.out_csv:
        Path(args.out_csv).write_text(table.render_csv(), encoding="utf-8")
    return 0


def cmd_encode(args) -> int:
    table = load_embeddings(args.emb, args.max_vocab)
    lines = [args.text] if args.text is not None else [line.rstrip("\n") for line in sys.stdin]
    for line in lines:
        tokens = tokenize(line)
        enc = encode(tokens, table, args.max_len)
        print(json.dumps({
            "text": line,
            "tokens": tokens,
            "indices": enc.indices.tolist(),
            "true_length": enc.true_length,
        }))
    return 0


def _counts_pair(text: str) -> tuple[int, int]:
    a, b = parse_ratio(text)
    return a, b


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crosshate", description=__doc__.split("\n\n")[1])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("prepare", help="relabel and split the raw source corpora")
    p.add_argument("--germeval-train", help="official German training TSV (text<TAB>coarse<TAB>fine)")
    p.add_argument("--germeval-test", help="official German test TSV")
    p.add_argument("--stormfront-dir", help="forum corpus directory (annotation CSV + per-sample files)")
    p.add_argument("--forum-dump", help="raw crawled forum dump to clean into DE-NEW")
    p.add_argument("--en-test-counts", type=_counts_pair, default=(427, 63), metavar="NOHATE:HATE")
    p.add_argument("--en-dev-counts", type=_counts_pair, default=(134, 20), metavar="NOHATE:HATE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_prepare)

    p = sub.add_parser("sample", help="produce a class-ratio-adjusted copy of a dataset")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--ratio", required=True, help="noHate:Hate target, e.g. 7:1")
    p.add_argument("--mode", required=True, choices=("oversample", "undersample"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--language")
    p.add_argument("--name", help="dataset name override (defaults to the file stem)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sample)

    for verb, fn, blurb in (
        ("train", cmd_train, "cross-lingual stage: train all architectures, evaluate on the target test set"),
        ("bootstrap", cmd_bootstrap, "ensemble relabeling + fine-tuning round"),
        ("sweep", cmd_sweep, "monolingual imbalance grid over sampling specs"),
    ):
        p = sub.add_parser(verb, help=blurb)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the config output directory")
        p.set_defaults(fn=fn)

    p = sub.add_parser("evaluate", help="evaluate one checkpoint on one canonical TSV")
    p.add_argument("--model", required=True, help="checkpoint directory")
    p.add_argument("--data", required=True)
    p.add_argument("--language")
    p.add_argument("--emb", nargs="*", metavar="LANG=PATH", help="aligned tables for vector models")
    p.add_argument("--max-vocab", type=int, default=None)
    p.add_argument("--out", help="write the report JSON here")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="comparison table from saved report JSONs")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--baseline", type=int, default=0)
    p.add_argument("--out-csv")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("encode", help="tokenize and index text against a vector table")
    p.add_argument("--emb", required=True)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--max-vocab", type=int, default=None)
    p.add_argument("--text", help="encode this string instead of stdin lines")
    p.set_defaults(fn=cmd_encode)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CrosshateError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a runtime failure, exit 1
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
