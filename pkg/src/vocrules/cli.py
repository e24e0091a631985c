"""
Command-line entry point.

    vocrules --config run.toml prep
    vocrules --config run.toml train --iterative
    vocrules --config run.toml train --baseline
    vocrules --config run.toml eval
    vocrules rules runs/x/ruleset-iterative.txt --min-voc 0.8
    vocrules --out data synth synth.toml
    vocrules --config run.toml compare

Exit codes: 0 success, 2 configuration error, 3 data error, 4 learner failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as cp
from .errors import (ConfigError, DataError, EmptyVocabulary, InsufficientData, InvalidRestriction,
                     InvalidSpec, NoRuleFound, ParseError, SchemaMismatch)
from .evaluation import (compare_runs, dump_report, evaluate, format_accuracy_table, format_comparison,
                         format_threshold_table, split)
from .iterative import dump_traces, learn_multiclass
from .learners import learn_baseline
from .memory import measure_peak_memory
from .rules import load_ruleset, render, save_ruleset

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_LEARNER = 0, 2, 3, 4

VOCABULARY_FILE = "vocabulary.tsv"
DATASET_FILE = "dataset.npz"


class LearnerFailure(Exception):
    pass


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _need_config(args):
    if args.config is None:
        raise ConfigError(f"'{args.command}' needs --config")
    from .config import load_config
    return load_config(args.config, seed=args.seed, out=args.out)


# -- prep ------------------------------------------------------------------------


def prepare(cfg):
    """Read the CSV, build the vocabulary and write both caches."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "text":
        texts, labels, ids = cp.read_text_csv(cfg.dataset_path, cfg.text_column, cfg.label_column,
                                              cfg.delimiter, cfg.id_column)
        vocab = cp.build_vocabulary(texts, cfg.min_df, cfg.ngram_range, cfg.max_features)
        ds = cp.vectorize(texts, vocab, labels, ids)
        vocab.dump(out / VOCABULARY_FILE)
    else:
        ds = cp.read_table_csv(cfg.dataset_path, cfg.label_column, cfg.delimiter, cfg.id_column)
    cp.save_dataset(ds, out / DATASET_FILE)
    return ds


def load_prepared(cfg):
    out = cfg.output_dir
    if not (out / DATASET_FILE).exists():
        return prepare(cfg)
    vocab = cp.Vocabulary.load(out / VOCABULARY_FILE) if cfg.mode == "text" else None
    return cp.load_dataset(out / DATASET_FILE, vocab)


def cmd_prep(args) -> int:
    cfg = _need_config(args)
    ds = prepare(cfg)
    if ds.mode == "text":
        print(f"V = {len(ds.vocabulary)}")
    else:
        print(f"attributes = {len(ds.attributes)}")
    print(f"examples = {len(ds)}")
    for label in ds.label_set:
        print(f"  {label}: {ds.count(label)}")
    return EXIT_OK


# -- train -----------------------------------------------------------------------


def _render_lines(ruleset, schema, min_voc=None) -> str:
    lines = []
    for s in ruleset.above(min_voc):
        flag = "accepted" if s.accepted else "fallback"
        lines.append(f"{s.voc:.4f}  {flag:8}  {render(s.rule, schema)}")
    return "".join(line + "\n" for line in lines)


def cmd_train(args) -> int:
    cfg = _need_config(args)
    ds = load_prepared(cfg)
    train, valid, _ = split(ds, cfg.split_spec)
    method = "baseline" if args.baseline else "iterative"
    learner, it = cfg.learner, cfg.iteration
    labels = tuple(sorted(set(train.label_set) | set(valid.label_set)))
    if args.baseline:
        full = train.add(valid.row_mask())
        m = measure_peak_memory(lambda: (learn_baseline(full, learner, it.max_rules_per_label, it.seed, labels), []))
    else:
        m = measure_peak_memory(lambda: learn_multiclass(train, valid, it, learner, cfg.n_jobs))
    ruleset, traces = m.result
    if not len(ruleset):
        raise LearnerFailure("the learner produced no rules")
    out = cfg.output_dir
    save_ruleset(ruleset, out / f"ruleset-{method}.txt")
    _write(out / f"rules-{method}.txt", _render_lines(ruleset, ds))
    if not args.baseline:
        _write(out / f"traces-{method}.jsonl", dump_traces(traces, ds.vocabulary))
    metrics = {"method": method, "rules": len(ruleset), "wall_time": m.wall_time,
               "peak_memory_bytes": m.peak_bytes}
    _write(out / f"train-metrics-{method}.json", json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    print(f"{method}: {len(ruleset)} rules -> {out / f'ruleset-{method}.txt'}")
    return EXIT_OK


# -- eval ------------------------------------------------------------------------


def cmd_eval(args) -> int:
    cfg = _need_config(args)
    ds = load_prepared(cfg)
    _, _, test = split(ds, cfg.split_spec)
    out = cfg.output_dir
    paths = [Path(p) for p in args.rulesets] or sorted(out.glob("ruleset-*.txt"))
    if not paths:
        raise DataError(f"no rule sets given and none found in {out}")
    echo = cfg.echo()
    for path in paths:
        ruleset = load_ruleset(path)
        report = evaluate(ruleset, test, cfg.thresholds)
        name = path.stem.removeprefix("ruleset-")
        extra = {"dataset": cfg.dataset_name, "run": name, "ruleset": path.name, "seed": cfg.seed,
                 "learner": cfg.learner.kind}
        if (path.parent / f"traces-{name}.jsonl").exists():
            extra["traces"] = f"traces-{name}.jsonl"
        text = (f"# config: {json.dumps(echo, sort_keys=True)}\n\n"
                + format_accuracy_table([(cfg.dataset_name, f"{cfg.learner.kind} {name}", report)],
                                        include_timing=False)
                + "\n" + format_threshold_table([(f"{cfg.learner.kind} {name}", report)]))
        if "json" in cfg.formats:
            _write(out / f"report-{name}.json", dump_report(report, echo, **extra))
        if "text" in cfg.formats:
            _write(out / f"report-{name}.txt", text)
        print(text)
    return EXIT_OK


# -- rules -----------------------------------------------------------------------


def cmd_rules(args) -> int:
    path = Path(args.ruleset)
    ruleset = load_ruleset(path)
    schema = None
    vocab_path = Path(args.vocabulary) if args.vocabulary else path.parent / VOCABULARY_FILE
    if ruleset.mode == "text" and vocab_path.exists():
        schema = cp.Vocabulary.load(vocab_path)
        if schema.fingerprint != ruleset.schema_fingerprint:
            raise SchemaMismatch(f"{vocab_path} does not match the rule set")
    sys.stdout.write(_render_lines(ruleset, schema, args.min_voc))
    return EXIT_OK


# -- synth -----------------------------------------------------------------------


def cmd_synth(args) -> int:
    from .config import tomllib
    from .synthetic import generate_synthetic, spec_from_mapping, write_corpus_csv, write_ground_truth

    spec_path = Path(args.spec)
    try:
        with open(spec_path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"spec file not found: {spec_path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{spec_path}: {exc}") from None
    if set(raw) != {"synthetic"}:
        raise ConfigError("synthetic spec file must hold exactly one [synthetic] table")
    body = dict(raw["synthetic"])
    if args.seed is not None:
        body["seed"] = args.seed
    try:
        spec = spec_from_mapping(body)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"bad synthetic spec: {exc}") from None
    corpus = generate_synthetic(spec)
    out = Path(args.out) if args.out else spec_path.parent
    out.mkdir(parents=True, exist_ok=True)
    write_corpus_csv(corpus, out / "corpus.csv")
    write_ground_truth(corpus, out / "ground_truth.json")
    print(f"{len(corpus.texts)} documents -> {out / 'corpus.csv'}")
    return EXIT_OK


# -- compare ---------------------------------------------------------------------


def cmd_compare(args) -> int:
    cfg = _need_config(args)
    ds = load_prepared(cfg)
    rec = compare_runs(ds, cfg.iteration, cfg.learner, cfg.split_spec, cfg.thresholds, cfg.dataset_name)
    text = format_comparison([rec]) + "\n" + format_threshold_table(
        [(f"{rec.learner} {r.method}", r.report) for _, _, r in rec.rows()])
    _write(cfg.output_dir / "compare.txt", text)
    print(text)
    return EXIT_OK


# -- wiring ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the configured seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="override the output directory")

    parser = argparse.ArgumentParser(prog="vocrules", parents=[common],
                                     description="Rule learning with confidence-gated dictionary expansion.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", parents=[common], help="build vocabulary and dataset caches")
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("train", parents=[common], help="learn a rule set")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--baseline", action="store_true", help="plain learner on all training data")
    g.add_argument("--iterative", action="store_true", help="confidence-gated learner (default)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="threshold sweep on the test split")
    p.add_argument("rulesets", nargs="*", help="rule-set files (default: every ruleset-*.txt in the output dir)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rules", parents=[common], help="print rules above a VoC filter")
    p.add_argument("ruleset")
    p.add_argument("--min-voc", type=float, default=None, help="only rules with voc above this value")
    p.add_argument("--vocabulary", default=None, help="vocabulary dump used to name features")
    p.set_defaults(func=cmd_rules)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic planted-rule corpus")
    p.add_argument("spec", help="TOML file with a [synthetic] table")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compare", parents=[common], help="baseline versus iterative on one split")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("config", "seed", "out"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        return args.func(args)
    except (ConfigError, InvalidSpec) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, EmptyVocabulary, InsufficientData, SchemaMismatch, ParseError, InvalidRestriction,
            OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NoRuleFound, LearnerFailure) as exc:
        print(f"learner failure: {exc}", file=sys.stderr)
        return EXIT_LEARNER


if __name__ == "__main__":
    sys.exit(main())
