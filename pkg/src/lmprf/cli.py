"""Command-line driver: ``lmprf {index,run,sweep,eval,compare,synth}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .corpus_io import TokenPipeline, load_stopwords, parse_documents, parse_qrels
from .ecdmm import EcdmmParams
from .evaluation import compare_runs, evaluate, format_per_query, format_report, read_run
from .experiment import METHODS, SWEEP_PARAMS, ExperimentConfig, run_experiment, sweep
from .index import build_index


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _experiment_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("experiment")
    g.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    g.add_argument("--docs")
    g.add_argument("--doc-format", choices=["trec-sgml", "jsonl"])
    g.add_argument("--index", help="prebuilt index (built here and saved if missing)")
    g.add_argument("--topics")
    g.add_argument("--qrels")
    g.add_argument("--embeddings")
    g.add_argument("--embedding-format", choices=["word2vec", "glove"])
    g.add_argument("--stopwords")
    g.add_argument("--no-stem", dest="stem", action="store_const", const=False)
    g.add_argument("--no-lowercase", dest="lowercase", action="store_const", const=False)
    g.add_argument("--method", choices=METHODS)
    g.add_argument("--mu", type=float)
    g.add_argument("--fb-docs", type=int)
    g.add_argument("--fb-terms", type=int)
    g.add_argument("--depth", type=int)
    g.add_argument("--alpha", dest="alpha_interp", type=float,
                   help="fixed interpolation weight of the original query")
    g.add_argument("--alpha-grid", type=_floats, help="comma-separated grid for 2-fold cross-validation")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--tag")
    g.add_argument("--verbose-output", dest="verbose", action="store_const", const=True,
                   help="also write expansion terms and projection traces")
    e = p.add_argument_group("ecdmm")
    for f in dataclasses.fields(EcdmmParams):
        if f.name == "rng_seed":
            continue
        kind = {"int": int, "float": float, "str": str}.get(str(f.type), None)
        if f.name == "weighted":
            e.add_argument("--unweighted", dest="ecdmm_weighted", action="store_const", const=False)
            continue
        e.add_argument(f"--{f.name.replace('_', '-')}", dest=f"ecdmm_{f.name}", type=kind or str)
    return p


def _config_from_args(args, **extra) -> ExperimentConfig:
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in names and v is not None}
    eco = {k[len("ecdmm_"):]: v for k, v in vars(args).items() if k.startswith("ecdmm_") and v is not None}
    overrides.update({k: v for k, v in extra.items() if v is not None})
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, **overrides)
    else:
        cfg = ExperimentConfig(**overrides)
    if eco:
        cfg = dataclasses.replace(cfg, ecdmm=dataclasses.replace(cfg.ecdmm, **eco))
    return cfg


def cmd_index(args) -> int:
    sw = load_stopwords(args.stopwords) if args.stopwords else frozenset()
    pipeline = TokenPipeline(lowercase=args.lowercase is not False, stopwords=sw, stem=args.stem is not False)
    index = build_index(parse_documents(args.docs, args.doc_format), pipeline)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    index.save(args.out)
    print(f"{index.n_docs} documents, {index.n_terms} terms, {index.total_tokens} tokens -> {args.out}")
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args, output_dir=args.out)
    out = run_experiment(cfg)
    if out.result is not None:
        sys.stdout.write(format_report({cfg.run_tag: out.result}))
    if out.fold_alphas is not None:
        print(f"cross-validated alpha per fold: {out.fold_alphas}")
    for t, err in sorted(out.failures.items()):
        print(f"topic {t} used the unexpanded query: {err}", file=sys.stderr)
    for name, path in out.files.items():
        print(f"{name}: {path}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    if args.param != "alpha_interp" and cfg.method != "ecdmm":
        cfg = dataclasses.replace(cfg, method="ecdmm")
    csv = sweep(cfg, args.param, _floats(args.values))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(csv, encoding="utf-8")
    sys.stdout.write(csv)
    return 0


def cmd_eval(args) -> int:
    run = read_run(args.run)
    result = evaluate(run, parse_qrels(args.qrels))
    sys.stdout.write(format_report({run.tag or Path(args.run).stem: result}))
    if args.per_query:
        Path(args.per_query).write_text(format_per_query(result), encoding="utf-8")
    return 0


def cmd_compare(args) -> int:
    qrels = parse_qrels(args.qrels)
    results = {}
    for path in args.runs:
        run = read_run(path)
        results[run.tag or Path(path).stem] = evaluate(run, qrels)
    baselines = args.baselines.split(",") if args.baselines else None
    table = compare_runs(results, baselines, args.threshold)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def cmd_synth(args) -> int:
    from .synthetic import generate

    paths = generate(seed=args.seed, n_docs=args.docs, n_topics=args.topics, dim=args.dim).write(args.out)
    for name, p in paths.items():
        print(f"{name}: {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmprf", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)
    exp = _experiment_parent()

    p = sub.add_parser("index", parents=[common], help="build and save an index")
    p.add_argument("--docs", required=True)
    p.add_argument("--doc-format", choices=["trec-sgml", "jsonl"])
    p.add_argument("--stopwords")
    p.add_argument("--no-stem", dest="stem", action="store_const", const=False)
    p.add_argument("--no-lowercase", dest="lowercase", action="store_const", const=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("run", parents=[common, exp], help="run one feedback method over all topics")
    p.add_argument("--out", help="output directory for run, reports and traces")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common, exp], help="MAP sensitivity to one parameter")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", parents=[common], help="score a TREC run file")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--per-query", help="write per-topic CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", parents=[common], help="metric table with paired t-test markers")
    p.add_argument("--qrels", required=True)
    p.add_argument("--baselines", help="comma-separated run tags numbered 1..k in the sig column")
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--out")
    p.add_argument("runs", nargs="+")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", parents=[common], help="write the synthetic test collection")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--topics", type=int, default=10)
    p.add_argument("--dim", type=int, default=100)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"lmprf {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
