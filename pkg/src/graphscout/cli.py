"""Command-line interface: serve the HTTP API or run the engine offline.

Subcommands: serve, match, classify (train/eval/predict), synth
(fit/train/sample/report), ingest.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import matching, nlp, synth
from . import query as querydsl
from .store import GraphError, KnowledgeGraph, load_graph, save_graph, ingest_lines
from .taxonomy import IndicatorTaxonomy, TaxonomyError

logger = logging.getLogger(__name__)


def _taxonomy(path: str | None) -> IndicatorTaxonomy:
    return IndicatorTaxonomy.from_file(path) if path else IndicatorTaxonomy.default()


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _read_lines(path: str) -> list[str]:
    return _read_text(path).splitlines()


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    cfg = ServiceConfig.load(args.config)
    host, port = cfg.host_port()
    app = create_app(cfg)
    logger.info("listening on %s:%d", host, port)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def cmd_match(args) -> int:
    tax = _taxonomy(args.taxonomy)
    graph = load_graph(args.graph, tax)
    query = querydsl.parse(_read_text(args.query))
    ranked = matching.rank(graph, query, threshold=args.threshold)
    if args.limit is not None:
        ranked = matching.RankedResults(ranked.query, ranked.graph_version,
                                        ranked.entries[: args.limit])
    if args.format == "lines":
        for line in matching.result_lines(ranked):
            print(line)
    else:
        print(matching.result_table(ranked))
    return 0


def cmd_classify_train(args) -> int:
    tax = _taxonomy(args.taxonomy)
    corpus = nlp.load_corpus(_read_lines(args.corpus), tax)
    model = nlp.train(corpus, tax, seed=args.seed)
    model.save(args.out)
    print(f"trained on {len(corpus)} snippets, "
          f"{len(model.vocabulary)} terms -> {args.out}")
    return 0


def cmd_classify_eval(args) -> int:
    tax = _taxonomy(args.taxonomy)
    corpus = nlp.load_corpus(_read_lines(args.corpus), tax)
    report = nlp.evaluate_cv(corpus, tax, args.k, seed=args.seed)
    if args.json:
        print(report.to_json())
    else:
        print(report.format_table())
    return 0


def cmd_classify_predict(args) -> int:
    model = nlp.IndicatorModel.load(args.model)
    text = args.text if args.text is not None else sys.stdin.read()
    out = []
    for sentence in nlp.split_sentences(text):
        out.append({"text": sentence,
                    "labels": nlp.predict(model, sentence)})
    print(json.dumps(out, ensure_ascii=False, indent=2))
    return 0


def cmd_synth_fit(args) -> int:
    tax = _taxonomy(args.taxonomy)
    dataset = synth.load_trajectories(_read_lines(args.trajectories))
    mapper = synth.fit_mapper(dataset, tax)
    Path(args.out).write_text(json.dumps(mapper.to_dict()), encoding="utf-8")
    usable = sum(1 for c in mapper.cdfs.values() if c.usable)
    print(f"fitted {usable}/{len(mapper.categories)} usable categories -> {args.out}")
    return 0


def cmd_synth_train(args) -> int:
    tax = _taxonomy(args.taxonomy)
    dataset = synth.load_trajectories(_read_lines(args.trajectories))
    config_record = json.loads(_read_text(args.config)) if args.config else {}
    config = synth.AAEConfig.from_dict(config_record)
    mapper = synth.fit_mapper(dataset, tax)
    model, curve = synth.train_aae(dataset, mapper, config)
    synth.save_model(model, mapper, args.out)
    print(f"trained {config.epochs} epochs ({len(curve)} batches), "
          f"final recon loss {curve[-1]['recon_loss']:.6f} -> {args.out}"
          if curve else f"trained 0 epochs -> {args.out}")
    return 0


def cmd_synth_sample(args) -> int:
    model, mapper = synth.load_model(args.model)
    for trajectory in synth.sample(model, mapper, args.n, args.seed):
        print(synth.trajectory_line(trajectory))
    return 0


def cmd_synth_report(args) -> int:
    tax = _taxonomy(args.taxonomy)
    real = synth.load_trajectories(_read_lines(args.real))
    fake = synth.load_trajectories(_read_lines(args.synthetic))
    report = synth.fidelity_report(real, fake, tax)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_ingest(args) -> int:
    tax = _taxonomy(args.taxonomy)
    path = Path(args.graph)
    graph = load_graph(path, tax) if path.exists() else KnowledgeGraph(tax)
    lines = (_read_lines(args.input) if args.input
             else sys.stdin.read().splitlines())
    report = ingest_lines(graph, lines)
    save_graph(graph, path)
    print(json.dumps(report.to_dict()))
    return 0 if not report.errors else 1


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inspect",
        description="Investigative pattern search over knowledge networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", required=True, help="service config JSON")
    serve.set_defaults(func=cmd_serve)

    match = sub.add_parser("match", help="run a query against a graph file")
    match.add_argument("--graph", required=True)
    match.add_argument("--query", required=True, help="file holding DSL text")
    match.add_argument("--taxonomy")
    match.add_argument("--threshold", type=float, default=None,
                       help="override the query's threshold")
    match.add_argument("--limit", type=int, default=None)
    match.add_argument("--format", choices=("table", "lines"), default="table")
    match.set_defaults(func=cmd_match)

    classify = sub.add_parser("classify", help="train/evaluate/apply the classifier")
    csub = classify.add_subparsers(dest="subcommand", required=True)

    ctrain = csub.add_parser("train")
    ctrain.add_argument("--corpus", required=True)
    ctrain.add_argument("--taxonomy")
    ctrain.add_argument("--out", required=True)
    ctrain.add_argument("--seed", type=int, default=0)
    ctrain.set_defaults(func=cmd_classify_train)

    ceval = csub.add_parser("eval")
    ceval.add_argument("--corpus", required=True)
    ceval.add_argument("--taxonomy")
    ceval.add_argument("--k", type=int, default=10)
    ceval.add_argument("--seed", type=int, default=0)
    ceval.add_argument("--json", action="store_true",
                       help="emit the full report as JSON")
    ceval.set_defaults(func=cmd_classify_eval)

    cpredict = csub.add_parser("predict")
    cpredict.add_argument("--model", required=True)
    cpredict.add_argument("--text", default=None,
                          help="text to classify (default: stdin)")
    cpredict.set_defaults(func=cmd_classify_predict)

    synth_cmd = sub.add_parser("synth", help="synthetic trajectory tooling")
    ssub = synth_cmd.add_subparsers(dest="subcommand", required=True)

    sfit = ssub.add_parser("fit")
    sfit.add_argument("--trajectories", required=True)
    sfit.add_argument("--taxonomy")
    sfit.add_argument("--out", required=True)
    sfit.set_defaults(func=cmd_synth_fit)

    strain = ssub.add_parser("train")
    strain.add_argument("--trajectories", required=True)
    strain.add_argument("--taxonomy")
    strain.add_argument("--config", default=None, help="AAE config JSON file")
    strain.add_argument("--out", required=True)
    strain.set_defaults(func=cmd_synth_train)

    ssample = ssub.add_parser("sample")
    ssample.add_argument("--model", required=True)
    ssample.add_argument("--n", type=int, required=True)
    ssample.add_argument("--seed", type=int, default=0)
    ssample.set_defaults(func=cmd_synth_sample)

    sreport = ssub.add_parser("report")
    sreport.add_argument("--real", required=True)
    sreport.add_argument("--synthetic", required=True)
    sreport.add_argument("--taxonomy")
    sreport.set_defaults(func=cmd_synth_report)

    ingest = sub.add_parser("ingest", help="apply graph records to a graph file")
    ingest.add_argument("--graph", required=True,
                        help="graph file to create or extend")
    ingest.add_argument("--taxonomy")
    ingest.add_argument("--input", default=None,
                        help="records file (default: stdin)")
    ingest.set_defaults(func=cmd_ingest)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphError, TaxonomyError, querydsl.QueryError, nlp.NlpError,
            synth.SynthError, matching.MatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
