"""Command line entry point: ``rellink <command> [flags]``.

Exit status is 0 on success, 1 for bad input (flags, files, data) and 2 for
internal errors. Diagnostics go to stderr; results to stdout or ``--out``.
"""

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .errors import RelError

log = logging.getLogger("rellink")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as f:
            yield f


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_linker(args):
    from .candidates import SelectionParams
    from .mention import DetectorConfig
    from .pipeline import EntityLinker

    return EntityLinker.from_files(
        args.store, args.model, preload=args.preload,
        selection=SelectionParams(k1=args.k1, k2=args.k2, k=args.k, n_context=args.n_context),
        detector=DetectorConfig(max_ngram=args.max_ngram, min_link_probability=args.min_link_prob),
    )


def _linker_flags(p, required=True):
    p.add_argument("--store", required=required, help="knowledge store file")
    p.add_argument("--model", required=required, help="ED model file")
    p.add_argument("--preload", action="store_true", help="load all embeddings into memory")
    p.add_argument("--k1", type=int, default=4)
    p.add_argument("--k2", type=int, default=3)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--n-context", type=int, default=50)
    p.add_argument("--max-ngram", type=int, default=5)
    p.add_argument("--min-link-prob", type=float, default=0.001)


# ---------------------------------------------------------------- commands


def cmd_build_index(args) -> int:
    from .index_builder import (ParseStats, RedirectTable, build_store, combine_priors,
                                compute_wiki_prior, load_uniform_dict, parse_anchor_corpus)
    from .store import ingest_embeddings

    if not (args.anchors or args.wikitext or args.dict):
        raise UsageError("build-index: give at least one of --anchors, --wikitext, --dict")
    emb = args.embeddings.split(",")
    if len(emb) > 2:
        raise UsageError("--embeddings takes WORDS.vec[,ENTITIES.vec]")
    words, entities = ingest_embeddings(emb[0], emb[1] if len(emb) == 2 else None,
                                        entity_prefix=args.entity_prefix)
    redirects = RedirectTable.from_tsv(args.redirects) if args.redirects else RedirectTable()
    stats = ParseStats()
    counts = []
    if args.anchors:
        counts += parse_anchor_corpus(args.anchors, redirects, fmt="tsv",
                                      case_sensitive=args.case_sensitive, stats=stats)
    if args.wikitext:
        counts += parse_anchor_corpus(args.wikitext, redirects, fmt="wikitext",
                                      case_sensitive=args.case_sensitive, stats=stats)
    uniform = load_uniform_dict(args.dict, redirects, args.case_sensitive) if args.dict else {}
    combined = combine_priors(compute_wiki_prior(counts), uniform, args.max_candidates)
    report = build_store((words, entities), combined, args.out,
                         case_sensitive=args.case_sensitive, max_candidates=args.max_candidates)
    print(json.dumps({
        "out": args.out, "words": len(words), "entities": len(entities),
        "surfaces": report.surfaces, "entries": report.entries,
        "dropped_entities": report.dropped_entities, "dropped_surfaces": report.dropped_surfaces,
        "links": stats.links, "malformed_anchors": stats.skipped_unbalanced,
        "redirect_cycles": len(redirects.cycles),
    }, indent=2))
    return 0


def cmd_train(args) -> int:
    from .datasets import read_jsonl
    from .ed import EDHyperParams
    from .store import KnowledgeStore
    from .synthetic import make_synthetic_corpus
    from .training import TrainConfig, train

    if args.synthetic:
        corpus = make_synthetic_corpus(args.synthetic, seed=args.seed)
        store_path, train_docs, val_docs = corpus.store_path, corpus.train, corpus.val
        log.info("synthetic corpus written to %s", args.synthetic)
    else:
        if not (args.store and args.train):
            raise UsageError("train: --store and --train are required without --synthetic")
        store_path = args.store
        train_docs = read_jsonl(args.train)
        val_docs = read_jsonl(args.val) if args.val else []
    store = KnowledgeStore.open(store_path, preload=True)
    hyper = EDHyperParams(K=args.relations, d=store.dim, margin=args.margin,
                          lbp_iters=args.lbp_iters, lbp_damping=args.damping,
                          attention_keep=args.attention_keep, scorer_hidden=args.hidden)
    config = TrainConfig(epochs=args.epochs, seed=args.seed)
    params, history = train(train_docs, val_docs, store, config, hyper)
    params.save(args.out)
    with _output(args.history) as f:
        f.write(json.dumps(history.to_dict(), indent=2) + "\n")
    return 0


def _read_documents(path):
    """JSON lines with at least a "text" field; optional "spans"."""
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError:
                raise RelError(f"{path}:{lineno}: not valid JSON") from None
            if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
                raise RelError(f"{path}:{lineno}: record needs a string 'text'")
            docs.append(obj)
    return docs


def cmd_link(args) -> int:
    from .mention import read_span_tsv

    if (args.text is None) == (args.input is None):
        raise UsageError("link: give exactly one of --text or --input")
    linker = _load_linker(args)
    with _output(args.out) as out:
        if args.text is not None:
            spans = read_span_tsv(args.spans) if args.spans else None
            records = [a.to_record() for a in linker.link(args.text, spans)]
            out.write(json.dumps(records) + "\n")
        else:
            docs = _read_documents(args.input)
            results = _map(lambda d: linker.link(d["text"], d.get("spans")), docs, args.jobs)
            for anns in results:
                out.write(json.dumps([a.to_record() for a in anns]) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    from .datasets import read_jsonl
    from .evaluation import score_ed, score_el

    gold_docs = read_jsonl(args.gold)
    golds = [d.mentions for d in gold_docs]
    if args.pred:
        pred_docs = read_jsonl(args.pred)
        preds = [d.mentions for d in pred_docs]
    else:
        if not (args.store and args.model):
            raise UsageError("evaluate: give --pred, or --store and --model")
        linker = _load_linker(args)
        if args.mode == "ed":
            fn = lambda d: linker.disambiguate(d.text, [(m.start, m.length) for m in d.mentions])
        else:
            fn = lambda d: linker.link(d.text)
        preds = _map(fn, gold_docs, args.jobs)
    report = (score_ed if args.mode == "ed" else score_el)(preds, golds)
    with _output(args.out) as out:
        if args.format == "json":
            out.write(json.dumps(report.to_dict(), indent=2) + "\n")
        else:
            out.write(report.format_table() + "\n")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    try:
        linker = _load_linker(args)
    except (OSError, RelError) as exc:
        print(f"rellink serve: cannot load store/model: {exc}", file=sys.stderr)
        return 1
    serve(linker, host=args.host, port=args.port, workers=args.workers, max_body_bytes=args.max_body)
    return 0


def cmd_bench(args) -> int:
    from .ed import EDHyperParams, EDParams
    from .evaluation import measure_efficiency
    from .pipeline import EntityLinker
    from .store import KnowledgeStore
    from .synthetic import make_profile_fixture

    with tempfile.TemporaryDirectory() as tmp:
        if args.synthetic:
            fixture = make_profile_fixture(tmp, seed=args.seed, n_docs=args.n_docs)
            store = KnowledgeStore.open(fixture.store_path, preload=args.preload)
            params = EDParams(EDHyperParams(d=store.dim), seed=args.seed)
            linker = EntityLinker(store, params)
            docs = fixture.docs
        else:
            if not (args.store and args.model and args.docs):
                raise UsageError("bench: give --synthetic, or --store, --model and --docs")
            linker = _load_linker(args)
            docs = [d["text"] for d in _read_documents(args.docs)][:args.n_docs]
        report = measure_efficiency(docs, linker)
        linker.store.close()
    with _output(args.out) as out:
        if args.format == "json":
            out.write(json.dumps(report.to_dict(), indent=2) + "\n")
        else:
            out.write(report.format_table() + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rellink", description="Entity linking toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-index", help="build a knowledge store from priors and embeddings")
    p.add_argument("--anchors", nargs="+", help="TSV count files: surface, entity, count")
    p.add_argument("--wikitext", nargs="+", help="wikitext files with [[Target|anchor]] links")
    p.add_argument("--dict", nargs="+", help="TSV dictionary files: surface, entity")
    p.add_argument("--redirects", nargs="+", help="TSV redirect files: alias, canonical")
    p.add_argument("--embeddings", required=True, help="WORDS.vec[,ENTITIES.vec]")
    p.add_argument("--entity-prefix", default="ENTITY/")
    p.add_argument("--case-sensitive", action="store_true")
    p.add_argument("--max-candidates", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("train", help="train the ED model")
    p.add_argument("--store")
    p.add_argument("--train", help="training documents (JSON lines)")
    p.add_argument("--val", help="validation documents (JSON lines)")
    p.add_argument("--synthetic", metavar="DIR",
                   help="generate the planted synthetic corpus into DIR and train on it")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--history", help="write training history JSON here (default stdout)")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--relations", type=int, default=3)
    p.add_argument("--margin", type=float, default=0.9)
    p.add_argument("--lbp-iters", type=int, default=10)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--attention-keep", type=int, default=25)
    p.add_argument("--hidden", type=int, default=100)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("link", help="link text or a file of documents")
    _linker_flags(p)
    p.add_argument("--text")
    p.add_argument("--spans", help="TSV spans for --text (disambiguation only)")
    p.add_argument("--input", help="JSON lines with 'text' and optional 'spans'")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("evaluate", help="strong-matching InKB scores")
    _linker_flags(p, required=False)
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", help="predictions (JSON lines); otherwise run --store/--model")
    p.add_argument("--mode", choices=("el", "ed"), default="el")
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP API")
    _linker_flags(p, required=False)
    p.add_argument("--host", default=os.environ.get("REL_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(os.environ.get("REL_PORT", "5555")))
    p.add_argument("--workers", type=int, default=int(os.environ.get("REL_WORKERS", "4")))
    p.add_argument("--max-body", type=int, default=1_000_000)
    p.set_defaults(func=cmd_serve, store=os.environ.get("REL_STORE"),
                   model=os.environ.get("REL_MODEL"),
                   preload=os.environ.get("REL_PRELOAD", "") in ("1", "true", "yes"))

    p = sub.add_parser("bench", help="per-stage timing report")
    _linker_flags(p, required=False)
    p.add_argument("--docs", help="JSON lines documents")
    p.add_argument("--synthetic", action="store_true",
                   help="time a generated fixture of ~323-word, ~42-mention documents")
    p.add_argument("--n-docs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"rellink: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except (RelError, OSError) as exc:
        print(f"rellink: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"rellink: internal error: {exc!r}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
