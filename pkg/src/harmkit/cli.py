"""Command-line entry point wiring the pipeline stages.

Exit codes: 0 ok, 2 config error, 3 data validation error, 4 provider error,
5 shortfall. Failures emit a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, clustering, corpus, evaluate, rulebase, student, synthgen
from .annotation import DecisionConflict
from .config import PipelineConfig, write_manifest
from .errors import (
    ConfigError,
    DataValidationError,
    HarmkitError,
    ProviderError,
    ShortfallError,
)
from .llmclient import LlmClient, MockProvider, ProviderConfig

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PROVIDER = 4
EXIT_SHORTFALL = 5


def _fail(code: str, message: str, exit_code: int, detail=None) -> int:
    sys.stderr.write(json.dumps(
        {"code": code, "message": message, "detail": detail},
        ensure_ascii=False) + "\n")
    return exit_code


def _resolve_provider(spec: str, cfg: PipelineConfig) -> tuple[ProviderConfig, object]:
    """Maps a --provider value to (config, provider object).

    mock-teacher | mock-echo | mock-text:<s> | mock-script:<path> use the
    in-process mock; config:<name> reads the named section of the config file.
    """
    if spec == "mock-teacher":
        return ProviderConfig(model="mock-teacher", rpm=100000), MockProvider()
    if spec == "mock-echo":
        return (ProviderConfig(model="mock-echo", rpm=100000),
                MockProvider(default={"echo_last": True}))
    if spec.startswith("mock-text:"):
        return (ProviderConfig(model="mock-text", rpm=100000),
                MockProvider(default={"text": spec.split(":", 1)[1]}))
    if spec.startswith("mock-script:"):
        return (ProviderConfig(model="mock-script", rpm=100000),
                MockProvider.from_script(spec.split(":", 1)[1]))
    if spec.startswith("config:"):
        section = cfg.provider_section(spec.split(":", 1)[1])
        pc = ProviderConfig.from_json(section)
        return pc, None  # LlmClient builds the HTTP provider
    raise ConfigError(f"unknown provider spec {spec!r}")


def _client(spec: str, cfg: PipelineConfig) -> LlmClient:
    pc, provider = _resolve_provider(spec, cfg)
    return LlmClient(pc, provider=provider)


def _load_corpus(path: str) -> corpus.Corpus:
    result = corpus.ingest_jsonl(path)
    if result.errors:
        raise DataValidationError(
            f"{path}: {len(result.errors)} malformed lines "
            f"(first: line {result.errors[0].line}: {result.errors[0].message})")
    return result.corpus


def _categories(arg: str) -> list[corpus.Category]:
    if arg in ("all", ""):
        return list(corpus.CATEGORY_ORDER)
    return [corpus.Category.parse(name.strip()) for name in arg.split(",")]


# ---------------------------------------------------------------- commands


def cmd_ingest(args, cfg) -> int:
    result = corpus.ingest_jsonl(args.input, default_source=args.source)
    corpus.export_jsonl(result.corpus, args.out)
    if result.errors:
        report = [{"line": e.line, "message": e.message} for e in result.errors]
        Path(args.out + ".errors.json").write_text(
            json.dumps(report, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8")
    write_manifest(args.out, "ingest", vars(args), [args.input])
    print(f"ingested {len(result.corpus)} samples, {len(result.errors)} errors")
    return 0


def cmd_dedup(args, cfg) -> int:
    deduped = corpus.deduplicate(_load_corpus(args.input))
    corpus.export_jsonl(deduped, args.out)
    write_manifest(args.out, "dedup", vars(args), [args.input])
    print(f"kept {len(deduped)} samples")
    return 0


def cmd_embed(args, cfg) -> int:
    data = _load_corpus(args.input)
    client = _client(args.provider, cfg)
    texts = [s.text for s in data]
    vectors = client.embed(texts)
    with Path(args.out).open("w", encoding="utf-8") as fh:
        for sample, vec in zip(data, vectors):
            fh.write(json.dumps({"id": sample.id, "vector": vec}) + "\n")
    write_manifest(args.out, "embed", vars(args), [args.input])
    print(f"embedded {len(vectors)} samples")
    return 0


def cmd_cluster(args, cfg) -> int:
    embeddings = clustering.load_embeddings(args.embeddings)
    model = clustering.kmeans(embeddings, k=args.k, max_iter=args.max_iter,
                              tol=args.tol, seed=args.seed)
    clustering.save_model(model, args.out)
    write_manifest(args.out, "cluster", vars(args), [args.embeddings],
                   seed=args.seed)
    print(f"k={model.k} inertia={model.inertia:.6g} "
          f"iterations={model.iterations_run}")
    return 0


def cmd_sample(args, cfg) -> int:
    model = clustering.load_model(args.model)
    ids = clustering.cluster_sample(model, per_cluster=args.per_cluster,
                                    seed=args.seed)
    Path(args.out).write_text(json.dumps({"ids": ids}, indent=2) + "\n",
                              encoding="utf-8")
    inputs = [args.model]
    if args.corpus:
        data = _load_corpus(args.corpus)
        wanted = set(ids)
        subset = corpus.Corpus(f"{data.name}-sampled",
                               [s for s in data if s.id in wanted])
        corpus.export_jsonl(subset, args.out_corpus)
        inputs.append(args.corpus)
        print(f"sampled {len(ids)} ids; wrote {len(subset)} samples")
    else:
        print(f"sampled {len(ids)} ids")
    write_manifest(args.out, "sample", vars(args), inputs, seed=args.seed)
    return 0


def cmd_serve(args, cfg) -> int:
    from .service import AnnotationStore, serve

    rb = rulebase.load_rulebase(args.rulebase) if args.rulebase \
        else rulebase.default_rulebase()
    candidates = _load_corpus(args.candidates)
    store = AnnotationStore(rb, out_dir=args.out_dir)
    store.restore_session(args.session_id, candidates)
    print(f"session {args.session_id!r}: {len(candidates)} candidates, "
          f"rule base v{store.rulebase.version}")
    serve(store, host=args.host, port=args.port)
    return 0


def cmd_rules(args, cfg) -> int:
    rb = rulebase.load_rulebase(args.rulebase) if args.rulebase \
        else rulebase.default_rulebase()
    if args.action == "list":
        for rule in rb.rules:
            print(f"{rule.id}\t{rule.category.canonical}\t{rule.ordinal}\t{rule.title}")
        print(f"version {rb.version}, {len(rb.rules)} rules")
        return 0
    if args.action == "render":
        print(rulebase.render_rules(rb))
        return 0
    if args.action == "add":
        if not (args.id and args.category and args.body):
            raise ConfigError("rules add requires --id, --category, --body")
        category = corpus.Category.parse(args.category)
        rule = rulebase.Rule(
            id=args.id, category=category,
            ordinal=rb.next_ordinal(category),
            title=args.title or "", body=args.body,
            hint_terms=tuple(t for t in (args.hints or "").split(",") if t))
        updated = rulebase.add_rule(rb, rule)
        out = args.out or args.rulebase
        if not out:
            raise ConfigError("rules add requires --out when editing the bundled base")
        rulebase.save_rulebase(updated, out)
        print(f"rule {args.id} added; version {updated.version}")
        return 0
    raise ConfigError(f"unknown rules action {args.action!r}")


def cmd_gen(args, cfg) -> int:
    rb = rulebase.load_rulebase(args.rulebase) if args.rulebase \
        else rulebase.default_rulebase()
    tables = synthgen.AttributeTables.load(args.tables)
    cats = _categories(args.categories)
    specs = synthgen.plan_scenarios(cats, args.n, args.seed, tables, rb,
                                    oversample=args.oversample)
    client = _client(args.provider, cfg)
    gen = synthgen.GenConfig(model=args.model or "mock-teacher",
                             temperature=args.temperature,
                             top_k=args.top_k)
    cands = synthgen.generate_candidates(specs, client, gen)
    synthgen.save_candidates(cands, args.out)
    inputs = [p for p in (args.rulebase, args.tables) if p]
    write_manifest(args.out, "gen", vars(args), inputs, seed=args.seed)
    failed = sum(1 for c in cands if c.status == synthgen.STATUS_FAILED)
    print(f"generated {len(cands)} candidates ({failed} failed)")
    return 0


def cmd_filter(args, cfg) -> int:
    cands = synthgen.load_candidates(args.input)
    keywords = synthgen.RefusalKeywords.load(args.keywords_file)
    filtered = synthgen.filter_refusals(cands, keywords)
    filtered = synthgen.dedup_candidates(filtered)
    synthgen.save_candidates(filtered, args.out)
    inputs = [args.input] + ([args.keywords_file] if args.keywords_file else [])
    write_manifest(args.out, "filter", vars(args), inputs)
    removed = sum(1 for c in filtered if c.status == synthgen.STATUS_FILTERED)
    print(f"filtered {removed} of {len(filtered)} candidates")
    return 0


def cmd_assemble(args, cfg) -> int:
    cands = synthgen.load_candidates(args.input)
    accepted = synthgen.assemble_dataset(cands, n=args.n, seed=args.seed)
    synthgen.save_candidates(accepted, args.out)
    write_manifest(args.out, "assemble", vars(args), [args.input],
                   seed=args.seed)
    print(f"accepted {len(accepted)} candidates")
    return 0


def cmd_export_sft(args, cfg) -> int:
    cands = synthgen.load_candidates(args.input)
    rb = rulebase.load_rulebase(args.rulebase) if args.rulebase \
        else rulebase.default_rulebase()
    count = synthgen.export_sft(cands, rb, args.out)
    inputs = [args.input] + ([args.rulebase] if args.rulebase else [])
    write_manifest(args.out, "export-sft", vars(args), inputs)
    print(f"exported {count} SFT records")
    return 0


def cmd_train_student(args, cfg) -> int:
    records = synthgen.load_sft(args.sft)
    fx = student.FeatureExtractor(
        orders=tuple(int(o) for o in args.orders.split(",")),
        dim=args.dim, seed=args.feature_seed)
    hyper = student.TrainConfig(epochs=args.epochs, lr=args.lr,
                                batch_size=args.batch_size, l2=args.l2,
                                seed=args.seed)
    model, trace = student.train(records, fx, hyper)
    model.metadata["loss_trace"] = trace
    student.save_model(model, args.out)
    write_manifest(args.out, "train-student", vars(args), [args.sft],
                   seed=args.seed)
    print(f"trained on {len(records)} records; "
          f"loss {trace[0]:.6f} -> {trace[-1]:.6f}")
    return 0


def cmd_predict(args, cfg) -> int:
    model = student.load_model(args.model)
    category, probs = student.predict(model, model.feature, args.text)
    print(json.dumps({
        "category": category.canonical,
        "category_zh": category.zh,
        "probabilities": {c.canonical: float(p)
                          for c, p in zip(corpus.CATEGORY_ORDER, probs)},
    }, ensure_ascii=False, indent=2))
    return 0


def cmd_eval(args, cfg) -> int:
    data = _load_corpus(args.corpus)
    rb = None
    if not args.no_rules:
        rb = rulebase.load_rulebase(args.rules) if args.rules \
            else rulebase.default_rulebase()
    client = _client(args.provider, cfg)
    run = evaluate.EvalRunConfig(model=args.model or args.provider,
                                 temperature=args.temperature,
                                 with_knowledge=rb is not None)
    report, _ = evaluate.evaluate_model(client, data, rb, run,
                                        log_path=args.log)
    Path(args.out).write_text(
        json.dumps(report.to_json(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")
    inputs = [args.corpus] + ([args.rules] if args.rules else [])
    write_manifest(args.out, "eval", vars(args), inputs)
    print(report.render_table())
    return 0


def cmd_report(args, cfg) -> int:
    report = evaluate.recompute_from_log(args.log)
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_json(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8")
        write_manifest(args.out, "report", vars(args), [args.log])
    print(report.render_table())
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harmkit",
        description="Chinese harmful-content detection pipeline toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="pipeline config JSON; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read raw JSONL into the canonical schema")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source", default="file")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("dedup", help="drop byte-identical texts per category")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_dedup)

    p = sub.add_parser("embed", help="fetch sentence embeddings for a corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--provider", default="mock-teacher")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("cluster", help="k-means over an embeddings file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=clustering.DEFAULT_MAX_ITER)
    p.add_argument("--tol", type=float, default=clustering.DEFAULT_TOL)
    p.set_defaults(fn=cmd_cluster)

    p = sub.add_parser("sample", help="cluster-stratified id sampling")
    p.add_argument("--model", required=True)
    p.add_argument("--per-cluster", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus", help="also write the matching corpus subset")
    p.add_argument("--out-corpus", default="sampled.jsonl")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--candidates", required=True)
    p.add_argument("--rulebase")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--session-id", default="default")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("rules", help="inspect or edit a rule base file")
    p.add_argument("action", choices=["list", "render", "add"])
    p.add_argument("--rulebase")
    p.add_argument("--out")
    p.add_argument("--id")
    p.add_argument("--category")
    p.add_argument("--title")
    p.add_argument("--body")
    p.add_argument("--hints", help="comma-separated hint terms")
    p.set_defaults(fn=cmd_rules)

    p = sub.add_parser("gen", help="sample scenarios and query the teacher")
    p.add_argument("--categories", default="all")
    p.add_argument("--n", type=int, required=True,
                   help="target accepted count per category")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oversample", type=float, default=1.3)
    p.add_argument("--rulebase")
    p.add_argument("--tables", dest="tables")
    p.add_argument("--provider", default="mock-teacher")
    p.add_argument("--model")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--top-k", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("filter", help="refusal filtering plus per-category dedup")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--keywords-file")
    p.set_defaults(fn=cmd_filter)

    p = sub.add_parser("assemble", help="balanced selection of accepted candidates")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_assemble)

    p = sub.add_parser("export-sft", help="write SFT records for accepted candidates")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--rulebase")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export_sft)

    p = sub.add_parser("train-student", help="train the desk-scale classifier")
    p.add_argument("--sft", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--l2", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=2 ** 18)
    p.add_argument("--orders", default="1,2,3")
    p.add_argument("--feature-seed", type=int, default=0)
    p.set_defaults(fn=cmd_train_student)

    p = sub.add_parser("predict", help="classify one text with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("eval", help="zero-shot evaluation over a labeled corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--rules")
    p.add_argument("--no-rules", action="store_true")
    p.add_argument("--provider", default="mock-echo")
    p.add_argument("--model")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default="eval-log.jsonl")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="recompute a report from a per-sample log")
    p.add_argument("--log", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = PipelineConfig.load(args.config)
        return args.fn(args, cfg)
    except ConfigError as exc:
        return _fail("config_error", str(exc), EXIT_CONFIG)
    except ShortfallError as exc:
        return _fail("shortfall", str(exc), EXIT_SHORTFALL,
                     {"requested": exc.requested, "counts": exc.counts})
    except (DataValidationError, DecisionConflict) as exc:
        return _fail("data_error", str(exc), EXIT_DATA)
    except ProviderError as exc:
        return _fail("provider_error", str(exc), EXIT_PROVIDER)
    except HarmkitError as exc:
        return _fail("error", str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
