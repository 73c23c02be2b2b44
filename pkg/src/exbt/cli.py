"""Command-line entry point wiring the whole pipeline.

Subcommands: classify, find-throws, instrument, pool, guard, prompt,
sweep, generate, eval. Every artifact-producing run writes a manifest
(input digests, seed, template id, backend kind, stage counters) so a
rerun with the stub backend reproduces outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from exbt import __version__
from exbt.classifier import split_test_suite
from exbt.config import load_config
from exbt.corpus import collect_training_corpus, write_corpus
from exbt.errors import ExbtError
from exbt.genbackend import (
    GenerationParams,
    RequestLog,
    digest,
    extract_candidate,
    generate_many,
    make_backend,
)
from exbt.guardexpr import compute_guard_expression
from exbt.instrument import (
    instrument_print_exception,
    instrument_print_trace,
    parse_trace_log,
)
from exbt.jmodel import find_throw_sites, load_repo, reachable_throws
from exbt.manifest import Manifest, verify_manifest
from exbt.metrics import (
    CandidateScore,
    aggregate,
    report_table,
    score_candidate,
)
from exbt.prompting import (
    NoMatch,
    TEMPLATE_ID,
    assemble_prompt,
    bundle_to_record,
    collect_stacktrace_set,
    select_dest_test_file,
    sweep_targets,
    test_method_label,
)
from exbt.runners import JavacRunner, RecordedRunner
from exbt.stacktrace import exclude_test_and_util_frames, parse_stack_trace


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--config", default=None, help="KEY=VALUE config file")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--source-roots", default=None,
                   help="comma-separated test-root prefixes overriding src/main vs src/test")


def _load(repo: str, args) -> "RepoContext":
    roots = args.source_roots.split(",") if args.source_roots else None
    return load_repo(repo, test_roots=roots)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exbt",
        description="context pipeline for exceptional-behavior test generation",
    )
    parser.add_argument("--version", action="version", version=f"exbt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify test methods into EBT/non-EBT")
    p.add_argument("repo")
    _add_common(p)

    p = sub.add_parser("find-throws", help="list throw sites, optionally reachable ones")
    p.add_argument("repo")
    p.add_argument("--scope", choices=["main", "all"], default="main")
    p.add_argument("--from-method", default=None,
                   help="fqn#name[/arity]: list throws reachable from this method")
    p.add_argument("--max-depth", type=int, default=5)
    _add_common(p)

    p = sub.add_parser("instrument", help="rewrite sources to emit trace logs")
    p.add_argument("repo")
    p.add_argument("--out", required=True)
    p.add_argument("--log-path", default="exbt-trace.log")
    p.add_argument("--ebt", default=None,
                   help="fqn#name: print the exception-print rewrite of one EBT instead")
    _add_common(p)

    p = sub.add_parser("pool", help="build the trace pool from a recorded log")
    p.add_argument("repo")
    p.add_argument("--trace-log", default=None)
    p.add_argument("--cache", default=None)
    p.add_argument("--out", default=None)
    _add_common(p)

    p = sub.add_parser("guard", help="compute the guard expression for a trace")
    p.add_argument("--trace", required=True, help="file holding one raw JVM trace")
    p.add_argument("--repo", required=True)
    p.add_argument("--dest", default=None, help="destination test file for frame exclusion")
    _add_common(p)

    p = sub.add_parser("prompt", help="assemble one developer-oriented prompt")
    p.add_argument("--repo", required=True)
    p.add_argument("--mut", required=True, help="fqn#name[/arity]")
    p.add_argument("--throw", required=True, dest="throw_at", help="file:line")
    p.add_argument("--dest", default=None)
    p.add_argument("--name", default=None, help="requested test method name")
    p.add_argument("--trace-log", default=None)
    _add_common(p)

    p = sub.add_parser("sweep", help="machine-oriented sweep over all main throws")
    p.add_argument("repo")
    p.add_argument("--backend", default=None, choices=["stub", "http"])
    p.add_argument("--stub-file", default=None)
    p.add_argument("--trace-log", default=None)
    p.add_argument("--ebt-trace-log", default=None)
    p.add_argument("--runner-results", default=None)
    p.add_argument("--runner", default=None, choices=["recorded", "javac"])
    p.add_argument("--variant", default="no-name", choices=["no-name", "with-name"])
    p.add_argument("--max-in-flight", type=int, default=4,
                   help="bound on concurrent backend requests")
    p.add_argument("--out", default="exbt-out")
    _add_common(p)

    p = sub.add_parser("generate", help="send one instruction to the backend")
    p.add_argument("--instruction", required=True, help="file with the instruction text")
    p.add_argument("--backend", default=None, choices=["stub", "http"])
    p.add_argument("--stub-file", default=None)
    p.add_argument("--extract", action="store_true", help="print the extracted candidate")
    _add_common(p)

    p = sub.add_parser("eval", help="score candidates against references")
    p.add_argument("--candidates", required=True, help="JSONL {target, candidate, ...}")
    p.add_argument("--refs", default=None, help="JSONL {target, reference, exception_type}")
    p.add_argument("--repo", default=None)
    p.add_argument("--runner-results", default=None)
    p.add_argument("--out", default=None)
    _add_common(p)

    p = sub.add_parser("verify-manifest", help="check artifact digests of a manifest")
    p.add_argument("manifest")
    _add_common(p)
    return parser


def _emit(obj, as_json: bool) -> None:
    if as_json:
        print(json.dumps(obj, sort_keys=True))
    else:
        print(obj)


def _default_path(repo: str, rel: str, explicit: str | None) -> str | None:
    if explicit:
        return explicit
    candidate = Path(repo) / rel
    return str(candidate) if candidate.exists() else None


def cmd_classify(args) -> int:
    ctx = _load(args.repo, args)
    ebts, nonebts = split_test_suite(ctx)
    for t in sorted(ebts + nonebts, key=lambda t: (t.id.decl_file, t.id.decl_line)):
        print(
            json.dumps(
                {
                    "file": t.id.decl_file,
                    "method": t.id.name,
                    "kind": t.kind,
                    "pattern": t.pattern,
                    "expected_exception": t.expected_exception,
                },
                sort_keys=True,
            )
        )
    print(
        f"# {len(ebts)} EBTs, {len(nonebts)} non-EBTs, "
        f"{len(ctx.warnings)} warnings",
        file=sys.stderr,
    )
    return 0


def _resolve_mut(ctx, ref: str):
    if "#" not in ref:
        raise ExbtError(f"--mut must look like fqn#name[/arity], got {ref!r}")
    fqn, rest = ref.split("#", 1)
    arity = None
    if "/" in rest:
        rest, arity_s = rest.split("/", 1)
        arity = int(arity_s)
    matches = [
        m
        for m in ctx.all_method_ids()
        if m.fqn == fqn and m.name == rest and (arity is None or m.param_arity == arity)
    ]
    if not matches:
        raise ExbtError(f"method {ref!r} not found in repository")
    if len(matches) > 1:
        labels = ", ".join(m.label() for m in matches)
        raise ExbtError(f"method {ref!r} is ambiguous: {labels}")
    return matches[0]


def _resolve_throw(ctx, ref: str):
    path, _, line_s = ref.rpartition(":")
    line = int(line_s)
    for site in find_throw_sites(ctx, "all"):
        if site.line == line and (site.method.decl_file == path
                                  or site.method.decl_file.endswith("/" + path)
                                  or Path(site.method.decl_file).name == path):
            return site
    raise ExbtError(f"no throw statement at {ref!r}")


def cmd_find_throws(args) -> int:
    ctx = _load(args.repo, args)
    if args.from_method:
        mut = _resolve_mut(ctx, args.from_method)
        rows = [
            {
                "target": site.label(),
                "exception_type": site.exception_type,
                "path": [m.label() for m in path],
            }
            for site, path in reachable_throws(ctx, mut, args.max_depth)
        ]
    else:
        rows = [
            {
                "target": site.label(),
                "method": site.method.label(),
                "exception_type": site.exception_type,
                "statement": site.statement_text,
            }
            for site in find_throw_sites(ctx, args.scope)
        ]
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    return 0


def cmd_instrument(args) -> int:
    ctx = _load(args.repo, args)
    if args.ebt:
        ebts, _ = split_test_suite(ctx)
        wanted = [t for t in ebts if test_method_label(t) == args.ebt]
        if not wanted:
            raise ExbtError(f"EBT {args.ebt!r} not found")
        rewrite = instrument_print_exception(wanted[0])
        print(rewrite.rewritten)
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("instrument", seed=args.seed)
    manifest.add_input_tree("repo", args.repo)
    rewrites = instrument_print_trace(ctx, log_path=args.log_path)
    # copy the tree, then overlay rewrites and sidecars
    for rel in ctx.main_files + ctx.test_files:
        src = Path(args.repo) / rel
        dst = out / rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(src, dst)
    for rel, rewrite in rewrites.items():
        dst = out / rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(rewrite, str):  # generated helper source
            dst.write_text(rewrite, encoding="utf-8")
            manifest.add_artifact(dst, out)
            continue
        dst.write_text(rewrite.rewritten, encoding="utf-8")
        sidecar = out / (rel + ".offsets")
        sidecar.write_text(rewrite.offsets_json() + "\n", encoding="utf-8")
        manifest.add_artifact(dst, out)
        manifest.add_artifact(sidecar, out)
        manifest.bump("methods_instrumented", len(rewrite.inserted_lines))
    manifest.write(out / "manifest.json")
    print(f"instrumented tree written to {out}", file=sys.stderr)
    return 0


def cmd_pool(args) -> int:
    ctx = _load(args.repo, args)
    log_path = _default_path(args.repo, "logs/nonebt-traces.log", args.trace_log)
    if log_path is None:
        raise ExbtError("--trace-log is required (no default log found in repo)")
    _, nonebts = split_test_suite(ctx)
    trace_log = parse_trace_log(Path(log_path).read_text(encoding="utf-8"))
    pool = collect_stacktrace_set(nonebts, ctx, trace_log, cache_dir=args.cache)
    rows = [
        {
            "trace": [[f.class_fqn, f.method, f.file, f.line] for f in e.trace.frames],
            "source_test": test_method_label_from_mid(e.source_test),
            "throw_site": e.throw_site.label(),
        }
        for e in pool
    ]
    text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    print(
        f"# {len(pool)} pool entries, {trace_log.skipped_blocks} malformed blocks",
        file=sys.stderr,
    )
    return 0


def test_method_label_from_mid(mid) -> str:
    return f"{mid.fqn}#{mid.name}"


def cmd_guard(args) -> int:
    ctx = _load(args.repo, args)
    trace = parse_stack_trace(Path(args.trace).read_text(encoding="utf-8"))
    if args.dest:
        trace = exclude_test_and_util_frames(trace, args.dest, ctx)
    guard = compute_guard_expression(trace, ctx)
    print(guard.rendered)
    print(
        json.dumps(
            {
                "conditions": list(guard.conditions),
                "rendered": guard.rendered,
                "unresolved_names": list(guard.unresolved_names),
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_prompt(args) -> int:
    ctx = _load(args.repo, args)
    mut = _resolve_mut(ctx, args.mut)
    site = _resolve_throw(ctx, args.throw_at)
    dest = args.dest or select_dest_test_file(mut, ctx)
    if dest is None:
        raise ExbtError("no destination test file found; pass --dest")
    _, nonebts = split_test_suite(ctx)
    log_path = _default_path(args.repo, "logs/nonebt-traces.log", args.trace_log)
    pool = []
    if log_path:
        trace_log = parse_trace_log(Path(log_path).read_text(encoding="utf-8"))
        pool = collect_stacktrace_set(nonebts, ctx, trace_log)
    variant = "with-name" if args.name else "no-name"
    outcome = assemble_prompt(
        mut, site, dest, pool, nonebts, ctx,
        seed=args.seed, variant=variant, test_name=args.name,
    )
    if isinstance(outcome, NoMatch):
        _emit({"status": "no-match", "reason": outcome.reason}, True)
        return 0
    if args.json:
        print(json.dumps(bundle_to_record(outcome, site), sort_keys=True))
    else:
        print(outcome.rendered_instruction)
    return 0


def _make_runner(args, ctx):
    if args.runner == "javac":
        return JavacRunner(ctx)
    results_path = _default_path(args.repo, "canned/runner-results.json", args.runner_results)
    if args.runner == "recorded" and results_path is None:
        raise ExbtError("--runner recorded needs --runner-results")
    if results_path is not None:
        return RecordedRunner.from_file(results_path)
    return None


def cmd_sweep(args) -> int:
    ctx = _load(args.repo, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = load_config(args.config)
    backend_kind = cfg.get("backend_kind", args.backend, "stub")
    manifest = Manifest(
        "sweep", seed=args.seed, template_id=TEMPLATE_ID, backend_kind=backend_kind
    )
    manifest.add_input_tree("repo", args.repo)

    ebts, nonebts = split_test_suite(ctx)
    manifest.bump("tests_classified", len(ebts) + len(nonebts))

    # training-path demonstration: corpus from EBT traces when available
    ebt_log_path = _default_path(args.repo, "logs/ebt-traces.log", args.ebt_trace_log)
    corpus_examples = []
    if ebt_log_path:
        manifest.add_input("ebt_trace_log", ebt_log_path)
        ebt_log = parse_trace_log(Path(ebt_log_path).read_text(encoding="utf-8"))
        corpus_examples, corpus_skipped = collect_training_corpus(
            ebts, nonebts, ctx, ebt_log, repo_name=Path(args.repo).name
        )
        manifest.bump("corpus_examples_built", len(corpus_examples))
        manifest.bump("corpus_examples_skipped", len(corpus_skipped))
        manifest.bump("guards_computed", len(corpus_examples))
        corpus_path = out / "corpus.jsonl"
        write_corpus(corpus_examples, corpus_path)
        manifest.add_artifact(corpus_path, out)

    # inference path: pool, prompts, generation, evaluation
    log_path = _default_path(args.repo, "logs/nonebt-traces.log", args.trace_log)
    if log_path is None:
        raise ExbtError("--trace-log is required (no default log found in repo)")
    manifest.add_input("nonebt_trace_log", log_path)
    trace_log = parse_trace_log(Path(log_path).read_text(encoding="utf-8"))
    pool = collect_stacktrace_set(nonebts, ctx, trace_log)
    manifest.bump("pool_builds")
    manifest.bump("pool_entries", len(pool))

    results = sweep_targets(
        ctx, pool, nonebts, seed=args.seed, variant=args.variant,
        counters=manifest.counters,
    )

    stub_file = _default_path(args.repo, "canned/completions.json", args.stub_file)
    if backend_kind == "stub" and stub_file:
        manifest.add_input("stub_completions", stub_file)
    request_log = RequestLog()
    backend = make_backend(backend_kind, stub_file=stub_file)
    params = GenerationParams(seed=args.seed)

    runner = _make_runner(args, ctx)
    gold_by_target = {
        e.prompt.throw_site.label(): e.gold_ebt for e in corpus_examples
    }

    bundle_rows = []
    candidate_rows = []
    scores: list[CandidateScore] = []
    targets = [site.label() for site, _ in results]
    matched = [(site, o) for site, o in results if not isinstance(o, NoMatch)]
    completions = generate_many(
        backend,
        [o.rendered_instruction for _, o in matched],
        params,
        max_in_flight=args.max_in_flight,
        log=request_log,
    )
    completion_by_target = {
        site.label(): completion for (site, _), completion in zip(matched, completions)
    }
    for site, outcome in results:
        bundle_rows.append(bundle_to_record(outcome, site))
        if isinstance(outcome, NoMatch):
            continue
        completion = completion_by_target[site.label()]
        candidate = extract_candidate(completion)
        manifest.bump("generations")
        row = {
            "target": site.label(),
            "instruction_digest": digest(outcome.rendered_instruction),
            "completion_digest": digest(completion),
        }
        if candidate is None:
            row["status"] = "no-candidate"
            candidate_rows.append(row)
            continue
        manifest.bump("candidates_extracted")
        score = score_candidate(
            candidate,
            gold_by_target.get(site.label()),
            site.exception_type,
            site.label(),
            bundle=outcome,
            runner=runner,
        )
        scores.append(score)
        row.update(
            {
                "status": "generated",
                "candidate": candidate,
                "xmatch": score.xmatch,
                "xmatch_strict": score.xmatch_strict,
                "bleu": score.bleu,
                "code_bleu": score.code_bleu,
                "edit_sim": score.edit_sim,
                "matched_e": score.matched_e,
                "compilable": score.compilable,
                "runnable": score.runnable,
                "covers_target": score.covers_target,
            }
        )
        candidate_rows.append(row)

    agg = aggregate(scores, targets)
    reasons = {}
    for row in bundle_rows:
        if row["status"] == "no-match":
            reasons[row["reason"]] = reasons.get(row["reason"], 0) + 1
    report = {
        "aggregate": agg,
        "no_match_reasons": reasons,
        "targets": targets,
        "seed": args.seed,
        "template_id": TEMPLATE_ID,
        "backend_kind": backend_kind,
    }

    _write_jsonl(out / "bundles.jsonl", bundle_rows)
    _write_jsonl(out / "candidates.jsonl", candidate_rows)
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / "report.txt").write_text(report_table(agg) + "\n", encoding="utf-8")
    request_log.write(out / "requests.jsonl")
    for name in ("bundles.jsonl", "candidates.jsonl", "report.json", "report.txt",
                 "requests.jsonl"):
        manifest.add_artifact(out / name, out)
    manifest.write(out / "manifest.json")
    print(report_table(agg))
    print(f"# artifacts in {out}", file=sys.stderr)
    return 0


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def cmd_generate(args) -> int:
    instruction = Path(args.instruction).read_text(encoding="utf-8")
    cfg = load_config(args.config)
    backend_kind = cfg.get("backend_kind", args.backend, "stub")
    backend = make_backend(backend_kind, stub_file=args.stub_file)
    completion = backend.generate(instruction, GenerationParams(seed=args.seed))
    if args.extract:
        candidate = extract_candidate(completion)
        if candidate is None:
            raise ExbtError("no test method found in the completion")
        print(candidate)
    else:
        print(completion)
    return 0


def cmd_eval(args) -> int:
    candidates = _read_jsonl(args.candidates)
    refs = {r["target"]: r for r in _read_jsonl(args.refs)} if args.refs else {}
    ctx = _load(args.repo, args) if args.repo else None
    runner = None
    if args.runner_results:
        runner = RecordedRunner.from_file(args.runner_results)
    scores = []
    targets = sorted({row["target"] for row in candidates} | set(refs))
    for row in candidates:
        candidate = row.get("candidate")
        if not candidate:
            continue
        ref_row = refs.get(row["target"], {})
        exception_type = row.get("exception_type") or ref_row.get("exception_type", "")
        bundle = None
        if runner is not None and ctx is not None:
            bundle = _bundle_for_target(ctx, row["target"])
        scores.append(
            score_candidate(
                candidate,
                ref_row.get("reference"),
                exception_type,
                row["target"],
                bundle=bundle,
                runner=runner if bundle is not None else None,
            )
        )
    agg = aggregate(scores, targets)
    report = {"aggregate": agg, "targets": targets}
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    print(report_table(agg))
    return 0


def _bundle_for_target(ctx, target: str):
    """Minimal bundle carrying the throw site, for recorded runners."""
    from exbt.prompting import PromptBundle
    from exbt.guardexpr import GuardExpression
    from exbt.stacktrace import StackTrace

    for site in find_throw_sites(ctx, "all"):
        if site.label() == target:
            return PromptBundle(
                mut=site.method,
                mut_source="",
                throw_site=site,
                dest_path="",
                dest_skeleton="",
                trace=StackTrace(()),
                guard=GuardExpression((), ()),
                nonebts=(),
                variant="no-name",
                test_name=None,
                template_id=TEMPLATE_ID,
                rendered_instruction="",
            )
    return None


def _read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def cmd_verify_manifest(args) -> int:
    problems = verify_manifest(args.manifest)
    for p in problems:
        print(p, file=sys.stderr)
    return 1 if problems else 0


_HANDLERS = {
    "classify": cmd_classify,
    "find-throws": cmd_find_throws,
    "instrument": cmd_instrument,
    "pool": cmd_pool,
    "guard": cmd_guard,
    "prompt": cmd_prompt,
    "sweep": cmd_sweep,
    "generate": cmd_generate,
    "eval": cmd_eval,
    "verify-manifest": cmd_verify_manifest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ExbtError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
