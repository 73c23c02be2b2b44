"""Training-corpus assembly: one example per traced exceptional test.

Every exceptional test with a resolvable trace becomes a (prompt, gold
test) pair: the destination file is the test's own file (with all test
methods stripped from the skeleton), the trace names the method under test
and the target throw, the guard is computed from the trace and relevant
non-exceptional tests are attached. Tests without usable traces are
skipped with a recorded reason.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace

from exbt.classifier import TestMethod
from exbt.errors import EmptyAfterExclusion, ExbtError
from exbt.guardexpr import GuardExpression, compute_guard_expression
from exbt.instrument import TraceLog
from exbt.jmodel import MethodId, RepoContext, ThrowSite
from exbt.prompting import (
    NONEBT_TOKEN_BUDGET,
    PromptBundle,
    TEMPLATE_ID,
    build_dest_skeleton,
    directly_invokes,
    rank_relevant_nonebts,
    render_instruction,
    test_method_label,
)
from exbt.stacktrace import StackTrace, endpoints, exclude_test_and_util_frames

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorpusExample:
    example_id: str
    repo: str
    prompt: PromptBundle
    gold_ebt: str  # verbatim source of the developer-written test


@dataclass(frozen=True)
class SkippedExample:
    test: str
    reason: str


def link_relevant_nonebts(
    example: CorpusExample,
    nonebts: list[TestMethod],
    budget: int = NONEBT_TOKEN_BUDGET,
) -> CorpusExample:
    """Attach same-MUT then same-destination-file non-EBTs, within budget."""
    mut = example.prompt.mut
    same_mut = [t for t in nonebts if directly_invokes(t, mut)]
    same_file = [t for t in nonebts if t.id.decl_file == example.prompt.dest_path]
    ranked = rank_relevant_nonebts(same_mut, same_file, budget)
    bundle = replace(example.prompt, nonebts=tuple(t.body_text for t in ranked))
    bundle = replace(bundle, rendered_instruction=render_instruction(bundle))
    return replace(example, prompt=bundle)


def collect_training_corpus(
    ebts: list[TestMethod],
    nonebts: list[TestMethod],
    ctx: RepoContext,
    trace_log: TraceLog,
    repo_name: str = "",
    variant: str = "with-name",
    budget: int = NONEBT_TOKEN_BUDGET,
) -> tuple[list[CorpusExample], list[SkippedExample]]:
    """One example per exceptional test whose trace resolves end to end."""
    traces_by_test: dict[str, StackTrace] = {}
    for trace, test_id in trace_log:
        traces_by_test.setdefault(test_id, trace)  # first trace per test wins
    examples: list[CorpusExample] = []
    skipped: list[SkippedExample] = []
    for ebt in sorted(ebts, key=lambda t: (t.id.decl_file, t.id.decl_line)):
        label = test_method_label(ebt)
        raw = traces_by_test.get(label)
        if raw is None:
            skipped.append(SkippedExample(label, "no-trace"))
            continue
        dest = ebt.id.decl_file
        try:
            trace = exclude_test_and_util_frames(raw, dest, ctx)
        except EmptyAfterExclusion:
            skipped.append(SkippedExample(label, "EmptyAfterExclusion"))
            continue
        try:
            mut, site = endpoints(trace, ctx)
            guard = compute_guard_expression(trace, ctx)
        except ExbtError as exc:
            skipped.append(SkippedExample(label, type(exc).__name__))
            continue
        bundle = PromptBundle(
            mut=mut,
            mut_source=ctx.method_source(mut),
            throw_site=site,
            dest_path=dest,
            dest_skeleton=build_dest_skeleton(ctx, dest),
            trace=trace,
            guard=guard,
            nonebts=(),
            variant=variant,
            test_name=ebt.id.name if variant == "with-name" else None,
            template_id=TEMPLATE_ID,
            rendered_instruction="",
            seed=None,
        )
        bundle = replace(bundle, rendered_instruction=render_instruction(bundle))
        example = CorpusExample(
            example_id=f"{repo_name}:{label}" if repo_name else label,
            repo=repo_name,
            prompt=bundle,
            gold_ebt=ebt.body_text,
        )
        example = link_relevant_nonebts(example, nonebts, budget)
        if example.gold_ebt.strip() and example.gold_ebt in example.prompt.rendered_instruction:
            # leakage guard: the skeleton already strips test methods, so
            # hitting this means the fixture layout is broken
            skipped.append(SkippedExample(label, "gold-leaked-into-prompt"))
            continue
        examples.append(example)
    return examples, skipped


# --- JSONL serialization ---


def example_to_record(e: CorpusExample) -> dict:
    p = e.prompt
    return {
        "id": e.example_id,
        "repo": e.repo,
        "mut": {
            "fqn": p.mut.fqn,
            "name": p.mut.name,
            "param_arity": p.mut.param_arity,
            "decl_file": p.mut.decl_file,
            "decl_line": p.mut.decl_line,
            "source": p.mut_source,
        },
        "throw": {
            "file": p.throw_site.method.decl_file,
            "line": p.throw_site.line,
            "statement": p.throw_site.statement_text,
            "exception_type": p.throw_site.exception_type,
        },
        "dest": {"path": p.dest_path, "skeleton": p.dest_skeleton},
        "trace": [
            [f.class_fqn, f.method, f.file, f.line] for f in p.trace.frames
        ],
        "guard": {
            "rendered": p.guard.rendered,
            "conditions": list(p.guard.conditions),
            "source_texts": list(p.guard.source_texts),
            "unresolved_names": list(p.guard.unresolved_names),
        },
        "nonebts": list(p.nonebts),
        "gold_ebt": e.gold_ebt,
        "variant": p.variant,
        "test_name": p.test_name,
        "template_id": p.template_id,
        "rendered_instruction": p.rendered_instruction,
    }


def record_to_example(rec: dict, ctx: RepoContext) -> CorpusExample:
    from exbt.stacktrace import Frame
    from exbt.jmodel.exprs import parse_expr

    mut = MethodId(
        rec["mut"]["fqn"],
        rec["mut"]["name"],
        rec["mut"]["param_arity"],
        rec["mut"]["decl_file"],
        rec["mut"]["decl_line"],
    )
    site = ThrowSite(
        method=_site_method(rec, ctx),
        line=rec["throw"]["line"],
        exception_type=rec["throw"]["exception_type"],
        statement_text=rec["throw"]["statement"],
    )
    guard = GuardExpression(
        conditions=tuple(rec["guard"]["conditions"]),
        condition_exprs=tuple(parse_expr(c) for c in rec["guard"]["conditions"]),
        source_texts=tuple(rec["guard"]["source_texts"]),
        rendered=rec["guard"]["rendered"],
        unresolved_names=tuple(rec["guard"]["unresolved_names"]),
    )
    bundle = PromptBundle(
        mut=mut,
        mut_source=rec["mut"]["source"],
        throw_site=site,
        dest_path=rec["dest"]["path"],
        dest_skeleton=rec["dest"]["skeleton"],
        trace=StackTrace(tuple(Frame(*f) for f in rec["trace"])),
        guard=guard,
        nonebts=tuple(rec["nonebts"]),
        variant=rec["variant"],
        test_name=rec["test_name"],
        template_id=rec["template_id"],
        rendered_instruction=rec["rendered_instruction"],
        seed=None,
    )
    return CorpusExample(rec["id"], rec["repo"], bundle, rec["gold_ebt"])


def _site_method(rec: dict, ctx: RepoContext) -> MethodId:
    from exbt.jmodel import find_throw_sites

    for s in find_throw_sites(ctx, "all"):
        if s.method.decl_file == rec["throw"]["file"] and s.line == rec["throw"]["line"]:
            return s.method
    # synthesize when the repository is not available for resolution
    return MethodId("<unresolved>", "<unresolved>", 0, rec["throw"]["file"], 1)


def write_corpus(examples: list[CorpusExample], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in examples:
            f.write(json.dumps(example_to_record(e), sort_keys=True) + "\n")


def read_corpus(path, ctx: RepoContext) -> list[CorpusExample]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(record_to_example(json.loads(line), ctx))
    return out
