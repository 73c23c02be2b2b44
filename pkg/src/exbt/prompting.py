"""Inference-time context assembly.

Builds the pool of (trace, originating test, throw site) entries from
non-exceptional test executions, matches (method under test, target throw)
pairs against it, selects destination test files, and renders the final
instruction text. A target with no usable context yields a typed NoMatch,
never an exception.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, replace
from pathlib import Path

from exbt.classifier import TestMethod
from exbt.errors import EmptyAfterExclusion
from exbt.guardexpr import GuardExpression, compute_guard_expression
from exbt.instrument import TraceLog
from exbt.jmodel import MethodId, RepoContext, ThrowSite, throw_sites_of
from exbt.jmodel.lexer import match_paren, tokenize
from exbt.stacktrace import StackTrace, exclude_test_and_util_frames

logger = logging.getLogger(__name__)

TEMPLATE_ID = "exbt-inst-v1"
NONEBT_TOKEN_BUDGET = 2048  # whitespace tokens for the relevant-test slot


@dataclass(frozen=True)
class TracePoolEntry:
    trace: StackTrace  # MUT-first, test/util frames excluded
    source_test: MethodId
    throw_site: ThrowSite


@dataclass(frozen=True)
class NoMatch:
    reason: str  # no-matching-trace | no-dest-file
    mut: MethodId | None = None
    throw_site: ThrowSite | None = None


@dataclass(frozen=True)
class PromptBundle:
    mut: MethodId
    mut_source: str
    throw_site: ThrowSite
    dest_path: str
    dest_skeleton: str
    trace: StackTrace
    guard: GuardExpression
    nonebts: tuple[str, ...]  # relevant non-EBT sources, ranked
    variant: str  # with-name | no-name
    test_name: str | None
    template_id: str
    rendered_instruction: str
    seed: int | None = None


def test_method_label(t: TestMethod) -> str:
    return f"{t.id.fqn}#{t.id.name}"


def _repo_digest(ctx: RepoContext) -> str:
    h = hashlib.sha256()
    for path in sorted(ctx.main_files):
        unit = ctx.unit_for(path)
        h.update(path.encode())
        h.update(b"\0")
        if unit is not None:
            h.update(unit.source.encode())
        h.update(b"\0")
    return h.hexdigest()


def collect_stacktrace_set(
    nonebts: list[TestMethod],
    ctx: RepoContext,
    trace_log: TraceLog,
    cache_dir: str | Path | None = None,
) -> list[TracePoolEntry]:
    """Pool of throw-reaching traces from non-EBT executions.

    Each logged trace yields one entry per throw statement declared in its
    innermost method. Building is cached per repository keyed by the digest
    of the main sources; the cache invalidates as soon as any main source
    changes.
    """
    digest = _repo_digest(ctx)
    cache_file = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / f"pool-{digest[:16]}.json"
        if cache_file.exists():
            try:
                return _read_pool(cache_file.read_text(), ctx)
            except Exception as exc:  # stale or corrupt cache is not fatal
                logger.warning("ignoring unreadable pool cache: %s", exc)
    by_label = {test_method_label(t): t for t in nonebts}
    entries: list[TracePoolEntry] = []
    seen: set[tuple] = set()
    for trace, test_id in trace_log:
        test = by_label.get(test_id)
        if test is None:
            logger.warning("trace for unknown non-EBT %r skipped", test_id)
            continue
        try:
            excluded = exclude_test_and_util_frames(trace, test.id.decl_file, ctx)
        except EmptyAfterExclusion:
            continue
        last = excluded.frames[-1]
        try:
            unit, _, decl = ctx.resolve_frame(last.class_fqn, last.method, last.line)
        except Exception:
            continue
        for site in throw_sites_of(unit, decl, ctx):
            key = (excluded.frames, test.id, site)
            if key in seen:
                continue
            seen.add(key)
            entries.append(TracePoolEntry(excluded, test.id, site))
    entries.sort(
        key=lambda e: (
            e.throw_site.method.decl_file,
            e.throw_site.line,
            e.source_test.decl_file,
            e.source_test.decl_line,
        )
    )
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        cache_file.write_text(_dump_pool(entries))
    return entries


def _dump_pool(entries: list[TracePoolEntry]) -> str:
    rows = []
    for e in entries:
        rows.append(
            {
                "frames": [
                    [f.class_fqn, f.method, f.file, f.line] for f in e.trace.frames
                ],
                "test": [
                    e.source_test.fqn,
                    e.source_test.name,
                    e.source_test.param_arity,
                    e.source_test.decl_file,
                    e.source_test.decl_line,
                ],
                "site": [e.throw_site.method.decl_file, e.throw_site.line],
            }
        )
    return json.dumps(rows, indent=0)


def _read_pool(text: str, ctx: RepoContext) -> list[TracePoolEntry]:
    from exbt.stacktrace import Frame
    from exbt.jmodel import find_throw_sites

    sites = {(s.method.decl_file, s.line): s for s in find_throw_sites(ctx, "all")}
    entries = []
    for row in json.loads(text):
        trace = StackTrace(tuple(Frame(*f) for f in row["frames"]))
        test = MethodId(*row["test"])
        site = sites[tuple(row["site"])]
        entries.append(TracePoolEntry(trace, test, site))
    return entries


def _frame_matches(frame, mut: MethodId) -> bool:
    return frame.method == mut.name and (
        frame.class_fqn == mut.fqn or frame.class_fqn.endswith("." + mut.fqn)
    )


def _ws_tokens(text: str) -> int:
    return len(text.split())


def rank_relevant_nonebts(
    same_mut: list[TestMethod],
    same_file: list[TestMethod],
    budget: int = NONEBT_TOKEN_BUDGET,
) -> list[TestMethod]:
    """Same-MUT tests first, then same-destination-file, within budget."""
    order = lambda t: (t.id.decl_file, t.id.decl_line)
    ranked: list[TestMethod] = sorted(same_mut, key=order)
    seen = {test_method_label(t) for t in ranked}
    for t in sorted(same_file, key=order):
        if test_method_label(t) not in seen:
            ranked.append(t)
            seen.add(test_method_label(t))
    selected: list[TestMethod] = []
    used = 0
    for t in ranked:
        cost = _ws_tokens(t.body_text)
        if selected and used + cost > budget:
            break
        if not selected and cost > budget:
            break
        selected.append(t)
        used += cost
    return selected


def directly_invokes(test: TestMethod, mut: MethodId) -> bool:
    """Whether the test body contains a name+arity call to the method."""
    try:
        toks = tokenize(test.body_text)
    except Exception:
        return False
    target = mut.fqn.split(".")[-1].split("$")[-1] if mut.name == "<init>" else mut.name
    for k, t in enumerate(toks):
        if t.kind != "ident" or t.text != target:
            continue
        if k + 1 >= len(toks) or toks[k + 1].text != "(":
            continue
        try:
            close = match_paren(toks, k + 1)
        except Exception:
            continue
        depth = 0
        commas = 0
        for i in range(k + 2, close):
            tt = toks[i].text
            if tt in "([{":
                depth += 1
            elif tt in ")]}":
                depth -= 1
            elif tt == "," and depth == 0:
                commas += 1
        arity = 0 if close == k + 2 else commas + 1
        if arity == mut.param_arity:
            return True
    return False


def select_dest_test_file(
    mut: MethodId, ctx: RepoContext, coverage_index: dict[str, str] | None = None
) -> str | None:
    """Destination test file for a method under test.

    Tries <FNM>Test.java then Test<FNM>.java among test files (same package
    preferred), then the optional coverage index (class fqn, simple name or
    method label as keys), else None.
    """
    return select_dest_with_reason(mut, ctx, coverage_index)[0]


def select_dest_with_reason(
    mut: MethodId, ctx: RepoContext, coverage_index: dict[str, str] | None = None
) -> tuple[str | None, str]:
    """(path, mechanism) where mechanism is name-match | coverage | none."""
    stem = Path(mut.decl_file).stem
    mut_unit = ctx.unit_for(mut.decl_file)
    mut_pkg = mut_unit.package if mut_unit is not None else ""
    for name in (f"{stem}Test.java", f"Test{stem}.java"):
        candidates = [p for p in ctx.test_files if Path(p).name == name]
        if not candidates:
            continue
        same_pkg = []
        for p in candidates:
            u = ctx.unit_for(p)
            if u is not None and u.package == mut_pkg:
                same_pkg.append(p)
        pool = same_pkg or candidates
        return sorted(pool)[0], "name-match"
    if coverage_index:
        for key in (mut.label(), mut.fqn, mut.fqn.split(".")[-1], stem):
            if key in coverage_index:
                return coverage_index[key], "coverage"
    return None, "none"


# strip @Test methods, keep class structure and helpers
def build_dest_skeleton(ctx: RepoContext, dest_path: str) -> str:
    unit = ctx.unit_for(dest_path)
    if unit is None:
        return ""
    from exbt.classifier import _has_test_annotation

    drop: list[tuple[int, int]] = []
    for _, m in unit.all_methods():
        if _has_test_annotation(m):
            drop.append((m.start_line, m.end_line))
    lines = unit.source.split("\n")
    kept = [
        line
        for i, line in enumerate(lines, start=1)
        if not any(lo <= i <= hi for lo, hi in drop)
    ]
    out: list[str] = []
    for line in kept:  # collapse runs of blank lines left by removal
        if line.strip() == "" and out and out[-1].strip() == "":
            continue
        out.append(line)
    return "\n".join(out)


def _reindent(text: str) -> str:
    """Strip the declaration indent from an extracted member source."""
    lines = text.split("\n")
    if len(lines) < 2:
        return text
    tail = [l for l in lines[1:] if l.strip()]
    if not tail:
        return text
    indent = min(len(l) - len(l.lstrip()) for l in tail)
    last = lines[-1]
    base = len(last) - len(last.lstrip())
    cut = min(indent, base + 4)
    return "\n".join([lines[0]] + [l[cut:] if l.strip() else l for l in lines[1:]])


def render_instruction(bundle: PromptBundle, template_id: str = TEMPLATE_ID) -> str:
    """Deterministic instruction text with stable section markers.

    Section order is fixed; empty sections are omitted together with their
    headers. The with-name variant adds exactly one extra section.
    """
    parts: list[str] = [f"// template: {template_id}"]
    parts.append(
        "### Task\n"
        "Write a JUnit test method that calls the method under test and "
        f"asserts that `{bundle.throw_site.exception_type}` is thrown by the "
        "target throw statement below. Reply with one complete test method."
    )
    if bundle.mut_source:
        parts.append("### Method under test\n" + _reindent(bundle.mut_source))
    site = bundle.throw_site
    parts.append(
        "### Target throw statement\n"
        f"// {site.method.decl_file}:{site.line} (exception: {site.exception_type})\n"
        + site.statement_text
    )
    if bundle.trace.frames:
        frames = "\n".join(f.render() for f in bundle.trace.frames)
        parts.append("### Stack trace (method under test first)\n" + frames)
    if bundle.guard.rendered:
        parts.append("### Guard expression\n" + bundle.guard.rendered)
    if bundle.nonebts:
        parts.append(
            "### Relevant tests\n"
            + "\n\n".join(_reindent(t) for t in bundle.nonebts)
        )
    if bundle.dest_skeleton:
        parts.append("### Destination test file\n" + bundle.dest_skeleton)
    if bundle.variant == "with-name" and bundle.test_name:
        parts.append("### Test name\n" + bundle.test_name)
    return "\n\n".join(parts) + "\n"


def assemble_prompt(
    mut: MethodId,
    throw_site: ThrowSite,
    dest: str,
    pool: list[TracePoolEntry],
    nonebts: list[TestMethod],
    ctx: RepoContext,
    seed: int = 0,
    variant: str = "no-name",
    test_name: str | None = None,
    budget: int = NONEBT_TOKEN_BUDGET,
) -> PromptBundle | NoMatch:
    """Match the pool, pick one trace with a seeded RNG, build the bundle."""
    matching = [
        q
        for q in pool
        if q.throw_site == throw_site and any(_frame_matches(f, mut) for f in q.trace.frames)
    ]
    if not matching:
        return NoMatch("no-matching-trace", mut, throw_site)
    same_mut_tests = {
        test_method_label_from_id(q.source_test)
        for q in matching
        if _frame_matches(q.trace.frames[0], mut)
    }
    rng = random.Random(seed)
    pick = rng.choice(matching)
    trace = pick.trace.with_last_line(throw_site.line)
    guard = compute_guard_expression(trace, ctx)
    by_label = {test_method_label(t): t for t in nonebts}
    same_mut = [by_label[l] for l in sorted(same_mut_tests) if l in by_label]
    # tests that statically invoke the method under test qualify as well
    for t in nonebts:
        if test_method_label(t) not in same_mut_tests and directly_invokes(t, mut):
            same_mut.append(t)
    same_file = [t for t in nonebts if t.id.decl_file == dest]
    ranked = rank_relevant_nonebts(same_mut, same_file, budget)
    bundle = PromptBundle(
        mut=mut,
        mut_source=ctx.method_source(mut),
        throw_site=throw_site,
        dest_path=dest,
        dest_skeleton=build_dest_skeleton(ctx, dest),
        trace=trace,
        guard=guard,
        nonebts=tuple(t.body_text for t in ranked),
        variant=variant,
        test_name=test_name,
        template_id=TEMPLATE_ID,
        rendered_instruction="",
        seed=seed,
    )
    return replace(bundle, rendered_instruction=render_instruction(bundle))


def test_method_label_from_id(mid: MethodId) -> str:
    return f"{mid.fqn}#{mid.name}"


def sweep_targets(
    ctx: RepoContext,
    pool: list[TracePoolEntry],
    nonebts: list[TestMethod],
    seed: int = 0,
    coverage_index: dict[str, str] | None = None,
    variant: str = "no-name",
    counters=None,
):
    """Machine-oriented sweep: one (site, bundle-or-NoMatch) per main throw.

    The method under test is the method containing the throw; destination
    files come from the naming heuristics, then the coverage index.
    """
    from exbt.jmodel import find_throw_sites

    results = []
    for site in find_throw_sites(ctx, "main"):
        mut = site.method
        dest, mechanism = select_dest_with_reason(mut, ctx, coverage_index)
        if counters is not None:
            counters[f"dest_{mechanism}"] += 1
        if dest is None:
            results.append((site, NoMatch("no-dest-file", mut, site)))
            continue
        outcome = assemble_prompt(
            mut, site, dest, pool, nonebts, ctx, seed=seed, variant=variant
        )
        if counters is not None:
            if isinstance(outcome, NoMatch):
                counters["nomatch_no_matching_trace"] += 1
            else:
                counters["prompts_assembled"] += 1
                counters["guards_computed"] += 1
        results.append((site, outcome))
    return results


def enumerate_nonebt_variants(bundle: PromptBundle, limit: int = 5) -> list[PromptBundle]:
    """Up to `limit` bundles, each keeping a single distinct relevant test.

    Used for sampling runs that vary the in-context example: no
    replacement, stops early when fewer relevant tests exist. A bundle
    without relevant tests yields itself once.
    """
    if not bundle.nonebts:
        return [bundle]
    variants = []
    for source in bundle.nonebts[:limit]:
        v = replace(bundle, nonebts=(source,))
        variants.append(replace(v, rendered_instruction=render_instruction(v)))
    return variants


def bundle_to_record(outcome, site: ThrowSite) -> dict:
    """JSON-friendly record for one sweep target."""
    base = {
        "target": site.label(),
        "exception_type": site.exception_type,
        "statement": site.statement_text,
    }
    if isinstance(outcome, NoMatch):
        base.update({"status": "no-match", "reason": outcome.reason})
        return base
    b: PromptBundle = outcome
    base.update(
        {
            "status": "bundle",
            "mut": b.mut.label(),
            "dest": b.dest_path,
            "variant": b.variant,
            "test_name": b.test_name,
            "seed": b.seed,
            "template_id": b.template_id,
            "trace": [[f.class_fqn, f.method, f.file, f.line] for f in b.trace.frames],
            "guard": {
                "rendered": b.guard.rendered,
                "conditions": list(b.guard.conditions),
                "unresolved_names": list(b.guard.unresolved_names),
            },
            "nonebts": list(b.nonebts),
            "instruction": b.rendered_instruction,
        }
    )
    return base
