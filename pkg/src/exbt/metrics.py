"""Similarity and functional-correctness metrics for generated tests.

Similarity metrics (exact match, BLEU, CodeBLEU, edit similarity) are pure
text/tree computations. Functional metrics (compilable, runnable, covers
target) need a build runner and stay absent (None) without one, so the
hermetic suite never requires a JVM. Coverage over targets is reported as
the fraction of target throw statements with at least one fully successful
candidate.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from exbt.classifier import classify_test
from exbt.errors import ExbtError, NotATest, RunnerUnavailable
from exbt.jmodel import parse_unit
from exbt.jmodel.lexer import KEYWORDS, tokenize

_FALLBACK_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_LINE_COMMENT_RE = re.compile(r"//[^\n]*")
_BLOCK_COMMENT_RE = re.compile(r"/\*.*?\*/", re.DOTALL)


def code_tokens(text: str) -> list[str]:
    """Comment-free token stream; falls back to a regex split for
    text the Java lexer rejects."""
    try:
        return [t.text for t in tokenize(text)]
    except ExbtError:
        stripped = _BLOCK_COMMENT_RE.sub(" ", _LINE_COMMENT_RE.sub(" ", text))
        return _FALLBACK_TOKEN_RE.findall(stripped)


def xmatch(candidate: str, reference: str) -> bool:
    """Token streams identical after comment and whitespace normalization."""
    return code_tokens(candidate) == code_tokens(reference)


def xmatch_strict(candidate: str, reference: str) -> bool:
    return candidate == reference


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str, max_n: int = 4) -> float:
    """Smoothed BLEU over code tokens: add-one on every n-gram precision,
    geometric mean, brevity penalty."""
    cand = code_tokens(candidate)
    ref = code_tokens(reference)
    if not cand or not ref:
        return 1.0 if cand == ref else 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_ngrams = _ngrams(cand, n)
        ref_ngrams = _ngrams(ref, n)
        total = sum(cand_ngrams.values())
        matched = sum(min(c, ref_ngrams[g]) for g, c in cand_ngrams.items())
        log_sum += math.log((matched + 1) / (total + 1))
    geo = math.exp(log_sum / max_n)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * geo


def _weighted_unigram_precision(cand: list[str], ref: list[str]) -> float:
    """Unigram precision where Java keywords weigh five times more."""
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    matched = 0.0
    total = 0.0
    for tok, c in cand_counts.items():
        w = 5.0 if tok in KEYWORDS else 1.0
        matched += w * min(c, ref_counts[tok])
        total += w * c
    return (matched + 1) / (total + 1)


def _weighted_bleu(cand: list[str], ref: list[str], max_n: int = 4) -> float:
    if not cand or not ref:
        return 1.0 if cand == ref else 0.0
    log_sum = math.log(_weighted_unigram_precision(cand, ref))
    for n in range(2, max_n + 1):
        cand_ngrams = _ngrams(cand, n)
        ref_ngrams = _ngrams(ref, n)
        total = sum(cand_ngrams.values())
        matched = sum(min(c, ref_ngrams[g]) for g, c in cand_ngrams.items())
        log_sum += math.log((matched + 1) / (total + 1))
    geo = math.exp(log_sum / max_n)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * geo


def _parse_method_body(source: str):
    """(unit, method) for a method source wrapped in a class, or None."""
    try:
        unit = parse_unit("class __M {\n" + source + "\n}", "<metric>")
    except ExbtError:
        return None
    methods = [
        (t, m) for t in unit.all_types() for m in t.methods if m.tok_open is not None
    ]
    if not methods:
        return None
    return unit, methods[0][1]


def _expr_signatures(expr, out: Counter) -> str:
    from exbt.jmodel import exprs as E

    kids = []
    if isinstance(expr, E.Binary):
        kind = f"bin:{expr.op}"
        kids = [expr.left, expr.right]
    elif isinstance(expr, E.Unary):
        kind = f"un:{expr.op}"
        kids = [expr.operand]
    elif isinstance(expr, E.Call):
        kind = "call"
        kids = ([expr.recv] if expr.recv else []) + list(expr.args)
    elif isinstance(expr, E.Field):
        kind = "field"
        kids = [expr.recv]
    elif isinstance(expr, E.Index):
        kind = "index"
        kids = [expr.arr, expr.idx]
    elif isinstance(expr, E.Ternary):
        kind = "ternary"
        kids = [expr.cond, expr.then, expr.other]
    elif isinstance(expr, E.Grouped):
        return _expr_signatures(expr.inner, out)
    elif isinstance(expr, E.New):
        kind = f"new:{expr.type_text}"
        kids = list(expr.args)
    elif isinstance(expr, E.Cast):
        kind = "cast"
        kids = [expr.operand]
    elif isinstance(expr, E.InstanceOf):
        kind = "instanceof"
        kids = [expr.operand]
    elif isinstance(expr, E.Lit):
        return "lit"
    elif isinstance(expr, E.Name):
        return "name"
    else:
        return "opaque"
    sig = kind + "(" + ",".join(_expr_signatures(k, out) for k in kids) + ")"
    out[sig] += 1
    return sig


def _stmt_expr_trees(unit, stmt):
    from exbt.guardexpr import _parse_or_opaque

    trees = []
    for rng in (stmt.cond_range, stmt.selector_range):
        if rng is not None and stmt.kind != "catch":
            trees.append(_parse_or_opaque(unit, rng))
    for _, rng, op in stmt.assignments:
        if rng[1] > rng[0]:
            trees.append(_parse_or_opaque(unit, rng))
    return trees


def _ast_signatures(source: str) -> Counter | None:
    parsed = _parse_method_body(source)
    if parsed is None:
        return None
    unit, m = parsed
    from exbt.jmodel.stmts import BodyParser

    try:
        tree = BodyParser(unit.tokens, unit.source).parse_block(m.tok_open)
    except ExbtError:
        return None
    sigs: Counter = Counter()

    def stmt_sig(node) -> str:
        child_sigs = [stmt_sig(c) for c in node.children]
        sig = node.kind + "(" + ",".join(child_sigs) + ")"
        sigs[sig] += 1
        return sig

    stmt_sig(tree)
    for node in tree.iter_tree():
        for expr in _stmt_expr_trees(unit, node):
            _expr_signatures(expr, sigs)
    return sigs


def _def_use_pairs(source: str) -> Counter | None:
    """Position-normalized def-use edges, invariant under renaming."""
    parsed = _parse_method_body(source)
    if parsed is None:
        return None
    unit, m = parsed
    from exbt.guardexpr import _parse_or_opaque
    from exbt.jmodel import exprs as E
    from exbt.jmodel.stmts import BodyParser

    try:
        tree = BodyParser(unit.tokens, unit.source).parse_block(m.tok_open)
    except ExbtError:
        return None
    defs: dict[str, int] = {}
    for i, (_, name) in enumerate(m.params):
        defs[name] = i
    edges: Counter = Counter()
    use_serial = 0

    def uses_in(expr) -> set[str]:
        return E.free_names(expr)

    for node in tree.iter_tree():
        for expr in _stmt_expr_trees(unit, node):
            nonlocal_names = sorted(uses_in(expr))
            for name in nonlocal_names:
                if name in defs:
                    edges[(defs[name], use_serial)] += 1
                    use_serial += 1
        for name, _, _ in node.assignments:
            if name not in defs:
                defs[name] = len(defs)
    return edges


def _clipped_ratio(cand: Counter, ref: Counter) -> float:
    total = sum(cand.values())
    if total == 0:
        return 1.0 if sum(ref.values()) == 0 else 0.0
    matched = sum(min(c, ref[k]) for k, c in cand.items())
    return matched / total


def code_bleu(candidate: str, reference: str) -> float:
    return code_bleu_components(candidate, reference)["code_bleu"]


def code_bleu_components(candidate: str, reference: str) -> dict:
    """CodeBLEU = 0.25 * (ngram + keyword-weighted ngram + AST + def-use).

    When either side does not parse as a Java method, the score degrades
    to plain BLEU and the result is flagged."""
    ngram = bleu(candidate, reference)
    cand_sigs = _ast_signatures(candidate)
    ref_sigs = _ast_signatures(reference)
    if cand_sigs is None or ref_sigs is None:
        return {
            "code_bleu": ngram,
            "ngram": ngram,
            "weighted_ngram": ngram,
            "ast_match": ngram,
            "dataflow_match": ngram,
            "degraded": True,
        }
    weighted = _weighted_bleu(code_tokens(candidate), code_tokens(reference))
    ast_match = _clipped_ratio(cand_sigs, ref_sigs)
    cand_df = _def_use_pairs(candidate) or Counter()
    ref_df = _def_use_pairs(reference) or Counter()
    dataflow = _clipped_ratio(cand_df, ref_df)
    return {
        "code_bleu": 0.25 * (ngram + weighted + ast_match + dataflow),
        "ngram": ngram,
        "weighted_ngram": weighted,
        "ast_match": ast_match,
        "dataflow_match": dataflow,
        "degraded": False,
    }


def edit_similarity(candidate: str, reference: str) -> float:
    """1 - levenshtein/max(len); both empty counts as identical."""
    a, b = candidate, reference
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
            )
        previous = current
    return 1.0 - previous[-1] / max(len(a), len(b))


def _simple_name(type_name: str) -> str:
    return type_name.rsplit(".", 1)[-1]


def matched_exception(candidate: str, target_exception: str) -> bool:
    """Candidate checks the target exception type (simple-name compare)."""
    try:
        t = classify_test(candidate)
    except (NotATest, ExbtError):
        return False
    if not t.is_ebt or t.expected_exception is None:
        return False
    return _simple_name(t.expected_exception) == _simple_name(target_exception)


@dataclass(frozen=True)
class FunctionalResult:
    compilable: bool | None = None
    runnable: bool | None = None
    covers_target: bool | None = None

    def normalized(self) -> "FunctionalResult":
        """Enforce runnable => compilable and covers => runnable."""
        compilable, runnable, covers = self.compilable, self.runnable, self.covers_target
        if compilable is False:
            runnable = None if runnable is None else False
            covers = None if covers is None else False
        if runnable is False:
            covers = None if covers is None else False
        if covers is True:
            runnable = True
            compilable = True
        if runnable is True:
            compilable = True
        return FunctionalResult(compilable, runnable, covers)


def functional_check(candidate: str, bundle, runner) -> FunctionalResult:
    """Compile/run/coverage fields via the configured build runner.

    Without a runner the fields stay absent (None), never false."""
    if runner is None:
        raise RunnerUnavailable("no build runner configured")
    return runner.check(candidate, bundle).normalized()


@dataclass
class CandidateScore:
    target: str  # throw-site label (file:line)
    xmatch: bool | None = None
    xmatch_strict: bool | None = None
    bleu: float | None = None
    code_bleu: float | None = None
    code_bleu_degraded: bool = False
    edit_sim: float | None = None
    matched_e: bool = False
    compilable: bool | None = None
    runnable: bool | None = None
    covers_target: bool | None = None
    extras: dict = field(default_factory=dict)


def score_candidate(
    candidate: str,
    reference: str | None,
    target_exception: str,
    target: str,
    bundle=None,
    runner=None,
) -> CandidateScore:
    score = CandidateScore(target=target)
    if reference is not None:
        score.xmatch = xmatch(candidate, reference)
        score.xmatch_strict = xmatch_strict(candidate, reference)
        score.bleu = bleu(candidate, reference)
        comp = code_bleu_components(candidate, reference)
        score.code_bleu = comp["code_bleu"]
        score.code_bleu_degraded = comp["degraded"]
        score.edit_sim = edit_similarity(candidate, reference)
    score.matched_e = matched_exception(candidate, target_exception)
    if runner is not None and bundle is not None:
        result = functional_check(candidate, bundle, runner)
        score.compilable = result.compilable
        score.runnable = result.runnable
        score.covers_target = result.covers_target
    return score


def _mean(values) -> float:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else 0.0


def _pct(values) -> float:
    present = [v for v in values if v is not None]
    if not present:
        return 0.0
    return 100.0 * sum(1 for v in present if v) / len(present)


def aggregate(reports: list[CandidateScore], targets: list[str]) -> dict:
    """Means/percentages over candidates plus coverage over targets."""
    covered = {
        r.target for r in reports if r.covers_target is True and r.target in set(targets)
    }
    throw_cov = len(covered) / len(targets) if targets else 0.0
    functional_present = any(
        r.compilable is not None or r.runnable is not None for r in reports
    )
    return {
        "candidates": len(reports),
        "targets": len(targets),
        "bleu": _mean([r.bleu for r in reports]),
        "code_bleu": _mean([r.code_bleu for r in reports]),
        "edit_sim": _mean([r.edit_sim for r in reports]),
        "xmatch_pct": _pct([r.xmatch for r in reports]),
        "xmatch_strict_pct": _pct([r.xmatch_strict for r in reports]),
        "compilable_pct": _pct([r.compilable for r in reports]),
        "matched_e_pct": _pct([r.matched_e for r in reports]),
        "runnable_pct": _pct([r.runnable for r in reports]),
        "throw_cov": throw_cov,
        "throw_cov_pct": 100.0 * throw_cov,
        "partial": not functional_present,
    }


def aggregate_best_of(reports: list[CandidateScore], targets: list[str]) -> dict:
    """Best-of-k aggregation for sampled runs.

    Each metric is maximized independently per target (so the per-target
    'best' may come from different candidates per metric); the result is
    flagged accordingly.
    """
    by_target: dict[str, list[CandidateScore]] = {}
    for r in reports:
        by_target.setdefault(r.target, []).append(r)
    best: list[CandidateScore] = []
    for target, group in sorted(by_target.items()):
        merged = CandidateScore(target=target)
        merged.bleu = max((r.bleu for r in group if r.bleu is not None), default=None)
        merged.code_bleu = max(
            (r.code_bleu for r in group if r.code_bleu is not None), default=None
        )
        merged.edit_sim = max(
            (r.edit_sim for r in group if r.edit_sim is not None), default=None
        )
        merged.xmatch = any(r.xmatch for r in group if r.xmatch is not None) or (
            None if all(r.xmatch is None for r in group) else False
        )
        merged.matched_e = any(r.matched_e for r in group)
        merged.compilable = _best_bool([r.compilable for r in group])
        merged.runnable = _best_bool([r.runnable for r in group])
        merged.covers_target = _best_bool([r.covers_target for r in group])
        best.append(merged)
    agg = aggregate(best, targets)
    agg["best_of_k"] = True
    agg["per_metric_maximization"] = "independent per target"
    return agg


def _best_bool(values: list[bool | None]) -> bool | None:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return any(present)


def report_table(agg: dict) -> str:
    """Text table mirroring the metric column order of the report."""
    head = (
        "BLEU    CodeBLEU  EditSim  xMatch  | "
        "Compilable%  Matched-E%  Runnable%  ThrowCov%"
    )
    row = (
        f"{agg['bleu']:.4f}  {agg['code_bleu']:.4f}    {agg['edit_sim']:.4f}   "
        f"{agg['xmatch_pct']:5.1f}%  | "
        f"{agg['compilable_pct']:10.1f}  {agg['matched_e_pct']:10.1f}  "
        f"{agg['runnable_pct']:9.1f}  {agg['throw_cov_pct']:9.1f}"
    )
    note = "(functional metrics absent: no runner configured)" if agg.get("partial") else ""
    return "\n".join(x for x in (head, row, note) if x)
