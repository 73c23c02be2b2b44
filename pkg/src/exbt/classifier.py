"""Classify test methods into exceptional and non-exceptional tests.

A test method is exceptional when it matches one of four developer
patterns, probed in this order (first match wins):

  1. AnnotationExpected   @Test(expected = X.class)
  2. AssertThrows         assertThrows(X.class, () -> ...)
  3. ExpectedExceptionRule  rule.expect(X.class)
  4. TryFailCatch         try { ...; fail(); } catch (X e) { ... }

Detection is purely syntactic; both qualified and unqualified call forms
are accepted. Only methods annotated @Test are considered tests.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from exbt.errors import NotATest, NotEBT
from exbt.jmodel import CompilationUnit, MethodDecl, MethodId, RepoContext, parse_unit
from exbt.jmodel.lexer import match_paren

PATTERNS = (
    "AnnotationExpected",
    "AssertThrows",
    "ExpectedExceptionRule",
    "TryFailCatch",
)

_EXPECTED_ARG_RE = re.compile(r"\bexpected\s*=\s*([\w.$]+)\s*\.\s*class")


@dataclass(frozen=True)
class TestMethod:
    id: MethodId
    body_text: str  # verbatim method source, annotations included
    kind: str  # EBT | NonEBT
    pattern: str | None
    expected_exception: str | None

    @property
    def is_ebt(self) -> bool:
        return self.kind == "EBT"


def _has_test_annotation(m: MethodDecl) -> bool:
    for ann in m.annotations:
        name = ann.split("(")[0].lstrip("@").strip()
        if name.split(".")[-1] == "Test":
            return True
    return False


def _annotation_expected(m: MethodDecl) -> str | None:
    for ann in m.annotations:
        name = ann.split("(")[0].lstrip("@").strip()
        if name.split(".")[-1] != "Test":
            continue
        hit = _EXPECTED_ARG_RE.search(ann)
        if hit:
            return hit.group(1)
    return None


def _first_class_arg(unit: CompilationUnit, open_paren: int) -> str | None:
    """Text of the first argument when it is a class literal 'X.class'."""
    close = match_paren(unit.tokens, open_paren)
    depth = 0
    end = close
    for k in range(open_paren + 1, close):
        t = unit.tokens[k].text
        if t in "([{":
            depth += 1
        elif t in ")]}":
            depth -= 1
        elif t == "," and depth == 0:
            end = k
            break
    toks = unit.tokens[open_paren + 1 : end]
    if len(toks) < 3 or toks[-1].text != "class" or toks[-2].text != ".":
        return None
    return "".join(t.text for t in toks[:-2])


def _find_call_sites(unit: CompilationUnit, m: MethodDecl, name: str):
    """Indexes of '(' tokens for calls to `name` inside the method body."""
    if m.tok_open is None:
        return
    for k in range(m.tok_open + 1, m.tok_close):
        t = unit.tokens[k]
        if t.kind == "ident" and t.text == name:
            if k + 1 < m.tok_close and unit.tokens[k + 1].text == "(":
                yield k + 1


def _assert_throws(unit: CompilationUnit, m: MethodDecl) -> str | None:
    for open_paren in _find_call_sites(unit, m, "assertThrows"):
        arg = _first_class_arg(unit, open_paren)
        if arg:
            return arg
    return None


def _expected_rule(unit: CompilationUnit, m: MethodDecl) -> str | None:
    for open_paren in _find_call_sites(unit, m, "expect"):
        # must be a method call on a rule object: '<name>.expect('
        name_idx = open_paren - 1
        if name_idx - 1 < 0 or unit.tokens[name_idx - 1].text != ".":
            continue
        arg = _first_class_arg(unit, open_paren)
        if arg:
            return arg
    return None


def _try_fail_catch(unit: CompilationUnit, m: MethodDecl) -> str | None:
    if m.tok_open is None:
        return None
    toks = unit.tokens
    k = m.tok_open + 1
    while k < m.tok_close:
        if toks[k].text == "try":
            # span of the try block
            open_b = k + 1
            while toks[open_b].text != "{":
                if toks[open_b].text == "(":
                    open_b = match_paren(toks, open_b) + 1
                    continue
                open_b += 1
            from exbt.jmodel.lexer import match_brace

            close_b = match_brace(toks, open_b)
            has_fail = any(
                toks[i].kind == "ident"
                and toks[i].text == "fail"
                and i + 1 < close_b
                and toks[i + 1].text == "("
                for i in range(open_b + 1, close_b)
            )
            if has_fail and close_b + 1 < m.tok_close and toks[close_b + 1].text == "catch":
                open_p = close_b + 2
                close_p = match_paren(toks, open_p)
                type_toks = []
                for i in range(open_p + 1, close_p):
                    if toks[i].text == "|":
                        break
                    type_toks.append(toks[i])
                if len(type_toks) >= 2:
                    return "".join(t.text for t in type_toks[:-1])
            k = close_b + 1
            continue
        k += 1
    return None


def _classify_decl(unit: CompilationUnit, m: MethodDecl, mid: MethodId) -> TestMethod:
    if not _has_test_annotation(m):
        raise NotATest(f"{mid.label()} carries no @Test annotation")
    last = m.tok_close if m.tok_close is not None else m.tok_start
    body_text = unit.text(m.tok_start, last)
    for pattern, probe in (
        ("AnnotationExpected", lambda: _annotation_expected(m)),
        ("AssertThrows", lambda: _assert_throws(unit, m)),
        ("ExpectedExceptionRule", lambda: _expected_rule(unit, m)),
        ("TryFailCatch", lambda: _try_fail_catch(unit, m)),
    ):
        expected = probe()
        if expected:
            return TestMethod(mid, body_text, "EBT", pattern, expected)
    return TestMethod(mid, body_text, "NonEBT", None, None)


def classify_test(method_source: str) -> TestMethod:
    """Classify a standalone test method given its source text."""
    unit = parse_unit("class __Wrapper {\n" + method_source + "\n}", "<string>")
    methods = [(t, m) for t in unit.all_types() for m in t.methods]
    if not methods:
        raise NotATest("input does not contain a method declaration")
    _, m = methods[0]
    mid = MethodId("<anonymous>", m.name, m.arity, "<string>", m.decl_line)
    return _classify_decl(unit, m, mid)


def split_test_suite(ctx: RepoContext) -> tuple[list[TestMethod], list[TestMethod]]:
    """Classify every @Test method declared under a test source root."""
    ebts: list[TestMethod] = []
    nonebts: list[TestMethod] = []
    test_paths = set(ctx.test_files)
    for unit in ctx.units:
        if unit.path not in test_paths:
            continue
        for _, m in unit.all_methods():
            if not _has_test_annotation(m):
                continue
            t = _classify_decl(unit, m, ctx.method_id(unit, m))
            (ebts if t.is_ebt else nonebts).append(t)
    return ebts, nonebts


def extract_expected_exception(t: TestMethod) -> str:
    if not t.is_ebt or t.expected_exception is None:
        raise NotEBT(f"{t.id.label()} is not an exceptional-behavior test")
    return t.expected_exception
