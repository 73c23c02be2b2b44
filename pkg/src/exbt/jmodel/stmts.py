"""Statement trees for Java method bodies.

The parser is deliberately shallow: it recovers the control-flow shape
(blocks, branches, loops, switches, try/catch, throws, assignments) plus
line spans and parent links, which is exactly what the trace walk needs.
Anything it cannot interpret becomes an opaque statement with a span.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from exbt.jmodel import exprs
from exbt.jmodel.lexer import Token, match_brace, match_paren

_PRIMITIVES = {"boolean", "byte", "char", "short", "int", "long", "float", "double"}
_ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="}


@dataclass
class Stmt:
    kind: str
    start_line: int
    end_line: int
    tok_start: int
    tok_end: int  # exclusive
    children: list["Stmt"] = field(default_factory=list)
    parent: "Stmt | None" = field(default=None, repr=False)
    # role of this node relative to its parent: then | else | body | group | plain
    role: str = "plain"
    # kind-specific payloads (token index ranges into the unit token list)
    cond_range: tuple[int, int] | None = None
    selector_range: tuple[int, int] | None = None
    labels: list[tuple[int, int] | None] | None = None  # None label == default
    assignments: list[tuple[str, tuple[int, int], str]] = field(default_factory=list)
    # each assignment: (lhs name, rhs token range, operator text)

    def contains_line(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line

    def iter_tree(self):
        yield self
        for c in self.children:
            yield from c.iter_tree()


class BodyParser:
    """Parses one method body token range into a Stmt tree."""

    def __init__(self, tokens: list[Token], source: str):
        self.toks = tokens
        self.src = source

    def parse_block(self, open_index: int) -> Stmt:
        """Parse the block whose '{' sits at open_index."""
        close = match_brace(self.toks, open_index)
        block = self._stmt("block", open_index, close + 1)
        pos = open_index + 1
        while pos < close:
            child, pos = self._parse_stmt(pos, close)
            if child is not None:
                block.children.append(child)
        _link_parents(block)
        return block

    # --- statement dispatch ---

    def _parse_stmt(self, pos: int, limit: int) -> tuple[Stmt | None, int]:
        t = self.toks[pos]
        text = t.text
        if text == ";":
            return self._stmt("empty", pos, pos + 1), pos + 1
        if text == "{":
            close = match_brace(self.toks, pos)
            inner = self._stmt("block", pos, close + 1)
            p = pos + 1
            while p < close:
                c, p = self._parse_stmt(p, close)
                if c is not None:
                    inner.children.append(c)
            return inner, close + 1
        if text == "if":
            return self._parse_if(pos, limit)
        if text == "while":
            open_p = self._index_of(pos, "(")
            close_p = match_paren(self.toks, open_p)
            body, end = self._parse_stmt(close_p + 1, limit)
            st = self._stmt("while", pos, end)
            st.cond_range = (open_p + 1, close_p)
            if body is not None:
                body.role = "body"
                st.children.append(body)
            return st, end
        if text == "do":
            body, p = self._parse_stmt(pos + 1, limit)
            # 'while (cond) ;'
            open_p = self._index_of(p, "(")
            close_p = match_paren(self.toks, open_p)
            end = self._stmt_end(close_p + 1, limit)
            st = self._stmt("dowhile", pos, end)
            st.cond_range = (open_p + 1, close_p)
            if body is not None:
                body.role = "body"
                st.children.append(body)
            return st, end
        if text == "for":
            return self._parse_for(pos, limit)
        if text == "switch":
            return self._parse_switch(pos, limit)
        if text == "try":
            return self._parse_try(pos, limit)
        if text == "throw":
            end = self._stmt_end(pos, limit)
            return self._stmt("throw", pos, end), end
        if text in ("return", "break", "continue", "assert", "yield"):
            end = self._stmt_end(pos, limit)
            return self._stmt(text if text in ("return",) else "other", pos, end), end
        if text == "synchronized":
            open_p = self._index_of(pos, "(")
            close_p = match_paren(self.toks, open_p)
            body, end = self._parse_stmt(close_p + 1, limit)
            st = self._stmt("synchronized", pos, end)
            if body is not None:
                body.role = "body"
                st.children.append(body)
            return st, end
        if (
            t.kind == "ident"
            and pos + 1 < limit
            and self.toks[pos + 1].text == ":"
            and (pos + 2 >= limit or self.toks[pos + 2].text != ":")
        ):
            inner, end = self._parse_stmt(pos + 2, limit)
            st = self._stmt("labeled", pos, end)
            if inner is not None:
                st.children.append(inner)
            return st, end
        # local variable declaration or expression statement
        end = self._stmt_end(pos, limit)
        decl = self._try_local_var(pos, end)
        if decl is not None:
            return decl, end
        st = self._stmt("expr", pos, end)
        self._extract_assignment(st, pos, end)
        return st, end

    def _parse_if(self, pos: int, limit: int) -> tuple[Stmt, int]:
        open_p = self._index_of(pos, "(")
        close_p = match_paren(self.toks, open_p)
        then_stmt, p = self._parse_stmt(close_p + 1, limit)
        else_stmt = None
        if p < limit and self.toks[p].text == "else":
            else_stmt, p = self._parse_stmt(p + 1, limit)
        st = self._stmt("if", pos, p)
        st.cond_range = (open_p + 1, close_p)
        if then_stmt is not None:
            then_stmt.role = "then"
            st.children.append(then_stmt)
        if else_stmt is not None:
            else_stmt.role = "else"
            st.children.append(else_stmt)
        return st, p

    def _parse_for(self, pos: int, limit: int) -> tuple[Stmt, int]:
        open_p = self._index_of(pos, "(")
        close_p = match_paren(self.toks, open_p)
        header = range(open_p + 1, close_p)
        semis = [k for k in header if self.toks[k].text == ";" and self._depth0(open_p + 1, k)]
        body, end = self._parse_stmt(close_p + 1, limit)
        st = self._stmt("for", pos, end)
        if len(semis) == 2:
            cond_lo, cond_hi = semis[0] + 1, semis[1]
            if cond_hi > cond_lo:
                st.cond_range = (cond_lo, cond_hi)
        if body is not None:
            body.role = "body"
            st.children.append(body)
        return st, end

    def _parse_switch(self, pos: int, limit: int) -> tuple[Stmt, int]:
        open_p = self._index_of(pos, "(")
        close_p = match_paren(self.toks, open_p)
        open_b = self._index_of(close_p, "{")
        close_b = match_brace(self.toks, open_b)
        st = self._stmt("switch", pos, close_b + 1)
        st.selector_range = (open_p + 1, close_p)
        p = open_b + 1
        group: Stmt | None = None
        while p < close_b:
            word = self.toks[p].text
            if word in ("case", "default"):
                group_start = p
                labels: list[tuple[int, int] | None] = []
                while p < close_b and self.toks[p].text in ("case", "default"):
                    is_default = self.toks[p].text == "default"
                    p += 1
                    lab_start = p
                    depth = 0
                    while p < close_b:
                        tt = self.toks[p].text
                        if tt in "([{":
                            depth += 1
                        elif tt in ")]}":
                            depth -= 1
                        elif depth == 0 and tt in (":", "->"):
                            break
                        elif depth == 0 and tt == "," and not is_default:
                            labels.append((lab_start, p))
                            lab_start = p + 1
                        p += 1
                    if is_default:
                        labels.append(None)
                    elif p > lab_start:
                        labels.append((lab_start, p))
                    p += 1  # skip ':' or '->'
                group = self._stmt("case", group_start, p)
                group.labels = labels
                group.role = "group"
                st.children.append(group)
                continue
            child, p = self._parse_stmt(p, close_b)
            if child is not None:
                if group is None:
                    group = self._stmt("case", child.tok_start, child.tok_end)
                    group.labels = []
                    group.role = "group"
                    st.children.append(group)
                group.children.append(child)
                group.tok_end = child.tok_end
                group.end_line = max(group.end_line, child.end_line)
                group.start_line = min(group.start_line, child.start_line)
        return st, close_b + 1

    def _parse_try(self, pos: int, limit: int) -> tuple[Stmt, int]:
        p = pos + 1
        if p < limit and self.toks[p].text == "(":
            p = match_paren(self.toks, p) + 1
        body, p = self._parse_stmt(p, limit)
        st = self._stmt("try", pos, p)
        if body is not None:
            body.role = "body"
            st.children.append(body)
        while p < limit and self.toks[p].text == "catch":
            open_p = self._index_of(p, "(")
            close_p = match_paren(self.toks, open_p)
            cbody, p = self._parse_stmt(close_p + 1, limit)
            catch = self._stmt("catch", open_p, p)
            catch.cond_range = (open_p + 1, close_p)  # catch parameter tokens
            catch.role = "catch"
            if cbody is not None:
                cbody.role = "body"
                catch.children.append(cbody)
            st.children.append(catch)
        if p < limit and self.toks[p].text == "finally":
            fbody, p = self._parse_stmt(p + 1, limit)
            if fbody is not None:
                fbody.role = "finally"
                st.children.append(fbody)
        st.tok_end = p
        st.end_line = self.toks[p - 1].line
        return st, p

    # --- local variables and assignments ---

    def _try_local_var(self, pos: int, end: int) -> Stmt | None:
        """Recognize 'Type name (= init)? (, name (= init)?)* ;'."""
        p = pos
        if self.toks[p].text == "final":
            p += 1
        t = self.toks[p]
        if not (t.kind == "ident" or t.text in _PRIMITIVES or t.text == "var"):
            return None
        p += 1
        angle = 0
        # consume the rest of a type: dots, generics, arrays
        while p < end:
            tt = self.toks[p].text
            if tt == "<":
                angle += 1
            elif tt == ">":
                angle -= 1
            elif tt == ">>":
                angle -= 2
            elif angle == 0 and tt in (".",):
                p += 1
                if p < end and self.toks[p].kind in ("ident", "keyword"):
                    p += 1
                continue
            elif angle == 0 and tt == "[":
                if p + 1 < end and self.toks[p + 1].text == "]":
                    p += 2
                    continue
                return None
            elif angle > 0:
                pass  # anything inside generics
            else:
                break
            p += 1
        if p >= end or self.toks[p].kind != "ident":
            return None
        nxt = self.toks[p + 1].text if p + 1 < end else ";"
        if nxt not in ("=", ",", ";"):
            return None
        st = self._stmt("localvar", pos, end)
        while p < end and self.toks[p].kind == "ident":
            name = self.toks[p].text
            p += 1
            if p < end and self.toks[p].text == "=":
                rhs_start = p + 1
                depth = 0
                q = rhs_start
                while q < end:
                    tt = self.toks[q].text
                    if tt in "([{":
                        depth += 1
                    elif tt in ")]}":
                        depth -= 1
                    elif depth == 0 and tt in (",", ";"):
                        break
                    q += 1
                st.assignments.append((name, (rhs_start, q), "="))
                p = q
            if p < end and self.toks[p].text == ",":
                p += 1
                continue
            break
        return st

    def _extract_assignment(self, st: Stmt, pos: int, end: int) -> None:
        """Record 'name op= rhs' / 'name++' forms for the guard walk."""
        hi = end - 1 if self.toks[end - 1].text == ";" else end
        if hi - pos >= 2 and self.toks[pos].kind == "ident":
            op = self.toks[pos + 1].text
            if op in _ASSIGN_OPS:
                st.assignments.append((self.toks[pos].text, (pos + 2, hi), op))
                return
            if op in ("++", "--") and hi == pos + 2:
                st.assignments.append((self.toks[pos].text, (pos, pos), op))
                return
        if hi - pos == 2 and self.toks[pos].text in ("++", "--"):
            if self.toks[pos + 1].kind == "ident":
                st.assignments.append(
                    (self.toks[pos + 1].text, (pos, pos), self.toks[pos].text)
                )

    # --- small helpers ---

    def _stmt(self, kind: str, start: int, end: int) -> Stmt:
        start = min(start, len(self.toks) - 1)
        last = max(start, min(end - 1, len(self.toks) - 1))
        return Stmt(
            kind=kind,
            start_line=self.toks[start].line,
            end_line=self.toks[last].line,
            tok_start=start,
            tok_end=end,
        )

    def _stmt_end(self, pos: int, limit: int) -> int:
        """Index just past the ';' terminating a simple statement."""
        depth = 0
        k = pos
        while k < limit:
            t = self.toks[k].text
            if t in "([{":
                depth += 1
            elif t in ")]}":
                depth -= 1
            elif t == ";" and depth == 0:
                return k + 1
            k += 1
        return limit

    def _index_of(self, pos: int, text: str) -> int:
        k = pos
        while self.toks[k].text != text:
            k += 1
        return k

    def _depth0(self, lo: int, at: int) -> bool:
        depth = 0
        for k in range(lo, at):
            t = self.toks[k].text
            if t in "([{":
                depth += 1
            elif t in ")]}":
                depth -= 1
        return depth == 0

    # --- queries used by the guard walk ---

    def expr_at(self, rng: tuple[int, int]) -> exprs.Expr:
        return exprs.parse_expr_tokens(self.toks[rng[0] : rng[1]], self.src)

    def text_at(self, rng: tuple[int, int]) -> str:
        lo, hi = rng
        if hi <= lo:
            return ""
        return self.src[self.toks[lo].offset : self.toks[hi - 1].end]


def _link_parents(root: Stmt) -> None:
    for node in root.iter_tree():
        for c in node.children:
            c.parent = node


def stmts_at_line(root: Stmt, line: int) -> list[Stmt]:
    """Leaf-most statements whose span contains the line, in source order."""
    hits = [s for s in root.iter_tree() if s.contains_line(line)]
    leafmost = [
        s for s in hits
        if not any(c.contains_line(line) for c in s.children)
    ]
    return leafmost


def statement_at_line(root: Stmt, line: int, prefer_kind: str | None = None) -> Stmt | None:
    """The statement a stack-trace line points at.

    When several statements share the line (single-line if/throw), an
    explicit kind preference wins, then the first in source order.
    """
    candidates = stmts_at_line(root, line)
    if not candidates:
        return None
    if prefer_kind is not None:
        preferred = [s for s in candidates if s.kind == prefer_kind]
        if preferred:
            return preferred[0]
    return candidates[0]
