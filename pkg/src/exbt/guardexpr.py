"""Guard expressions: the conditions that steer execution into a throw.

Two passes, both driven by the stack trace. The collection pass walks each
traced method from the statement named by the frame line up to the method
declaration, picking up branch conditions and the assignments that feed
them; frames are processed innermost first, and a method-declaration /
method-call node pair bridges every caller boundary. The computation pass
folds the collected nodes into a conjunction, substituting assigned names
and call arguments into the conditions gathered so far.

Substitution happens on parse trees and wraps compound replacements in
explicit parentheses, so a rendered guard can never change meaning through
operator precedence. The original condition text is kept alongside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from exbt.errors import FrameOutOfSpan, JavaParseError
from exbt.jmodel import CompilationUnit, MethodDecl, RepoContext
from exbt.jmodel import exprs
from exbt.jmodel.exprs import Binary, Expr, Grouped, Lit, Name, Opaque, Unary
from exbt.jmodel.stmts import Stmt, statement_at_line, stmts_at_line
from exbt.stacktrace import StackTrace

START = "StartStatement"
CONDITION = "Condition"
NEGATED = "NegatedCondition"
ASSIGNMENT = "Assignment"
METHOD_DECL = "MethodDecl"
METHOD_CALL = "MethodCall"


@dataclass(frozen=True)
class CollectedNode:
    tag: str
    text: str  # source text of the construct
    line: int
    expr: Expr | None = None  # condition expression (un-negated source form)
    name: str | None = None  # assignment target
    rhs: Expr | None = None  # assignment right-hand side
    params: tuple[str, ...] = ()  # MethodDecl parameter names
    args: tuple[Expr, ...] = ()  # MethodCall actual arguments


@dataclass(frozen=True)
class GuardExpression:
    conditions: tuple[str, ...]  # rendered, in collection order
    condition_exprs: tuple[Expr, ...] = field(compare=False)
    source_texts: tuple[str, ...] = ()  # conditions as originally written
    rendered: str = ""  # conjunction joined with &&
    unresolved_names: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.conditions)


def _parse_or_opaque(unit: CompilationUnit, rng: tuple[int, int]) -> Expr:
    text = _text(unit, rng)
    try:
        return exprs.parse_expr_tokens(unit.tokens[rng[0] : rng[1]], unit.source)
    except JavaParseError:
        return Opaque(text)


def _text(unit: CompilationUnit, rng: tuple[int, int]) -> str:
    lo, hi = rng
    if hi <= lo:
        return ""
    return unit.source[unit.tokens[lo].offset : unit.tokens[hi - 1].end]


def _negate(e: Expr) -> Expr:
    if isinstance(e, Unary) and e.op == "!" and not e.postfix:
        return e.operand
    if isinstance(e, Grouped) and isinstance(e.inner, Unary) \
            and e.inner.op == "!" and not e.inner.postfix:
        return e.inner.operand
    return Unary("!", e)


def _assignment_rhs(unit: CompilationUnit, name: str, rng, op: str) -> Expr:
    if op == "=":
        return _parse_or_opaque(unit, rng)
    if op in ("++", "--"):
        return Binary("+" if op == "++" else "-", Name(name), Lit("1"))
    base = op[:-1]  # '+=' -> '+'
    rhs = _parse_or_opaque(unit, rng)
    if not isinstance(rhs, (Name, Lit, Grouped)):
        rhs = Grouped(rhs)
    return Binary(base, Name(name), rhs)


def _assignment_nodes(unit: CompilationUnit, stmt: Stmt) -> list[CollectedNode]:
    nodes = []
    for name, rng, op in stmt.assignments:
        nodes.append(
            CollectedNode(
                tag=ASSIGNMENT,
                text=_text(unit, (stmt.tok_start, stmt.tok_end)).strip(),
                line=stmt.start_line,
                name=name,
                rhs=_assignment_rhs(unit, name, rng, op),
            )
        )
    return nodes


def _condition_node(unit: CompilationUnit, rng, line: int, negated: bool) -> CollectedNode:
    return CollectedNode(
        tag=NEGATED if negated else CONDITION,
        text=_text(unit, rng),
        line=line,
        expr=_parse_or_opaque(unit, rng),
    )


def _switch_nodes(unit: CompilationUnit, group: Stmt, switch: Stmt) -> list[CollectedNode]:
    """Equality conditions for the matched case; negations for default."""
    selector = _parse_or_opaque(unit, switch.selector_range)
    if not isinstance(selector, (Name, Lit, Grouped)):
        selector = Grouped(selector)
    own = group.labels or []
    nodes: list[CollectedNode] = []
    if None in own:  # default: conjunction of negations of every other label
        for sibling in switch.children:
            if sibling is group:
                continue
            for lab in sibling.labels or []:
                if lab is None:
                    continue
                eq = Binary("==", selector, _parse_or_opaque(unit, lab))
                nodes.append(
                    CollectedNode(
                        tag=NEGATED,
                        text=_text(unit, lab),
                        line=group.start_line,
                        expr=eq,
                    )
                )
        return nodes
    eqs = [Binary("==", selector, _parse_or_opaque(unit, lab)) for lab in own if lab]
    if not eqs:
        return nodes
    cond: Expr = eqs[0]
    for e in eqs[1:]:
        cond = Binary("||", cond, e)
    nodes.append(
        CollectedNode(
            tag=CONDITION,
            text=_text(unit, (group.tok_start, group.tok_end)),
            line=group.start_line,
            expr=cond,
        )
    )
    return nodes


def _preceding_assignments(
    unit: CompilationUnit, parent: Stmt, current: Stmt
) -> list[CollectedNode]:
    """Assignments textually before current, closest first."""
    nodes: list[CollectedNode] = []
    idx = parent.children.index(current)
    for sibling in reversed(parent.children[:idx]):
        if sibling.kind in ("localvar", "expr") and sibling.assignments:
            nodes.extend(reversed(_assignment_nodes(unit, sibling)))
    return nodes


def _walk_up(unit: CompilationUnit, start: Stmt) -> list[CollectedNode]:
    nodes: list[CollectedNode] = []
    current = start
    while current.parent is not None:
        parent = current.parent
        if parent.kind == "if" and parent.cond_range is not None:
            if current.role == "then":
                nodes.append(
                    _condition_node(unit, parent.cond_range, parent.start_line, False)
                )
            elif current.role == "else":
                nodes.append(
                    _condition_node(unit, parent.cond_range, parent.start_line, True)
                )
        elif parent.kind in ("while", "for") and current.role == "body":
            if parent.cond_range is not None:
                nodes.append(
                    _condition_node(unit, parent.cond_range, parent.start_line, False)
                )
        elif parent.kind == "case" and parent.parent is not None:
            nodes.extend(_preceding_assignments(unit, parent, current))
            nodes.extend(_switch_nodes(unit, parent, parent.parent))
        elif parent.kind == "block":
            nodes.extend(_preceding_assignments(unit, parent, current))
        current = parent
    return nodes


def _find_call(unit: CompilationUnit, stmt: Stmt, callee: MethodDecl):
    """The call to `callee` inside stmt: (args, source text), or None."""
    toks = unit.tokens
    target_names = {callee.name}
    if callee.is_ctor:
        target_names.add(callee.owner_fqn.split(".")[-1].split("$")[-1])
    for k in range(stmt.tok_start, stmt.tok_end):
        t = toks[k]
        if t.kind != "ident" or t.text not in target_names:
            continue
        if k + 1 >= stmt.tok_end or toks[k + 1].text != "(":
            continue
        from exbt.jmodel.lexer import match_paren

        close = match_paren(toks, k + 1)
        args: list[Expr] = []
        if close > k + 2:
            depth = 0
            seg = k + 2
            for i in range(k + 2, close + 1):
                tt = toks[i].text
                if i < close and tt in "([{":
                    depth += 1
                elif i < close and tt in ")]}":
                    depth -= 1
                if i == close or (tt == "," and depth == 0):
                    args.append(_parse_or_opaque(unit, (seg, i)))
                    seg = i + 1
        if len(args) == callee.arity:
            text = unit.source[t.offset : toks[close].end]
            return tuple(args), text
    return None


def collect_nodes(trace: StackTrace, ctx: RepoContext) -> list[CollectedNode]:
    """Collect condition, assignment and call nodes along the trace.

    Frames are traversed in reversed order (throw site first); within a
    frame the walk climbs child to parent from the statement at the frame
    line to the method declaration. The statement at the frame line is
    always included.
    """
    nodes: list[CollectedNode] = []
    prev: tuple[CompilationUnit, MethodDecl] | None = None
    for frame in reversed(trace.frames):
        unit, _, decl = ctx.resolve_frame(frame.class_fqn, frame.method, frame.line)
        if not (decl.start_line <= frame.line <= decl.end_line):
            raise FrameOutOfSpan(
                f"line {frame.line} outside {decl.name} "
                f"({decl.start_line}..{decl.end_line}) in {unit.path}"
            )
        tree = ctx.body_tree(unit, decl)
        if tree is None:
            raise FrameOutOfSpan(f"{decl.name} has no body")
        prefer = "throw" if prev is None else None
        start = statement_at_line(tree, frame.line, prefer_kind=prefer)
        if start is None:
            raise FrameOutOfSpan(
                f"no statement at line {frame.line} of {decl.name} in {unit.path}"
            )
        found = None
        if prev is not None:
            _, prev_decl = prev
            found = _find_call(unit, start, prev_decl)
            if found is None:
                # several statements may share the frame line; prefer the
                # one actually holding the call
                for candidate in stmts_at_line(tree, frame.line):
                    found = _find_call(unit, candidate, prev_decl)
                    if found is not None:
                        start = candidate
                        break
            if found is not None:
                args, call_text = found
                nodes.append(
                    CollectedNode(
                        tag=METHOD_DECL,
                        text=f"{prev_decl.name}({', '.join(n for _, n in prev_decl.params)})",
                        line=prev_decl.decl_line,
                        params=tuple(prev_decl.param_names),
                    )
                )
                nodes.append(
                    CollectedNode(
                        tag=METHOD_CALL,
                        text=call_text,
                        line=frame.line,
                        args=args,
                    )
                )
        start_node = CollectedNode(
            tag=START,
            text=_text(unit, (start.tok_start, start.tok_end)).strip(),
            line=start.start_line,
        )
        nodes.append(start_node)
        if start.assignments:
            nodes.extend(_assignment_nodes(unit, start))
        nodes.extend(_walk_up(unit, start))
        prev = (unit, decl)
    return nodes


def merge(conditions, mapping):
    """Substitute mapped names inside each condition.

    Accepts rendered strings or expression trees (and string or tree
    replacement values); returns the same shape. Matching respects
    identifier boundaries because it runs on parse trees.
    """
    as_text = bool(conditions) and isinstance(conditions[0], str)
    parsed = [
        exprs.parse_expr(c) if isinstance(c, str) else c for c in conditions
    ]
    mapped = {
        k: (exprs.parse_expr(v) if isinstance(v, str) else v)
        for k, v in mapping.items()
    }
    out = [exprs.substitute(e, mapped) for e in parsed]
    if as_text:
        return [exprs.render(e) for e in out]
    return out


def compute_guard_expression(trace: StackTrace, ctx: RepoContext) -> GuardExpression:
    """Fold collected nodes into the guard conjunction for the trace."""
    nodes = collect_nodes(trace, ctx)
    conds: list[Expr] = []
    texts: list[str] = []
    pending_params: tuple[str, ...] = ()
    for node in nodes:
        if node.tag == CONDITION and node.expr is not None:
            conds.append(node.expr)
            texts.append(node.text)
        elif node.tag == NEGATED and node.expr is not None:
            conds.append(_negate(node.expr))
            texts.append(node.text)
        elif node.tag == ASSIGNMENT and node.name is not None and node.rhs is not None:
            conds = [exprs.substitute(e, {node.name: node.rhs}) for e in conds]
        elif node.tag == METHOD_DECL:
            pending_params = node.params
        elif node.tag == METHOD_CALL:
            argmap = dict(zip(pending_params, node.args))
            conds = [exprs.substitute(e, argmap) for e in conds]
    # visible names: parameters and fields of the method under test
    visible = {"this", "super", "true", "false", "null"}
    if trace.frames:
        mut = trace.frames[0]
        try:
            unit, type_decl, decl = ctx.resolve_frame(mut.class_fqn, mut.method, mut.line)
            visible.update(decl.param_names)
            visible.update(type_decl.field_names)
        except Exception:
            pass
    free: set[str] = set()
    for e in conds:
        free.update(exprs.free_names(e))
    rendered_each = tuple(exprs.render(e) for e in conds)
    return GuardExpression(
        conditions=rendered_each,
        condition_exprs=tuple(conds),
        source_texts=tuple(texts),
        rendered=" && ".join(rendered_each),
        unresolved_names=tuple(sorted(free - visible)),
    )


def evaluate_guard(guard: GuardExpression, env: dict[str, int | bool]) -> bool:
    """Evaluate the conjunction over an int/bool environment.

    Left-to-right with short circuits; an empty guard is vacuously true.
    Raises UnboundName for missing names and UnsupportedConstruct for
    anything beyond arithmetic, comparisons and boolean operators.
    """
    for e in guard.condition_exprs:
        if not exprs.evaluate(e, env):
            return False
    return True
