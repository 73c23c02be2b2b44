"""Repository model: parsed units, methods, throw sites and the call graph.

Parsing only looks at repository sources, so throws living in dependency
libraries can never enter the model. Call resolution is name+arity within
the repository; equal-arity overloads yield edges to every candidate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from exbt.errors import IoError, JavaParseError, NoJavaSources, UnknownMethod
from exbt.jmodel.lexer import Token, match_brace, match_paren, tokenize
from exbt.jmodel.stmts import BodyParser, Stmt

_MODIFIERS = {
    "public", "private", "protected", "static", "final", "abstract",
    "default", "synchronized", "native", "transient", "volatile", "strictfp",
    "sealed", "non-sealed",
}
_TYPE_KEYWORDS = {"class", "interface", "enum", "record"}


@dataclass(frozen=True)
class MethodId:
    fqn: str  # declaring class, nested classes joined with '$'
    name: str
    param_arity: int
    decl_file: str  # repository-relative posix path
    decl_line: int

    def label(self) -> str:
        return f"{self.fqn}#{self.name}/{self.param_arity}"


@dataclass(frozen=True)
class ThrowSite:
    method: MethodId
    line: int
    exception_type: str
    statement_text: str

    def label(self) -> str:
        return f"{self.method.decl_file}:{self.line}"


@dataclass
class MethodDecl:
    name: str
    owner_fqn: str
    params: list[tuple[str, str]]  # (type text, name)
    decl_line: int
    start_line: int
    end_line: int
    tok_start: int  # first member token (annotations included)
    tok_open: int | None  # '{' of the body, None for abstract members
    tok_close: int | None
    annotations: list[str]
    modifiers: list[str]
    is_ctor: bool = False
    compact: bool = False
    varargs: bool = False

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def param_names(self) -> list[str]:
        return [n for _, n in self.params]


@dataclass
class TypeDecl:
    kind: str  # class | interface | enum | record | annotation
    name: str
    fqn: str
    start_line: int
    end_line: int
    methods: list[MethodDecl] = field(default_factory=list)
    nested: list["TypeDecl"] = field(default_factory=list)
    field_names: list[str] = field(default_factory=list)
    record_components: list[tuple[str, str]] = field(default_factory=list)

    def all_types(self):
        yield self
        for t in self.nested:
            yield from t.all_types()


@dataclass
class CompilationUnit:
    path: str  # repository-relative posix path
    source: str
    tokens: list[Token]
    package: str
    imports: list[str]
    types: list[TypeDecl]

    def all_types(self):
        for t in self.types:
            yield from t.all_types()

    def all_methods(self):
        for t in self.all_types():
            for m in t.methods:
                yield t, m

    def text(self, tok_lo: int, tok_hi_inclusive: int) -> str:
        lo = self.tokens[tok_lo].offset
        hi = self.tokens[tok_hi_inclusive].end
        return self.source[lo:hi]


@dataclass(frozen=True)
class CallEdge:
    caller: MethodId
    callee: MethodId | None  # None when the call does not resolve in-repo
    callee_name: str
    callee_arity: int
    line: int  # call site line in the caller's file

    @property
    def external(self) -> bool:
        return self.callee is None


class _UnitParser:
    def __init__(self, source: str, path: str):
        self.src = source
        self.path = path
        self.toks = tokenize(source)

    def parse(self) -> CompilationUnit:
        package = ""
        imports: list[str] = []
        types: list[TypeDecl] = []
        i = 0
        n = len(self.toks)
        while i < n:
            t = self.toks[i]
            if t.text == "package":
                j = self._semi(i)
                package = self._join(i + 1, j)
                i = j + 1
            elif t.text == "import":
                j = self._semi(i)
                start = i + 1
                prefix = ""
                if self.toks[start].text == "static":
                    start += 1
                    prefix = "static "
                imports.append(prefix + self._join(start, j))
                i = j + 1
            elif t.text in _TYPE_KEYWORDS:
                decl, i = self._parse_type(i, package or None, None)
                types.append(decl)
            elif t.text == "@" and i + 1 < n and self.toks[i + 1].text == "interface":
                decl, i = self._parse_type(i + 1, package or None, None)
                decl.kind = "annotation"
                types.append(decl)
            else:
                i += 1
        return CompilationUnit(self.path, self.src, self.toks, package, imports, types)

    def _parse_type(self, kw_index: int, package: str | None, outer_fqn: str | None):
        kind = self.toks[kw_index].text
        name_tok = self.toks[kw_index + 1]
        name = name_tok.text
        if outer_fqn:
            fqn = f"{outer_fqn}${name}"
        elif package:
            fqn = f"{package}.{name}"
        else:
            fqn = name
        record_params: list[tuple[str, str]] = []
        open_b = kw_index + 2
        if kind == "record" and self.toks[open_b].text == "(":
            close_p = match_paren(self.toks, open_b)
            record_params, _ = self._parse_params(open_b + 1, close_p)
            open_b = close_p + 1
        while self.toks[open_b].text != "{":
            open_b += 1
        close_b = match_brace(self.toks, open_b)
        decl = TypeDecl(
            kind=kind,
            name=name,
            fqn=fqn,
            start_line=name_tok.line,
            end_line=self.toks[close_b].line,
        )
        # record components behave like fields and constructor parameters
        decl.record_components = record_params
        decl.field_names.extend(n for _, n in record_params)
        lo = open_b + 1
        if kind == "enum":
            lo = self._skip_enum_constants(lo, close_b)
        self._parse_members(decl, lo, close_b)
        return decl, close_b + 1

    def _skip_enum_constants(self, lo: int, hi: int) -> int:
        depth = 0
        for k in range(lo, hi):
            t = self.toks[k].text
            if t in "([{":
                depth += 1
            elif t in ")]}":
                depth -= 1
            elif t == ";" and depth == 0:
                return k + 1
        return hi

    def _parse_members(self, decl: TypeDecl, lo: int, hi: int) -> None:
        p = lo
        while p < hi:
            member_start = p
            annotations: list[str] = []
            modifiers: list[str] = []
            # annotations and modifiers may interleave
            while p < hi:
                t = self.toks[p]
                if t.text == "@" and p + 1 < hi and self.toks[p + 1].text != "interface":
                    p, text = self._skip_annotation(p)
                    annotations.append(text)
                elif t.text in _MODIFIERS:
                    modifiers.append(t.text)
                    p += 1
                else:
                    break
            if p >= hi:
                break
            t = self.toks[p]
            if t.text == ";":
                p += 1
                continue
            if t.text in _TYPE_KEYWORDS:
                nested, p = self._parse_type(p, None, decl.fqn)
                decl.nested.append(nested)
                continue
            if t.text == "@" and p + 1 < hi and self.toks[p + 1].text == "interface":
                nested, p = self._parse_type(p + 1, None, decl.fqn)
                nested.kind = "annotation"
                decl.nested.append(nested)
                continue
            if t.text == "{":  # initializer block
                close = match_brace(self.toks, p)
                pseudo = "<clinit>" if "static" in modifiers else "<init>"
                decl.methods.append(
                    MethodDecl(
                        name=pseudo,
                        owner_fqn=decl.fqn,
                        params=[],
                        decl_line=t.line,
                        start_line=self.toks[member_start].line,
                        end_line=self.toks[close].line,
                        tok_start=member_start,
                        tok_open=p,
                        tok_close=close,
                        annotations=annotations,
                        modifiers=modifiers,
                    )
                )
                p = close + 1
                continue
            if t.text == "<":  # generic method type parameters
                p = self._skip_angles(p)
            kind_idx, kind = self._first_structural(p, hi)
            if kind == "(":
                method, p = self._parse_method(
                    decl, member_start, kind_idx, annotations, modifiers
                )
                if method is not None:
                    decl.methods.append(method)
                continue
            if kind == "{":
                # record compact constructor: 'Name {'
                name_t = self.toks[kind_idx - 1]
                close = match_brace(self.toks, kind_idx)
                if name_t.text == decl.name:
                    decl.methods.append(
                        MethodDecl(
                            name="<init>",
                            owner_fqn=decl.fqn,
                            params=list(decl.record_components),
                            decl_line=name_t.line,
                            start_line=self.toks[member_start].line,
                            end_line=self.toks[close].line,
                            tok_start=member_start,
                            tok_open=kind_idx,
                            tok_close=close,
                            annotations=annotations,
                            modifiers=modifiers,
                            is_ctor=True,
                            compact=True,
                        )
                    )
                p = close + 1
                continue
            # field declaration: collect declared names, skip to ';'
            end = self._member_semi(p, hi)
            angle = 0
            bracket = 0
            for k in range(p, end):
                tk = self.toks[k]
                if tk.text == "<":
                    angle += 1
                elif tk.text == ">":
                    angle = max(0, angle - 1)
                elif tk.text == ">>":
                    angle = max(0, angle - 2)
                elif tk.text in "([{":
                    bracket += 1
                elif tk.text in ")]}":
                    bracket -= 1
                if tk.kind == "ident" and angle == 0 and bracket == 0:
                    nxt = self.toks[k + 1].text if k + 1 < len(self.toks) else ";"
                    prev = self.toks[k - 1].text if k > 0 else ""
                    if nxt in ("=", ",", ";") and prev != ".":
                        decl.field_names.append(tk.text)
            p = end + 1

    def _parse_method(self, decl, member_start, open_paren, annotations, modifiers):
        name_tok = self.toks[open_paren - 1]
        close_paren = match_paren(self.toks, open_paren)
        params, varargs = self._parse_params(open_paren + 1, close_paren)
        is_ctor = name_tok.text == decl.name
        p = close_paren + 1
        tok_open = tok_close = None
        end_line = self.toks[close_paren].line
        while p < len(self.toks):
            text = self.toks[p].text
            if text == "{":
                tok_open = p
                tok_close = match_brace(self.toks, p)
                end_line = self.toks[tok_close].line
                p = tok_close + 1
                break
            if text == ";":
                end_line = self.toks[p].line
                p += 1
                break
            p += 1
        method = MethodDecl(
            name="<init>" if is_ctor else name_tok.text,
            owner_fqn=decl.fqn,
            params=params,
            decl_line=name_tok.line,
            start_line=self.toks[member_start].line,
            end_line=end_line,
            tok_start=member_start,
            tok_open=tok_open,
            tok_close=tok_close,
            annotations=annotations,
            modifiers=modifiers,
            is_ctor=is_ctor,
            varargs=varargs,
        )
        return method, p

    def _parse_params(self, lo: int, hi: int):
        params: list[tuple[str, str]] = []
        varargs = False
        if lo >= hi:
            return params, varargs
        start = lo
        depth = 0
        pieces: list[tuple[int, int]] = []
        for k in range(lo, hi):
            t = self.toks[k].text
            if t in "([{":
                depth += 1
            elif t in ")]}":
                depth -= 1
            elif t == "," and depth == 0 and not self._in_angles(start, k):
                pieces.append((start, k))
                start = k + 1
        pieces.append((start, hi))
        for plo, phi in pieces:
            toks = self.toks[plo:phi]
            if not toks or (len(toks) == 1 and toks[0].text == "this"):
                continue
            if any(t.text == "..." for t in toks):
                varargs = True
            names = [t for t in toks if t.kind == "ident"]
            if not names:
                continue
            name = names[-1].text
            type_text = self._join(plo, phi - 1).rsplit(name, 1)[0].strip()
            params.append((type_text, name))
        return params, varargs

    def _in_angles(self, lo: int, at: int) -> bool:
        depth = 0
        for k in range(lo, at):
            t = self.toks[k].text
            if t == "<":
                depth += 1
            elif t == ">":
                depth = max(0, depth - 1)
            elif t == ">>":
                depth = max(0, depth - 2)
        return depth > 0

    def _first_structural(self, p: int, hi: int):
        """First of '(', '=', ';', '{' at bracket depth 0 from p."""
        depth = 0
        for k in range(p, hi):
            t = self.toks[k].text
            if t in ")]":
                depth -= 1
                continue
            if depth == 0 and t in ("(", "=", ";", "{"):
                return k, t
            if t in "([":
                depth += 1
        return hi, ";"

    def _member_semi(self, p: int, hi: int) -> int:
        depth = 0
        for k in range(p, hi):
            t = self.toks[k].text
            if t in "([{":
                depth += 1
            elif t in ")]}":
                depth -= 1
            elif t == ";" and depth == 0:
                return k
        return hi

    def _skip_annotation(self, p: int):
        start = self.toks[p]
        p += 1  # '@'
        while p < len(self.toks) and self.toks[p].kind in ("ident", "keyword"):
            p += 1
            if p < len(self.toks) and self.toks[p].text == ".":
                p += 1
                continue
            break
        end_tok = self.toks[p - 1]
        if p < len(self.toks) and self.toks[p].text == "(":
            close = match_paren(self.toks, p)
            end_tok = self.toks[close]
            p = close + 1
        return p, self.src[start.offset : end_tok.end]

    def _skip_angles(self, p: int) -> int:
        depth = 0
        while p < len(self.toks):
            t = self.toks[p].text
            if t == "<":
                depth += 1
            elif t == ">":
                depth -= 1
            elif t == ">>":
                depth -= 2
            p += 1
            if depth <= 0:
                return p
        return p

    def _semi(self, p: int) -> int:
        while self.toks[p].text != ";":
            p += 1
        return p

    def _join(self, lo: int, hi: int) -> str:
        return "".join(t.text for t in self.toks[lo:hi])


def parse_unit(source: str, path: str) -> CompilationUnit:
    return _UnitParser(source, path).parse()


class RepoContext:
    """Immutable-after-load view of one Java repository."""

    def __init__(
        self,
        root_path: Path,
        units: list[CompilationUnit],
        main_files: list[str],
        test_files: list[str],
        warnings: list[str],
    ):
        self.root_path = root_path
        self.units = units
        self.main_files = main_files
        self.test_files = test_files
        self.warnings = warnings
        self._unit_by_path = {u.path: u for u in units}
        self._type_by_fqn: dict[str, tuple[CompilationUnit, TypeDecl]] = {}
        self._methods: list[tuple[CompilationUnit, TypeDecl, MethodDecl]] = []
        for u in units:
            for t in u.all_types():
                self._type_by_fqn[t.fqn] = (u, t)
                for m in t.methods:
                    self._methods.append((u, t, m))
        self._methods_by_key: dict[tuple[str, int], list] = {}
        self._ctors_by_key: dict[tuple[str, int], list] = {}
        for u, t, m in self._methods:
            key = (m.name, m.arity)
            self._methods_by_key.setdefault(key, []).append((u, t, m))
            if m.is_ctor:
                self._ctors_by_key.setdefault((t.name, m.arity), []).append((u, t, m))
        self.call_edges: list[CallEdge] = _build_call_edges(self)
        self._body_cache: dict[tuple[str, int, str], Stmt] = {}

    # --- lookups ---

    def unit_for(self, path: str) -> CompilationUnit | None:
        return self._unit_by_path.get(path)

    def unit_for_file_name(self, file_name: str) -> list[CompilationUnit]:
        return [u for u in self.units if Path(u.path).name == file_name]

    def method_id(self, unit: CompilationUnit, m: MethodDecl) -> MethodId:
        return MethodId(m.owner_fqn, m.name, m.arity, unit.path, m.decl_line)

    def resolve_method_id(self, mid: MethodId):
        """(unit, type, decl) for a MethodId, or UnknownMethod."""
        for u, t, m in self._methods:
            if (
                t.fqn == mid.fqn
                and m.name == mid.name
                and m.arity == mid.param_arity
                and u.path == mid.decl_file
            ):
                return u, t, m
        raise UnknownMethod(mid.label())

    def resolve_frame(self, class_fqn: str, method_name: str, line: int):
        """(unit, type, decl) for a stack frame, matching by fqn+name+line."""
        hit = self._type_by_fqn.get(class_fqn)
        candidates = []
        if hit is not None:
            u, t = hit
            candidates = [(u, t, m) for m in t.methods if m.name == method_name]
        else:
            # fall back to simple-name matching for default-package fixtures
            simple = class_fqn.rsplit(".", 1)[-1]
            for u, t, m in self._methods:
                if m.name == method_name and (t.fqn == simple or t.name == simple):
                    candidates.append((u, t, m))
        if not candidates:
            raise UnknownMethod(f"{class_fqn}.{method_name}")
        in_span = [c for c in candidates if c[2].start_line <= line <= c[2].end_line]
        if in_span:
            return in_span[0]
        return candidates[0]

    def methods_named(self, name: str, arity: int):
        return list(self._methods_by_key.get((name, arity), []))

    def all_method_ids(self) -> list[MethodId]:
        return [self.method_id(u, m) for u, _, m in self._methods]

    def method_decl_of(self, mid: MethodId) -> MethodDecl:
        return self.resolve_method_id(mid)[2]

    def method_source(self, mid: MethodId) -> str:
        u, _, m = self.resolve_method_id(mid)
        last = m.tok_close if m.tok_close is not None else m.tok_start
        return u.text(m.tok_start, last)

    def body_tree(self, unit: CompilationUnit, m: MethodDecl) -> Stmt | None:
        if m.tok_open is None:
            return None
        key = (unit.path, m.decl_line, m.name)
        tree = self._body_cache.get(key)
        if tree is None:
            tree = BodyParser(unit.tokens, unit.source).parse_block(m.tok_open)
            self._body_cache[key] = tree
        return tree

    def is_test_file(self, path: str) -> bool:
        return path in set(self.test_files)

    def files_declaring_class(self, class_fqn: str) -> list[str]:
        hit = self._type_by_fqn.get(class_fqn)
        if hit is not None:
            return [hit[0].path]
        simple = class_fqn.rsplit(".", 1)[-1].split("$")[0]
        return [
            u.path
            for u in self.units
            if any(t.name == simple for t in u.all_types())
        ]


def _is_test_path(rel: str) -> bool:
    parts = rel.split("/")
    joined = "/" + rel + "/"
    if "/src/test/" in joined:
        return True
    if "/src/main/" in joined:
        return False
    return any(seg in ("test", "tests") for seg in parts[:-1])


def load_repo(root, test_roots: list[str] | None = None) -> RepoContext:
    """Parse every .java file under root into a RepoContext.

    Unparseable files become warnings, not failures. test_roots overrides
    the src/main vs src/test convention with explicit path prefixes.
    """
    root = Path(root)
    if not root.exists() or not root.is_dir():
        raise IoError(f"repository root {root} is not a readable directory")
    try:
        files = sorted(p for p in root.rglob("*.java") if p.is_file())
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not files:
        raise NoJavaSources(f"no .java files under {root}")
    units: list[CompilationUnit] = []
    main_files: list[str] = []
    test_files: list[str] = []
    warnings: list[str] = []
    for path in files:
        rel = path.relative_to(root).as_posix()
        if test_roots is not None:
            is_test = any(rel == r or rel.startswith(r.rstrip("/") + "/") for r in test_roots)
        else:
            is_test = _is_test_path(rel)
        (test_files if is_test else main_files).append(rel)
        try:
            source = path.read_text(encoding="utf-8")
        except OSError as exc:
            warnings.append(f"{rel}: unreadable ({exc})")
            continue
        try:
            units.append(parse_unit(source, rel))
        except JavaParseError as exc:
            warnings.append(f"{rel}: parse failed ({exc})")
    return RepoContext(root, units, main_files, test_files, warnings)


def throw_sites_of(unit: CompilationUnit, m: MethodDecl, ctx: RepoContext) -> list[ThrowSite]:
    if m.tok_open is None:
        return []
    sites: list[ThrowSite] = []
    mid = ctx.method_id(unit, m)
    k = m.tok_open + 1
    while k < m.tok_close:
        t = unit.tokens[k]
        if t.text == "throw":
            end = k
            depth = 0
            while end < m.tok_close:
                tt = unit.tokens[end].text
                if tt in "([{":
                    depth += 1
                elif tt in ")]}":
                    depth -= 1
                elif tt == ";" and depth == 0:
                    break
                end += 1
            text = unit.source[t.offset : unit.tokens[end].end]
            sites.append(
                ThrowSite(
                    method=mid,
                    line=t.line,
                    exception_type=_thrown_type(unit.tokens, k, end),
                    statement_text=text,
                )
            )
            k = end + 1
            continue
        k += 1
    return sites


def _thrown_type(tokens: list[Token], throw_idx: int, end: int) -> str:
    k = throw_idx + 1
    if k < end and tokens[k].text == "new":
        parts = []
        k += 1
        while k < end and (tokens[k].kind in ("ident", "keyword") or tokens[k].text == "."):
            if tokens[k].text in ("(", "{"):
                break
            parts.append(tokens[k].text)
            k += 1
            if k < end and tokens[k].text in ("(", "{", "<"):
                break
        return "".join(parts)
    return "<unknown>"


def find_throw_sites(ctx: RepoContext, scope: str = "all") -> list[ThrowSite]:
    """Every throw statement in scope, ordered by (file, line).

    scope: 'main' restricts to main source files, 'all' includes tests.
    """
    assert scope in ("main", "all")
    main = set(ctx.main_files)
    sites: list[ThrowSite] = []
    for unit in ctx.units:
        if scope == "main" and unit.path not in main:
            continue
        for _, m in unit.all_methods():
            sites.extend(throw_sites_of(unit, m, ctx))
    sites.sort(key=lambda s: (s.method.decl_file, s.line))
    return sites


def _build_call_edges(ctx: RepoContext) -> list[CallEdge]:
    edges: list[CallEdge] = []
    for unit, _, m in ctx._methods:
        if m.tok_open is None:
            continue
        caller = ctx.method_id(unit, m)
        toks = unit.tokens
        for k in range(m.tok_open + 1, m.tok_close):
            t = toks[k]
            if t.kind != "ident" or k + 1 >= m.tok_close or toks[k + 1].text != "(":
                continue
            prev = toks[k - 1].text if k > 0 else ""
            close = match_paren(toks, k + 1)
            arity = _call_arity(toks, k + 1, close)
            if prev == "new":
                targets = ctx._ctors_by_key.get((t.text, arity), [])
            else:
                targets = ctx._methods_by_key.get((t.text, arity), [])
                targets = [(u2, t2, m2) for u2, t2, m2 in targets if not m2.is_ctor]
            if targets:
                for u2, _, m2 in targets:
                    edges.append(
                        CallEdge(caller, ctx.method_id(u2, m2), t.text, arity, t.line)
                    )
            else:
                edges.append(CallEdge(caller, None, t.text, arity, t.line))
    return edges


def _call_arity(tokens: list[Token], open_paren: int, close_paren: int) -> int:
    if close_paren == open_paren + 1:
        return 0
    depth = 0
    commas = 0
    for k in range(open_paren + 1, close_paren):
        t = tokens[k].text
        if t in "([{":
            depth += 1
        elif t in ")]}":
            depth -= 1
        elif t == "," and depth == 0:
            commas += 1
    return commas + 1


def reachable_throws(
    ctx: RepoContext, mut: MethodId, max_depth: int = 5
) -> list[tuple[ThrowSite, list[MethodId]]]:
    """Throws reachable from mut through at most max_depth call edges.

    BFS over the name+arity call graph; each site carries one shortest
    witness path starting at mut. Deterministic order: path length, then
    (file, line) of the site.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    unit, _, decl = ctx.resolve_method_id(mut)  # raises UnknownMethod
    adjacency: dict[MethodId, list[MethodId]] = {}
    for e in ctx.call_edges:
        if e.callee is not None:
            adjacency.setdefault(e.caller, []).append(e.callee)
    for k in adjacency:
        adjacency[k] = sorted(
            set(adjacency[k]), key=lambda m: (m.decl_file, m.decl_line, m.name)
        )
    results: list[tuple[ThrowSite, list[MethodId]]] = []
    seen_sites: set[ThrowSite] = set()
    visited = {mut}
    frontier: list[tuple[MethodId, list[MethodId]]] = [(mut, [mut])]
    depth = 0
    while frontier and depth <= max_depth:
        next_frontier: list[tuple[MethodId, list[MethodId]]] = []
        for mid, path in frontier:
            u2, _, m2 = ctx.resolve_method_id(mid)
            for site in throw_sites_of(u2, m2, ctx):
                if site not in seen_sites:
                    seen_sites.add(site)
                    results.append((site, path))
            for callee in adjacency.get(mid, []):
                if callee not in visited:
                    visited.add(callee)
                    next_frontier.append((callee, path + [callee]))
        frontier = next_frontier
        depth += 1
    results.sort(key=lambda r: (len(r[1]), r[0].method.decl_file, r[0].line))
    return results
