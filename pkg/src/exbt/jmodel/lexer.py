"""Tolerant Java tokenizer.

Comments are skipped, string/char/text-block literals are kept as single
tokens, and every token records its 1-based line so downstream lookups can
map stack-trace lines back onto source constructs.
"""

from __future__ import annotations

from dataclasses import dataclass

from exbt.errors import JavaParseError

KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while var record yield
    sealed permits non-sealed""".split()
)

# longest-first so that e.g. ">>>=" wins over ">>"
OPERATORS = sorted(
    [
        ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "==", "!=", "<=", ">=",
        "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
        "<<", ">>", "+", "-", "*", "/", "%", "=", "<", ">", "!", "~", "&", "|",
        "^", "?", ":", "@",
    ],
    key=len,
    reverse=True,
)

PUNCT = frozenset("(){}[];,.")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | keyword | number | string | char | op | punct
    text: str
    line: int
    offset: int  # absolute character offset into the source

    @property
    def end(self) -> int:
        return self.offset + len(self.text)


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c in "_$"


def _is_ident_part(c: str) -> bool:
    return c.isalnum() or c in "_$"


def tokenize(source: str) -> list[Token]:
    """Tokenize Java source. Raises JavaParseError on unterminated literals."""
    tokens: list[Token] = []
    i = 0
    line = 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c.isspace():
            i += 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            i = n if j < 0 else j
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            if j < 0:
                raise JavaParseError(f"unterminated comment at line {line}")
            line += source.count("\n", i, j)
            i = j + 2
            continue
        if source.startswith('"""', i):
            j = source.find('"""', i + 3)
            if j < 0:
                raise JavaParseError(f"unterminated text block at line {line}")
            text = source[i : j + 3]
            tokens.append(Token("string", text, line, i))
            line += text.count("\n")
            i = j + 3
            continue
        if c == '"' or c == "'":
            quote = c
            j = i + 1
            while j < n:
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == quote:
                    break
                if source[j] == "\n":
                    raise JavaParseError(f"unterminated literal at line {line}")
                j += 1
            if j >= n:
                raise JavaParseError(f"unterminated literal at line {line}")
            kind = "string" if quote == '"' else "char"
            tokens.append(Token(kind, source[i : j + 1], line, i))
            i = j + 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            if source.startswith(("0x", "0X", "0b", "0B"), i):
                j = i + 2
                while j < n and (source[j].isalnum() or source[j] == "_"):
                    j += 1
            else:
                while j < n and (source[j].isalnum() or source[j] in "._"):
                    # stop before '.' that starts a method call on a literal
                    if source[j] == "." and not (j + 1 < n and source[j + 1].isdigit()):
                        break
                    # exponent sign
                    if source[j] in "eE" and j + 1 < n and source[j + 1] in "+-":
                        j += 2
                        continue
                    j += 1
            tokens.append(Token("number", source[i:j], line, i))
            i = j
            continue
        if _is_ident_start(c):
            j = i + 1
            while j < n and _is_ident_part(source[j]):
                j += 1
            text = source[i:j]
            kind = "keyword" if text in KEYWORDS else "ident"
            tokens.append(Token(kind, text, line, i))
            i = j
            continue
        if c == "." and source.startswith("...", i):
            tokens.append(Token("op", "...", line, i))
            i += 3
            continue
        if c in PUNCT:
            tokens.append(Token("punct", c, line, i))
            i += 1
            continue
        for op in OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token("op", op, line, i))
                i += len(op)
                break
        else:
            raise JavaParseError(f"unexpected character {c!r} at line {line}")
    return tokens


def match_brace(tokens: list[Token], open_index: int) -> int:
    """Index of the '}' matching the '{' at open_index. Raises if unbalanced."""
    assert tokens[open_index].text == "{"
    depth = 0
    for k in range(open_index, len(tokens)):
        t = tokens[k].text
        if t == "{":
            depth += 1
        elif t == "}":
            depth -= 1
            if depth == 0:
                return k
    raise JavaParseError(
        f"unbalanced braces from line {tokens[open_index].line}"
    )


def match_paren(tokens: list[Token], open_index: int) -> int:
    """Index of the ')' matching the '(' at open_index. Raises if unbalanced."""
    assert tokens[open_index].text == "("
    depth = 0
    for k in range(open_index, len(tokens)):
        t = tokens[k].text
        if t == "(":
            depth += 1
        elif t == ")":
            depth -= 1
            if depth == 0:
                return k
    raise JavaParseError(
        f"unbalanced parentheses from line {tokens[open_index].line}"
    )
