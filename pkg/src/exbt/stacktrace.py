"""JVM stack-trace parsing and frame exclusion.

Traces are stored MUT-first: frames[0] is the method under test and the
last frame holds the target throw statement. The JVM prints the opposite
(innermost first), so the parser reverses and the renderer reverses back.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

from exbt.errors import (
    EmptyAfterExclusion,
    MalformedTrace,
    NoThrowAtFrame,
)
from exbt.jmodel import RepoContext, MethodId, ThrowSite, throw_sites_of

logger = logging.getLogger(__name__)

# canonical frame: at com.foo.Bar.check(Bar.java:12)
FRAME_RE = re.compile(
    r"^\s*at\s+([\w.$]+)\.([\w$]+|<init>|<clinit>)\(([^():]+\.java):(\d+)\)\s*$"
)
# frames the JVM emits around user code but never useful for AST lookup
NO_LINE_RE = re.compile(
    r"^\s*at\s+([\w.$]+)\.([\w$<>]+)\((?:Unknown Source|Native Method)\)\s*$"
)

SYNTHETIC_PREFIXES = (
    "java.",
    "javax.",
    "jdk.",
    "sun.",
    "com.sun.",
    "org.junit.",
    "junit.",
    "org.testng.",
    "org.gradle.",
    "org.apache.maven.",
    "org.mockito.",
    "worker.org.gradle.",
)


@dataclass(frozen=True)
class Frame:
    class_fqn: str
    method: str
    file: str  # file name only, e.g. Bar.java, or <unknown>
    line: int

    def render(self) -> str:
        return f"at {self.class_fqn}.{self.method}({self.file}:{self.line})"


@dataclass(frozen=True)
class StackTrace:
    frames: tuple[Frame, ...]  # MUT-first; last frame holds the throw

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def mut_frame(self) -> Frame:
        return self.frames[0]

    @property
    def throw_frame(self) -> Frame:
        return self.frames[-1]

    def with_last_line(self, line: int) -> "StackTrace":
        """Same trace with the throw frame retargeted to another line."""
        last = self.frames[-1]
        retargeted = Frame(last.class_fqn, last.method, last.file, line)
        return StackTrace(self.frames[:-1] + (retargeted,))


def _is_synthetic(class_fqn: str) -> bool:
    return class_fqn.startswith(SYNTHETIC_PREFIXES)


def parse_stack_trace(text: str) -> StackTrace:
    """Parse raw JVM trace text into a MUT-first StackTrace.

    Only the first cause segment is read; synthetic frames (reflection,
    runners) and frames without a usable line number are dropped.
    """
    jvm_order: list[Frame] = []
    saw_frame_line = False
    for raw in text.splitlines():
        if raw.strip().startswith("Caused by:"):
            break
        m = FRAME_RE.match(raw)
        if m:
            saw_frame_line = True
            fqn, method, file_name, line = m.groups()
            if _is_synthetic(fqn):
                continue
            jvm_order.append(Frame(fqn, method, file_name, int(line)))
            continue
        if NO_LINE_RE.match(raw):
            saw_frame_line = True
            logger.warning("dropping frame without line number: %s", raw.strip())
            continue
    if not saw_frame_line:
        raise MalformedTrace("no line matches the canonical frame syntax")
    if not jvm_order:
        raise MalformedTrace("all frames were synthetic or lacked line numbers")
    return StackTrace(tuple(reversed(jvm_order)))


def render_stack_trace(trace: StackTrace) -> str:
    """Inverse of parse_stack_trace: JVM order, one frame per line."""
    return "\n".join(f.render() for f in reversed(trace.frames))


def exclude_test_and_util_frames(
    trace: StackTrace, dest: str, ctx: RepoContext | None = None
) -> StackTrace:
    """Drop frames declared in the destination test file or any test file.

    Without a repository context the match falls back to file names: the
    destination file itself and nothing else.
    """
    dest_name = Path(dest).name
    test_names: set[str] = set()
    test_classes: set[str] = set()
    if ctx is not None:
        test_paths = set(ctx.test_files)
        test_names = {Path(p).name for p in test_paths}
        for u in ctx.units:
            if u.path in test_paths:
                test_classes.update(t.fqn for t in u.all_types())

    def keep(f: Frame) -> bool:
        if f.file == dest_name:
            return False
        if f.file in test_names:
            return False
        if f.class_fqn in test_classes:
            return False
        return True

    kept = tuple(f for f in trace.frames if keep(f))
    if not kept:
        raise EmptyAfterExclusion(
            f"no frames left after excluding test/util methods against {dest_name}"
        )
    return StackTrace(kept)


def endpoints(trace: StackTrace, ctx: RepoContext) -> tuple[MethodId, ThrowSite]:
    """(method under test, target throw site) for a normalized trace."""
    first = trace.frames[0]
    unit, _, decl = ctx.resolve_frame(first.class_fqn, first.method, first.line)
    mut = ctx.method_id(unit, decl)
    last = trace.frames[-1]
    unit2, _, decl2 = ctx.resolve_frame(last.class_fqn, last.method, last.line)
    for site in throw_sites_of(unit2, decl2, ctx):
        if site.line == last.line:
            return mut, site
    raise NoThrowAtFrame(
        f"{last.file}:{last.line} holds no throw statement in {decl2.name}"
    )
