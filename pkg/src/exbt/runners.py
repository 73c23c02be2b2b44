"""Build runners behind the functional metrics.

A runner answers check(candidate_source, bundle) -> FunctionalResult. Two
implementations ship:

  RecordedRunner  replays results recorded for fixture candidates, which
                  keeps the full pipeline hermetic and reproducible.
  JavacRunner     integration mode: copies the repository, injects the
                  candidate into the destination skeleton, compiles with
                  javac against generated JUnit API stubs, executes a
                  reflective harness and checks the coverage mark of the
                  target throw statement. Needs javac/java on PATH.
"""

from __future__ import annotations

import json
import logging
import shutil
import subprocess
import tempfile
from pathlib import Path

from exbt.errors import RunnerUnavailable
from exbt.genbackend import digest
from exbt.instrument import HELPER_FILE, HELPER_SOURCE
from exbt.jmodel import RepoContext, parse_unit
from exbt.metrics import FunctionalResult

logger = logging.getLogger(__name__)


class RecordedRunner:
    """Replay functional results from a fixture recording.

    Records are a JSON list of rows:
      {"target": "path:line", "candidate_contains": "...",
       "compilable": true, "runnable": true, "covers_target": true}
    A row may match by candidate digest instead of substring; rows without
    a matcher match any candidate for their target.
    """

    def __init__(self, rows: list[dict]):
        self.rows = rows

    @classmethod
    def from_file(cls, path) -> "RecordedRunner":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def check(self, candidate: str, bundle) -> FunctionalResult:
        target = bundle.throw_site.label()
        cand_digest = digest(candidate)
        for row in self.rows:
            if row.get("target") != target:
                continue
            if "candidate_digest" in row and row["candidate_digest"] != cand_digest:
                continue
            if "candidate_contains" in row and row["candidate_contains"] not in candidate:
                continue
            return FunctionalResult(
                row.get("compilable"), row.get("runnable"), row.get("covers_target")
            )
        return FunctionalResult()


JUNIT_STUBS: dict[str, str] = {
    "org/junit/Test.java": """\
package org.junit;

import java.lang.annotation.ElementType;
import java.lang.annotation.Retention;
import java.lang.annotation.RetentionPolicy;
import java.lang.annotation.Target;

@Retention(RetentionPolicy.RUNTIME)
@Target(ElementType.METHOD)
public @interface Test {
    Class<? extends Throwable> expected() default None.class;
    long timeout() default 0L;

    final class None extends Throwable {
        private None() { }
    }
}
""",
    "org/junit/Assert.java": """\
package org.junit;

public final class Assert {
    private Assert() { }

    public static void fail() { throw new AssertionError("fail()"); }

    public static void fail(String message) { throw new AssertionError(message); }

    public static void assertTrue(boolean condition) {
        if (!condition) { throw new AssertionError("expected true"); }
    }

    public static void assertFalse(boolean condition) {
        if (condition) { throw new AssertionError("expected false"); }
    }

    public static void assertEquals(Object expected, Object actual) {
        if (expected == null ? actual != null : !expected.equals(actual)) {
            throw new AssertionError("expected " + expected + " but was " + actual);
        }
    }

    public static void assertEquals(long expected, long actual) {
        if (expected != actual) {
            throw new AssertionError("expected " + expected + " but was " + actual);
        }
    }

    public static void assertNotNull(Object value) {
        if (value == null) { throw new AssertionError("expected non-null"); }
    }

    @SuppressWarnings("unchecked")
    public static <T extends Throwable> T assertThrows(
            Class<T> expected, ThrowingRunnable body) {
        try {
            body.run();
        } catch (Throwable t) {
            if (expected.isInstance(t)) { return (T) t; }
            throw new AssertionError("unexpected exception type: " + t.getClass());
        }
        throw new AssertionError("expected " + expected.getName() + " was not thrown");
    }

    public interface ThrowingRunnable {
        void run() throws Throwable;
    }
}
""",
}

HARNESS_SOURCE = """\
import java.lang.reflect.InvocationTargetException;
import java.lang.reflect.Method;

/** Invokes one test method, honoring @Test(expected=...). Exit 0 on pass. */
public final class ExbtHarness {
    public static void main(String[] args) throws Exception {
        Class<?> cls = Class.forName(args[0]);
        Method method = cls.getDeclaredMethod(args[1]);
        method.setAccessible(true);
        Class<? extends Throwable> expected = null;
        org.junit.Test ann = method.getAnnotation(org.junit.Test.class);
        if (ann != null && ann.expected() != org.junit.Test.None.class) {
            expected = ann.expected();
        }
        exbtruntime.ExbtTraceLog.CURRENT_TEST.set(args[0] + "#" + args[1]);
        Object receiver = cls.getDeclaredConstructor().newInstance();
        try {
            method.invoke(receiver);
            if (expected != null) {
                System.err.println("expected " + expected.getName() + " was not thrown");
                System.exit(1);
            }
        } catch (InvocationTargetException e) {
            Throwable cause = e.getCause();
            if (expected == null || !expected.isInstance(cause)) {
                System.err.println("unexpected exception: " + cause);
                System.exit(1);
            }
        }
        System.exit(0);
    }
}
"""


def jvm_available() -> bool:
    return shutil.which("javac") is not None and shutil.which("java") is not None


class JavacRunner:
    """Compile and execute a candidate against a copy of the repository."""

    def __init__(self, ctx: RepoContext, timeout: float = 60.0):
        if not jvm_available():
            raise RunnerUnavailable("javac/java not found on PATH")
        self.ctx = ctx
        self.timeout = timeout

    def check(self, candidate: str, bundle) -> FunctionalResult:
        with tempfile.TemporaryDirectory(prefix="exbt-run-") as tmp:
            work = Path(tmp)
            src = work / "src"
            try:
                names = self._prepare(work, src, candidate, bundle)
            except Exception as exc:
                logger.warning("runner workspace setup failed: %s", exc)
                return FunctionalResult()
            java_files = [str(p) for p in sorted(src.rglob("*.java"))]
            classes = work / "classes"
            classes.mkdir()
            compile_proc = subprocess.run(
                ["javac", "-d", str(classes)] + java_files,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
            if compile_proc.returncode != 0:
                logger.info("candidate does not compile:\n%s", compile_proc.stderr[-2000:])
                return FunctionalResult(compilable=False)
            log_file = work / "exbt-run.log"
            run_proc = subprocess.run(
                [
                    "java",
                    "-cp",
                    str(classes),
                    f"-Dexbt.log={log_file}",
                    "ExbtHarness",
                    names["test_class"],
                    names["test_method"],
                ],
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
            runnable = run_proc.returncode == 0
            covers = False
            if log_file.exists():
                covers = f"covered: {bundle.throw_site.label()}" in log_file.read_text()
            return FunctionalResult(True, runnable, runnable and covers)

    def _prepare(self, work: Path, src: Path, candidate: str, bundle) -> dict:
        # main sources, with a coverage mark wrapped around the target throw
        for rel in self.ctx.main_files:
            unit = self.ctx.unit_for(rel)
            if unit is None:
                continue
            text = unit.source
            if rel == bundle.throw_site.method.decl_file:
                text = _mark_throw(unit, bundle.throw_site)
            out = src / _strip_roots(rel)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text, encoding="utf-8")
        (src / "exbtruntime").mkdir(parents=True, exist_ok=True)
        (src / _strip_roots(HELPER_FILE)).write_text(HELPER_SOURCE, encoding="utf-8")
        for rel, source in JUNIT_STUBS.items():
            out = src / rel
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(source, encoding="utf-8")
        (src / "ExbtHarness.java").write_text(HARNESS_SOURCE, encoding="utf-8")
        # destination test file: skeleton plus the candidate
        dest_text = _inject_candidate(bundle.dest_skeleton, candidate)
        dest_out = src / _strip_roots(bundle.dest_path)
        dest_out.parent.mkdir(parents=True, exist_ok=True)
        dest_out.write_text(dest_text, encoding="utf-8")
        dest_unit = parse_unit(dest_text, bundle.dest_path)
        test_class = next(t.fqn for t in dest_unit.all_types())
        cand_unit = parse_unit("class __C {\n" + candidate + "\n}", "<cand>")
        test_method = next(
            m.name for t in cand_unit.all_types() for m in t.methods
        )
        return {"test_class": test_class, "test_method": test_method}


def _strip_roots(rel: str) -> str:
    for prefix in ("src/main/java/", "src/test/java/", "src/main/", "src/test/"):
        if rel.startswith(prefix):
            return rel[len(prefix):]
    return rel


def _mark_throw(unit, site) -> str:
    """Wrap the target throw statement in '{ mark(...); throw ...; }'."""
    lines = unit.source.split("\n")
    # locate the throw token at the site line
    throw_tok = None
    for t in unit.tokens:
        if t.text == "throw" and t.line == site.line:
            throw_tok = t
            break
    if throw_tok is None:
        return unit.source
    line0 = site.line - 1
    text = lines[line0]
    col = 0
    # column of the throw keyword on its line
    upto = unit.source[: throw_tok.offset]
    col = len(upto) - (upto.rfind("\n") + 1)
    mark = (
        "{ exbtruntime.ExbtTraceLog.mark(\""
        + f"covered: {site.label()}"
        + "\"); "
    )
    lines[line0] = text[:col] + mark + text[col:]
    # close the wrapper after the statement's terminating semicolon
    k = line0
    while k < len(lines):
        if ";" in lines[k][col if k == line0 else 0 :]:
            lines[k] = lines[k] + " }"
            break
        k += 1
    return "\n".join(lines)


def _inject_candidate(skeleton: str, candidate: str) -> str:
    """Insert the candidate method before the last closing brace."""
    idx = skeleton.rfind("}")
    if idx < 0:
        return skeleton + "\n" + candidate + "\n"
    indented = "\n".join(
        ("    " + l if l.strip() else l) for l in candidate.split("\n")
    )
    return skeleton[:idx] + "\n" + indented + "\n" + skeleton[idx:]
