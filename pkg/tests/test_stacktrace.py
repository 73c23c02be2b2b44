from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURES
from exbt.errors import EmptyAfterExclusion, MalformedTrace, NoThrowAtFrame
from exbt.stacktrace import (
    Frame,
    StackTrace,
    endpoints,
    exclude_test_and_util_frames,
    parse_stack_trace,
    render_stack_trace,
)


def test_parse_canonical_frame():
    t = parse_stack_trace("at com.foo.Bar.check(Bar.java:12)")
    assert t.frames == (Frame("com.foo.Bar", "check", "Bar.java", 12),)


def test_parse_reverses_to_mut_first():
    text = "\n".join(
        [
            "at com.foo.Bar.check(Bar.java:12)",  # innermost: the throw
            "at com.foo.Bar.h(Bar.java:3)",
        ]
    )
    t = parse_stack_trace(text)
    assert [f.method for f in t.frames] == ["h", "check"]
    assert t.mut_frame.method == "h"
    assert t.throw_frame.method == "check"


def test_parse_drops_frames_without_line_numbers():
    text = (FIXTURES / "traces/unknown_source.txt").read_text()
    t = parse_stack_trace(text)
    assert [f.method for f in t.frames] == ["run", "check"]


def test_parse_drops_synthetic_frames():
    text = (FIXTURES / "traces/basic.txt").read_text()
    t = parse_stack_trace(text)
    assert [f.method for f in t.frames] == ["testWithdrawNegative", "withdraw"]


def test_parse_stops_at_caused_by():
    text = (FIXTURES / "traces/caused_by.txt").read_text()
    t = parse_stack_trace(text)
    assert {f.class_fqn for f in t.frames} == {"com.foo.Outer", "com.foo.Main"}


def test_parse_malformed_raises():
    with pytest.raises(MalformedTrace):
        parse_stack_trace("this is not a stack trace\nnor this")


# identifiers chosen so generated packages never collide with the
# synthetic-frame prefixes the parser intentionally drops
_IDENT = st.text(alphabet="abcdefgh", min_size=1, max_size=6).map(lambda s: "x" + s)
_CLASS = st.text(alphabet="ABCDEFGH", min_size=1, max_size=6)


@st.composite
def traces(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    frames = []
    for _ in range(n):
        pkg = draw(st.lists(_IDENT, min_size=1, max_size=3))
        cls = draw(_CLASS)
        frames.append(
            Frame(
                ".".join(pkg + [cls]),
                draw(_IDENT),
                f"{cls}.java",
                draw(st.integers(min_value=1, max_value=9999)),
            )
        )
    return StackTrace(tuple(frames))


@settings(max_examples=1000, deadline=None)
@given(traces())
def test_round_trip_parse_render(trace):
    assert parse_stack_trace(render_stack_trace(trace)) == trace


def test_exclusion_removes_dest_and_test_files(repo_a):
    trace = StackTrace(
        (
            Frame("com.fix.AccountTest", "testWithdrawNegative", "AccountTest.java", 31),
            Frame("com.fix.Account", "withdraw", "Account.java", 14),
        )
    )
    out = exclude_test_and_util_frames(trace, "src/test/java/com/fix/AccountTest.java", repo_a)
    assert [f.method for f in out.frames] == ["withdraw"]


def test_exclusion_removes_helper_in_other_test_file(repo_a):
    trace = StackTrace(
        (
            Frame("com.fix.CornerTest", "explode", "CornerTest.java", 24),
            Frame("com.fix.Account", "withdraw", "Account.java", 14),
        )
    )
    out = exclude_test_and_util_frames(trace, "src/test/java/com/fix/AccountTest.java", repo_a)
    assert [f.method for f in out.frames] == ["withdraw"]


def test_exclusion_empty_raises(repo_a):
    trace = StackTrace(
        (Frame("com.fix.CornerTest", "explode", "CornerTest.java", 24),)
    )
    with pytest.raises(EmptyAfterExclusion):
        exclude_test_and_util_frames(trace, "src/test/java/com/fix/CornerTest.java", repo_a)


@settings(max_examples=200, deadline=None)
@given(traces())
def test_exclusion_idempotent(trace):
    try:
        once = exclude_test_and_util_frames(trace, "SomeTest.java")
    except EmptyAfterExclusion:
        return
    twice = exclude_test_and_util_frames(once, "SomeTest.java")
    assert once == twice


def test_endpoints_resolve(repo_a):
    trace = StackTrace((Frame("com.fix.Account", "withdraw", "Account.java", 14),))
    mut, site = endpoints(trace, repo_a)
    assert mut.name == "withdraw"
    assert mut.name == trace.frames[0].method
    assert site.line == 14
    assert site.exception_type == "IllegalArgumentException"


def test_endpoints_two_frames(repo_a):
    trace = StackTrace(
        (
            Frame("com.fix.AccountTest", "open", "AccountTest.java", 10),
            Frame("com.fix.Account", "withdraw", "Account.java", 14),
        )
    )
    mut, site = endpoints(trace, repo_a)
    assert mut.name == "open"
    assert site.line == 14


def test_endpoints_no_throw_at_line(repo_a):
    trace = StackTrace((Frame("com.fix.Account", "withdraw", "Account.java", 13),))
    with pytest.raises(NoThrowAtFrame):
        endpoints(trace, repo_a)
