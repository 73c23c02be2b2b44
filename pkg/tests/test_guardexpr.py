from __future__ import annotations

import pytest

from conftest import guard_trace, parse_env_key
from exbt.errors import FrameOutOfSpan, UnboundName
from exbt.guardexpr import (
    collect_nodes,
    compute_guard_expression,
    evaluate_guard,
    merge,
)
from exbt.stacktrace import Frame, StackTrace


# --- node collection (trace walk) ---


def test_collect_starts_with_innermost_statement(repo_g, guards_oracle):
    trace, _ = guard_trace(repo_g, guards_oracle["ifPositive"])
    nodes = collect_nodes(trace, repo_g)
    assert nodes[0].tag == "StartStatement"
    assert nodes[0].text.startswith("throw")
    tags = [n.tag for n in nodes]
    assert tags == ["StartStatement", "Condition"]
    assert nodes[1].text == "x > 0"


def test_collect_else_branch_negates(repo_g, guards_oracle):
    trace, _ = guard_trace(repo_g, guards_oracle["elseOnly"])
    nodes = collect_nodes(trace, repo_g)
    assert [n.tag for n in nodes] == ["StartStatement", "NegatedCondition"]
    assert nodes[1].text == "x > 0"


def test_collect_two_frames_orders_decl_call_pair(repo_g, guards_oracle):
    trace, _ = guard_trace(repo_g, guards_oracle["caller"])
    nodes = collect_nodes(trace, repo_g)
    tags = [n.tag for n in nodes]
    # callee's nodes first, then the decl/call pair, then the caller's nodes
    assert tags == [
        "StartStatement",
        "Condition",
        "MethodDecl",
        "MethodCall",
        "StartStatement",
    ]
    decl = nodes[tags.index("MethodDecl")]
    call = nodes[tags.index("MethodCall")]
    assert decl.params == ("v",)
    assert len(call.args) == 1
    assert call.text == "callee(a + 1)"


def test_decl_call_pairs_always_adjacent(repo_g, guards_oracle):
    for entry in guards_oracle.values():
        trace, _ = guard_trace(repo_g, entry)
        nodes = collect_nodes(trace, repo_g)
        for i, n in enumerate(nodes):
            if n.tag == "MethodDecl":
                assert nodes[i + 1].tag == "MethodCall"


def test_collect_frame_out_of_span(repo_g):
    trace = StackTrace((Frame("gx.Guards", "ifPositive", "Guards.java", 9999),))
    with pytest.raises(FrameOutOfSpan):
        collect_nodes(trace, repo_g)


# --- merge ---


def test_merge_single_substitution():
    assert merge(["v == 0"], {"v": "a + 1"}) == ["(a + 1) == 0"]


def test_merge_empty_map_identity():
    assert merge(["x > 0"], {}) == ["x > 0"]


def test_merge_identifier_boundary():
    assert merge(["val > value"], {"val": "k"}) == ["k > value"]


def test_merge_untouched_conditions_pass_through():
    out = merge(["x > 0", "y < 2"], {"z": "9"})
    assert out == ["x > 0", "y < 2"]


def test_merge_substitutes_inside_call_arguments():
    assert merge(["check(v) > 0"], {"v": "a + 1"}) == ["check((a + 1)) > 0"]


# --- guard computation against the committed oracle ---


def oracle_items(guards_oracle):
    return sorted(guards_oracle.items())


def test_oracle_suite_renders_match(repo_g, guards_oracle):
    assert len(guards_oracle) >= 10
    for name, entry in oracle_items(guards_oracle):
        trace, _ = guard_trace(repo_g, entry)
        guard = compute_guard_expression(trace, repo_g)
        got = " ".join(guard.rendered.split())
        want = " ".join(entry["rendered"].split())
        assert got == want, f"{name}: {guard.rendered!r} != {entry['rendered']!r}"


def test_oracle_suite_evaluation_tables(repo_g, guards_oracle):
    evaluable = 0
    for name, entry in oracle_items(guards_oracle):
        if not entry["evaluable"]:
            continue
        evaluable += 1
        trace, _ = guard_trace(repo_g, entry)
        guard = compute_guard_expression(trace, repo_g)
        assert len(entry["table"]) <= 100
        for key, reachable in entry["table"].items():
            env = parse_env_key(key)
            assert evaluate_guard(guard, env) == reachable, (name, key)
    assert evaluable >= 10


def test_guard_determinism(repo_g, guards_oracle):
    for _, entry in oracle_items(guards_oracle):
        trace, _ = guard_trace(repo_g, entry)
        a = compute_guard_expression(trace, repo_g)
        b = compute_guard_expression(trace, repo_g)
        assert a.rendered == b.rendered
        assert a.conditions == b.conditions


def test_loop_local_is_flagged_unresolved(repo_g, guards_oracle):
    trace, _ = guard_trace(repo_g, guards_oracle["forLoop"])
    guard = compute_guard_expression(trace, repo_g)
    assert guard.unresolved_names == ("i",)


def test_params_and_fields_are_not_unresolved(repo_g, guards_oracle):
    for name in ("ifPositive", "whileLoop", "nested"):
        trace, _ = guard_trace(repo_g, guards_oracle[name])
        guard = compute_guard_expression(trace, repo_g)
        assert guard.unresolved_names == (), name


def test_double_negation_never_rendered(repo_g, guards_oracle):
    trace, _ = guard_trace(repo_g, guards_oracle["negated"])
    guard = compute_guard_expression(trace, repo_g)
    assert guard.rendered == "x == 2"
    assert "!!" not in guard.rendered


def test_original_texts_recorded(repo_g, guards_oracle):
    trace, _ = guard_trace(repo_g, guards_oracle["assignBeforeThrow"])
    guard = compute_guard_expression(trace, repo_g)
    assert guard.source_texts == ("t > 10",)
    assert guard.conditions == ("(a * 2) > 10",)


def test_empty_guard_is_vacuously_true(tmp_path):
    (tmp_path / "Always.java").write_text(
        """class Always {
    void die() {
        throw new IllegalStateException("always");
    }
}"""
    )
    from exbt.jmodel import load_repo, find_throw_sites

    ctx = load_repo(tmp_path)
    site = find_throw_sites(ctx, "all")[0]
    trace = StackTrace((Frame("Always", "die", "Always.java", site.line),))
    guard = compute_guard_expression(trace, ctx)
    assert guard.rendered == ""
    assert evaluate_guard(guard, {}) is True


def test_evaluate_guard_unbound(repo_g, guards_oracle):
    trace, _ = guard_trace(repo_g, guards_oracle["ifPositive"])
    guard = compute_guard_expression(trace, repo_g)
    with pytest.raises(UnboundName):
        evaluate_guard(guard, {})
