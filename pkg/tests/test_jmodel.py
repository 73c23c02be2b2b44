from __future__ import annotations

import pytest

from conftest import REPO_A
from exbt.errors import NoJavaSources, IoError, UnknownMethod
from exbt.jmodel import find_throw_sites, load_repo, parse_unit, reachable_throws


def test_load_repo_counts_units(repo_a):
    assert len(repo_a.units) == 7
    assert repo_a.warnings == []
    assert set(repo_a.main_files) == {
        "src/main/java/com/fix/Account.java",
        "src/main/java/com/fix/Corner.java",
        "src/main/java/com/fix/Ledger.java",
        "src/main/java/com/fix/Orphan.java",
    }
    assert not set(repo_a.main_files) & set(repo_a.test_files)


def test_load_repo_broken_file_is_warning(tmp_path):
    src = tmp_path / "src/main/java"
    src.mkdir(parents=True)
    (src / "Good.java").write_text("class Good { void ok() { } }")
    (src / "Bad.java").write_text('class Bad { String s = "unterminated; }')
    ctx = load_repo(tmp_path)
    assert len(ctx.warnings) == 1
    assert "Bad.java" in ctx.warnings[0]
    assert [u.path for u in ctx.units] == ["src/main/java/Good.java"]


def test_load_repo_empty_dir_raises(tmp_path):
    with pytest.raises(NoJavaSources):
        load_repo(tmp_path)


def test_load_repo_missing_root_raises(tmp_path):
    with pytest.raises(IoError):
        load_repo(tmp_path / "nope")


def test_load_repo_purity():
    a = load_repo(REPO_A)
    b = load_repo(REPO_A)
    assert [u.path for u in a.units] == [u.path for u in b.units]
    assert a.call_edges == b.call_edges
    assert find_throw_sites(a, "all") == find_throw_sites(b, "all")


def test_source_roots_override(tmp_path):
    (tmp_path / "code").mkdir()
    (tmp_path / "checks").mkdir()
    (tmp_path / "code/A.java").write_text("class A { }")
    (tmp_path / "checks/B.java").write_text("class B { }")
    ctx = load_repo(tmp_path, test_roots=["checks"])
    assert ctx.main_files == ["code/A.java"]
    assert ctx.test_files == ["checks/B.java"]


def test_two_throws_one_method_share_method_id():
    unit = parse_unit(
        """class C {
    void f(int x) {
        if (x == 1) { throw new A(); }
        if (x == 2) { throw new B(); }
    }
}""",
        "C.java",
    )
    from exbt.jmodel import RepoContext
    from pathlib import Path

    ctx = RepoContext(Path("."), [unit], ["C.java"], [], [])
    sites = find_throw_sites(ctx, "all")
    assert len(sites) == 2
    assert sites[0].method == sites[1].method
    assert [s.exception_type for s in sites] == ["A", "B"]


def test_throw_in_lambda_attributed_to_enclosing_method():
    unit = parse_unit(
        """class C {
    void f(java.util.List<Integer> xs) {
        xs.forEach(x -> {
            if (x > 0) { throw new IllegalStateException(); }
        });
    }
}""",
        "C.java",
    )
    from exbt.jmodel import RepoContext
    from pathlib import Path

    ctx = RepoContext(Path("."), [unit], ["C.java"], [], [])
    sites = find_throw_sites(ctx, "all")
    assert len(sites) == 1
    assert sites[0].method.name == "f"


def test_no_throws_empty_list(tmp_path):
    (tmp_path / "Quiet.java").write_text("class Quiet { int id(int x) { return x; } }")
    ctx = load_repo(tmp_path)
    assert find_throw_sites(ctx, "all") == []


def test_find_throw_sites_ordering_and_scope(repo_a):
    main_sites = find_throw_sites(repo_a, "main")
    all_sites = find_throw_sites(repo_a, "all")
    keys = [(s.method.decl_file, s.line) for s in main_sites]
    assert keys == sorted(keys)
    assert set(main_sites) <= set(all_sites)
    # the test-file helper throw only appears in 'all'
    extra = set(all_sites) - set(main_sites)
    assert {s.method.name for s in extra} == {"explode"}


def test_statement_text_starts_with_throw(repo_a):
    for site in find_throw_sites(repo_a, "all"):
        assert site.statement_text.strip().startswith("throw")
        u, _, m = repo_a.resolve_method_id(site.method)
        assert m.start_line <= site.line <= m.end_line


def test_reachable_direct_call_chain(tmp_path):
    (tmp_path / "H.java").write_text(
        """class H {
    void h(int a) { check(a + 1); }
    void check(int v) { if (v == 0) { throw new E(); } }
}"""
    )
    ctx = load_repo(tmp_path)
    mut = next(m for m in ctx.all_method_ids() if m.name == "h")
    results = reachable_throws(ctx, mut)
    assert len(results) == 1
    site, path = results[0]
    assert site.exception_type == "E"
    assert [p.name for p in path] == ["h", "check"]


def test_reachable_own_body_is_path_of_one(repo_a):
    mut = next(m for m in repo_a.all_method_ids() if m.name == "withdraw")
    results = reachable_throws(repo_a, mut, max_depth=1)
    assert any(len(path) == 1 and path[0] == mut for _, path in results)


def test_reachable_recursive_pair_terminates(tmp_path):
    (tmp_path / "R.java").write_text(
        """class R {
    void ping(int n) { pong(n - 1); }
    void pong(int n) { ping(n - 1); }
}"""
    )
    ctx = load_repo(tmp_path)
    mut = next(m for m in ctx.all_method_ids() if m.name == "ping")
    assert reachable_throws(ctx, mut, max_depth=5) == []


def test_reachable_unknown_method(repo_a):
    from exbt.jmodel import MethodId

    ghost = MethodId("com.fix.Ghost", "spook", 0, "Ghost.java", 1)
    with pytest.raises(UnknownMethod):
        reachable_throws(repo_a, ghost)


def test_reachable_monotone_in_depth(tmp_path):
    (tmp_path / "Chain.java").write_text(
        """class Chain {
    void a() { b(); }
    void b() { c(); }
    void c() { d(); }
    void d() { throw new Deep(); }
    void b2() { if (true) { throw new Shallow(); } }
}"""
    )
    ctx = load_repo(tmp_path)
    mut = next(m for m in ctx.all_method_ids() if m.name == "a")
    previous: set = set()
    for depth in range(1, 6):
        now = {site for site, _ in reachable_throws(ctx, mut, depth)}
        assert previous <= now
        previous = now
    assert {s.exception_type for s in previous} == {"Deep"}


def test_call_edges_resolve_or_flag_external(repo_a):
    for e in repo_a.call_edges:
        if e.callee is None:
            assert e.external
        else:
            repo_a.resolve_method_id(e.callee)  # must not raise


def test_equal_arity_overloads_edge_to_all_candidates(tmp_path):
    (tmp_path / "O.java").write_text(
        """class O {
    void go(java.util.List<String> v) { handle(v); }
    void handle(String s) { }
    void handle(java.util.List<String> v) { }
}"""
    )
    ctx = load_repo(tmp_path)
    targets = {
        e.callee.decl_line
        for e in ctx.call_edges
        if e.caller.name == "go" and e.callee is not None and e.callee_name == "handle"
    }
    assert len(targets) == 2


def test_initializer_block_pseudo_method(tmp_path):
    (tmp_path / "I.java").write_text(
        """class I {
    static int K;
    static {
        if (K < 0) { throw new ExceptionInInitializerError(); }
        K = 1;
    }
}"""
    )
    ctx = load_repo(tmp_path)
    sites = find_throw_sites(ctx, "all")
    assert len(sites) == 1
    assert sites[0].method.name == "<clinit>"
