from __future__ import annotations

import json
from pathlib import Path

import pytest

from exbt.classifier import split_test_suite
from exbt.jmodel import find_throw_sites, load_repo
from exbt.stacktrace import Frame, StackTrace

FIXTURES = Path(__file__).parent / "fixtures"
REPO_A = FIXTURES / "repoA"
REPO_G = FIXTURES / "repoG"


@pytest.fixture(scope="session")
def repo_a():
    return load_repo(REPO_A)


@pytest.fixture(scope="session")
def repo_g():
    return load_repo(REPO_G)


@pytest.fixture(scope="session")
def repo_a_suite(repo_a):
    return split_test_suite(repo_a)


@pytest.fixture(scope="session")
def guards_oracle():
    with open(REPO_G / "guards-oracle.json") as f:
        return json.load(f)


def sites_by_method(ctx, scope="main"):
    out: dict[str, list] = {}
    for s in find_throw_sites(ctx, scope):
        out.setdefault(s.method.name, []).append(s)
    return out


def guard_trace(ctx, oracle_entry) -> StackTrace:
    """Build the MUT-first trace a fixture describes.

    Frame lines are derived from the parsed model (throw line for the
    innermost frame, the call line for each caller) so the committed
    oracle stays stable under reformatting.
    """
    frames_spec = oracle_entry["frames"]
    site_method = oracle_entry["site_method"]
    site = next(
        s
        for s in find_throw_sites(ctx, "main")
        if s.method.name == site_method
        and s.exception_type == oracle_entry["site_exception"]
    )
    file_name = Path(site.method.decl_file).name
    frames = []
    for caller, callee in zip(frames_spec, frames_spec[1:]):
        line = next(
            e.line
            for e in ctx.call_edges
            if e.caller.name == caller and e.callee is not None and e.callee.name == callee
        )
        fqn = next(m.fqn for m in ctx.all_method_ids() if m.name == caller)
        frames.append(Frame(fqn, caller, file_name, line))
    frames.append(Frame(site.method.fqn, site_method, file_name, site.line))
    return StackTrace(tuple(frames)), site


def parse_env_key(key: str) -> dict[str, int]:
    env = {}
    for part in key.split(","):
        name, value = part.split("=")
        env[name] = int(value)
    return env
