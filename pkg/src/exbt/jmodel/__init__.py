"""Java source model: parsing, throw sites and call-graph reachability."""

from exbt.jmodel.model import (
    CallEdge,
    CompilationUnit,
    MethodDecl,
    MethodId,
    RepoContext,
    ThrowSite,
    TypeDecl,
    find_throw_sites,
    load_repo,
    parse_unit,
    reachable_throws,
    throw_sites_of,
)

__all__ = [
    "CallEdge",
    "CompilationUnit",
    "MethodDecl",
    "MethodId",
    "RepoContext",
    "ThrowSite",
    "TypeDecl",
    "find_throw_sites",
    "load_repo",
    "parse_unit",
    "reachable_throws",
    "throw_sites_of",
]
