"""Run manifests: input digests, stage counters and artifact digests.

A manifest makes a run replayable: identical inputs, seed and backend give
byte-identical artifacts, and the manifest proves it by digesting both
sides. Stage counters record how often each pipeline stage executed.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import exbt


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def tree_digest(root: str | Path, pattern: str = "**/*") -> str:
    """Digest of a directory tree: sorted relative paths and contents."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(root.glob(pattern)):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(b"\0")
            h.update(p.read_bytes())
            h.update(b"\0")
    return h.hexdigest()


@dataclass
class Manifest:
    command: str
    seed: int | None = None
    template_id: str | None = None
    backend_kind: str | None = None
    versions: dict = field(default_factory=lambda: {"exbt": exbt.__version__})
    inputs: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    counters: Counter = field(default_factory=Counter)

    def add_input(self, label: str, path: str | Path) -> None:
        self.inputs[label] = {"path": str(path), "sha256": file_digest(path)}

    def add_input_tree(self, label: str, root: str | Path) -> None:
        self.inputs[label] = {"path": str(root), "sha256": tree_digest(root)}

    def add_artifact(self, path: str | Path, base: str | Path | None = None) -> None:
        key = str(Path(path).relative_to(base)) if base else str(path)
        self.artifacts[key] = file_digest(path)

    def bump(self, counter: str, by: int = 1) -> None:
        self.counters[counter] += by

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "template_id": self.template_id,
            "backend_kind": self.backend_kind,
            "versions": self.versions,
            "inputs": self.inputs,
            "artifacts": self.artifacts,
            "counters": dict(sorted(self.counters.items())),
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def verify_manifest(path: str | Path) -> list[str]:
    """Check that every artifact referenced by a manifest digest-matches.

    Returns a list of problems, empty when everything verifies."""
    manifest_path = Path(path)
    data = json.loads(manifest_path.read_text(encoding="utf-8"))
    problems = []
    base = manifest_path.parent
    for rel, digest in data.get("artifacts", {}).items():
        target = base / rel
        if not target.exists():
            problems.append(f"missing artifact {rel}")
        elif file_digest(target) != digest:
            problems.append(f"digest mismatch for {rel}")
    return problems
