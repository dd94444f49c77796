"""Deterministic JSON/CSV artifact store with a hash manifest.

Payloads carry no timestamps and serialize with sorted keys and compact
separators, so identical runs reproduce identical bytes.  The manifest maps
every stored file to its sha256 and excludes itself.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Dict, Iterable, Sequence, Union

from .errors import MissingArtifact

MANIFEST_NAME = "manifest.json"

Cell = Union[str, int, float]


def canonical_json(payload: object) -> str:
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    )


def _format_cell(cell: Cell) -> str:
    if isinstance(cell, bool):
        return "true" if cell else "false"
    if isinstance(cell, float):
        return repr(cell)
    return str(cell)


class ArtifactStore:
    """Append-only view of one output directory."""

    def __init__(self, root: Union[str, Path]) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _hash_bytes(self, data: bytes) -> str:
        return hashlib.sha256(data).hexdigest()

    def _write_bytes(self, relpath: str, data: bytes) -> str:
        path = self.root / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        return self._hash_bytes(data)

    def write_json(self, relpath: str, payload: object) -> str:
        return self._write_bytes(relpath, (canonical_json(payload) + "\n").encode("utf-8"))

    def write_csv(self, relpath: str, header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> str:
        lines = [",".join(header)]
        lines.extend(",".join(_format_cell(c) for c in row) for row in rows)
        return self._write_bytes(relpath, ("\n".join(lines) + "\n").encode("utf-8"))

    def read_json(self, relpath: str) -> object:
        path = self.root / relpath
        if not path.exists():
            raise MissingArtifact(f"artifact {relpath} not found under {self.root}")
        return json.loads(path.read_text(encoding="utf-8"))

    def exists(self, relpath: str) -> bool:
        return (self.root / relpath).exists()

    def update_manifest(self) -> Dict[str, str]:
        """Rehash every stored file and rewrite the manifest."""
        entries: Dict[str, str] = {}
        for path in sorted(self.root.rglob("*")):
            if not path.is_file():
                continue
            rel = path.relative_to(self.root).as_posix()
            if rel == MANIFEST_NAME:
                continue
            entries[rel] = self._hash_bytes(path.read_bytes())
        self._write_bytes(MANIFEST_NAME, (canonical_json({"files": entries}) + "\n").encode("utf-8"))
        return entries
