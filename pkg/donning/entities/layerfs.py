"""
donning – Filesystem Entities
================================
Immutable value objects for the in-memory filesystem algebra:

* ``FileNode``  – a regular file (bytes + executable bit) or a symlink
  whose target is stored as data and never traversed.
* ``Change``    – ``Put(FileNode)`` or ``Delete``.
* ``Directory`` – partial map from canonical path to ``FileNode``.
* ``Layer``     – partial map from canonical path to ``Change``.

``Directory`` and ``Layer`` are read-only ``Mapping`` objects that
validate their keys on construction.  Neither may hold a path together
with a path beneath it (the "/a" vs "/a/b" prefix collision).
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from donning.exceptions import InvalidFileNode, PrefixCollision
from donning.utils import paths

PathName = str


# ── File nodes ───────────────────────────────────────────────────

class FileKind(str, Enum):
    REGULAR = "regular"
    SYMLINK = "symlink"


@dataclass(frozen=True)
class FileNode:
    """A file as stored in a layer.

    Equality is structural: kind, content bytes, executable flag and
    symlink target.  Use the ``regular`` and ``symlink`` constructors.
    """

    kind: FileKind
    content: bytes = b""
    executable: bool = False
    target: str = ""

    def __post_init__(self) -> None:
        if self.kind is FileKind.SYMLINK:
            if not self.target:
                raise InvalidFileNode("symlink target must be a non-empty string")
            if self.content or self.executable:
                raise InvalidFileNode("symlinks carry neither content nor an executable bit")
        elif self.target:
            raise InvalidFileNode("regular files have no symlink target")

    @classmethod
    def regular(cls, content: Union[bytes, str], executable: bool = False) -> "FileNode":
        if isinstance(content, str):
            content = content.encode("utf-8")
        return cls(kind=FileKind.REGULAR, content=bytes(content), executable=executable)

    @classmethod
    def symlink(cls, target: str) -> "FileNode":
        return cls(kind=FileKind.SYMLINK, target=target)

    @property
    def is_symlink(self) -> bool:
        return self.kind is FileKind.SYMLINK

    @property
    def size(self) -> int:
        """Payload bytes carried by this node."""
        return len(self.content) if self.kind is FileKind.REGULAR else len(self.target.encode("utf-8"))

    def __repr__(self) -> str:
        if self.is_symlink:
            return f"<FileNode symlink -> {self.target!r}>"
        flag = " +x" if self.executable else ""
        return f"<FileNode regular {len(self.content)}B{flag}>"


# ── Changes ──────────────────────────────────────────────────────

class ChangeKind(str, Enum):
    PUT = "put"
    DELETE = "delete"


@dataclass(frozen=True)
class Change:
    """A per-path entry of a layer; ``Delete`` carries no payload."""

    kind: ChangeKind
    node: Optional[FileNode] = None

    def __post_init__(self) -> None:
        if (self.kind is ChangeKind.PUT) != (self.node is not None):
            raise InvalidFileNode("Put carries exactly one FileNode, Delete carries none")

    @classmethod
    def put(cls, node: FileNode) -> "Change":
        return cls(ChangeKind.PUT, node)

    @classmethod
    def delete(cls) -> "Change":
        return DELETE

    @property
    def is_delete(self) -> bool:
        return self.kind is ChangeKind.DELETE

    def __repr__(self) -> str:
        return "Delete" if self.is_delete else f"Put({self.node!r})"


DELETE = Change(ChangeKind.DELETE)


# ── Path maps ────────────────────────────────────────────────────

def _check_keys(keys: Iterable[str]) -> None:
    """Validate canonical form and the prefix-collision rule."""
    key_set = set(keys)
    for key in key_set:
        if not paths.is_canonical(key):
            raise InvalidFileNode(f"not a canonical path name: {key!r}")
        for parent in paths.ancestors(key):
            if parent in key_set:
                raise PrefixCollision(f"{parent!r} is a file but {key!r} lies beneath it")


class _PathMap(Mapping):
    """Read-only mapping keyed by canonical path names."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Union[Mapping, Iterable, None] = None) -> None:
        self._entries: dict = dict(entries or {})

    def __getitem__(self, path: str):
        return self._entries[path]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def sorted_items(self) -> list:
        """Items ordered by UTF-8 path bytes."""
        return sorted(self._entries.items(), key=lambda kv: kv[0].encode("utf-8"))

    def __hash__(self) -> int:
        return hash(frozenset(self._entries.items()))


class Directory(_PathMap):
    """A directory: partial map ``PathName -> FileNode``."""

    __slots__ = ()

    def __init__(self, entries: Union[Mapping, Iterable, None] = None) -> None:
        super().__init__(entries)
        for path, node in self._entries.items():
            if not isinstance(node, FileNode):
                raise InvalidFileNode(f"{path!r} maps to {type(node).__name__}, not FileNode")
        _check_keys(self._entries)

    def lookup(self, path: str) -> Optional[FileNode]:
        return self._entries.get(path)

    def __repr__(self) -> str:
        return f"<Directory files={len(self)}>"


class Layer(_PathMap):
    """A layer: partial map ``PathName -> Change``.

    The prefix-collision rule applies to the Put subset only; a layer
    may delete "/a" while putting "/a/b".
    """

    __slots__ = ()

    def __init__(self, entries: Union[Mapping, Iterable, None] = None) -> None:
        super().__init__(entries)
        for path, change in self._entries.items():
            if not isinstance(change, Change):
                raise InvalidFileNode(f"{path!r} maps to {type(change).__name__}, not Change")
            if not paths.is_canonical(path):
                raise InvalidFileNode(f"not a canonical path name: {path!r}")
        _check_keys(path for path, change in self._entries.items() if not change.is_delete)

    def puts(self) -> dict[str, FileNode]:
        return {p: c.node for p, c in self._entries.items() if not c.is_delete}

    def deletes(self) -> list[str]:
        return [p for p, c in self._entries.items() if c.is_delete]

    def __repr__(self) -> str:
        return f"<Layer puts={len(self.puts())} deletes={len(self.deletes())}>"
