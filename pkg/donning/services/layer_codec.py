"""
donning – LDL1 Layer Codec
=============================
Canonical binary serialisation of layers.  The same ``Layer`` always
encodes to the same bytes, so its SHA-256 is a stable content address.

Format::

    "LDL1"                     magic
    u32 BE                     entry count
    entries, ascending by UTF-8 path bytes:
        u16 BE + bytes         path
        u8                     kind  0=delete 1=regular 2=regular+x 3=symlink
        kind 1/2: u64 BE + bytes   content
        kind 3:   u16 BE + bytes   symlink target
"""

from __future__ import annotations

import struct

from donning.entities.image import Digest
from donning.entities.layerfs import DELETE, Change, FileKind, FileNode, Layer
from donning.exceptions import (
    BadMagic,
    BlobFormatError,
    DuplicatePath,
    TrailingBytes,
    TruncatedBlob,
    UnknownKind,
    UnsortedEntries,
)
from donning.utils import paths

MAGIC = b"LDL1"

KIND_DELETE = 0
KIND_REGULAR = 1
KIND_EXECUTABLE = 2
KIND_SYMLINK = 3

_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")


class LayerCodec:
    """Encode / decode layers in the LDL1 format."""

    # ── Encode ───────────────────────────────────────────────────

    @staticmethod
    def encode(layer: Layer) -> bytes:
        """Serialise *layer*; entries are written in path-byte order."""
        out = bytearray(MAGIC)
        out += _U32.pack(len(layer))
        for path, change in layer.sorted_items():
            raw_path = path.encode("utf-8")
            out += _U16.pack(len(raw_path)) + raw_path
            if change.is_delete:
                out.append(KIND_DELETE)
                continue
            node = change.node
            if node.kind is FileKind.SYMLINK:
                raw_target = node.target.encode("utf-8")
                out.append(KIND_SYMLINK)
                out += _U16.pack(len(raw_target)) + raw_target
            else:
                out.append(KIND_EXECUTABLE if node.executable else KIND_REGULAR)
                out += _U64.pack(len(node.content)) + node.content
        return bytes(out)

    @staticmethod
    def digest(data: bytes) -> Digest:
        return Digest.of(data)

    # ── Decode ───────────────────────────────────────────────────

    @classmethod
    def decode(cls, data: bytes) -> Layer:
        """Parse an LDL1 blob, rejecting anything non-canonical.

        Raises
        ------
        BadMagic, TruncatedBlob, UnsortedEntries, DuplicatePath
            and other ``BlobFormatError`` subclasses for unknown kind
            bytes, non-canonical paths or trailing bytes.
        """
        reader = _Reader(data)
        if reader.take(len(MAGIC)) != MAGIC:
            raise BadMagic("layer blob does not start with 'LDL1'")
        count = reader.unpack(_U32)

        entries: dict[str, Change] = {}
        previous: bytes | None = None
        for _ in range(count):
            raw_path = reader.take(reader.unpack(_U16))
            if previous is not None:
                if raw_path == previous:
                    raise DuplicatePath(f"path appears twice: {raw_path!r}")
                if raw_path < previous:
                    raise UnsortedEntries(f"{raw_path!r} follows {previous!r}")
            previous = raw_path
            path = cls._path(raw_path)

            kind = reader.take(1)[0]
            if kind == KIND_DELETE:
                entries[path] = DELETE
            elif kind in (KIND_REGULAR, KIND_EXECUTABLE):
                content = reader.take(reader.unpack(_U64))
                entries[path] = Change.put(
                    FileNode.regular(content, executable=kind == KIND_EXECUTABLE)
                )
            elif kind == KIND_SYMLINK:
                target = reader.take(reader.unpack(_U16))
                if not target:
                    raise BlobFormatError(f"empty symlink target at {path!r}")
                entries[path] = Change.put(FileNode.symlink(cls._text(target)))
            else:
                raise UnknownKind(f"unknown kind byte {kind} at {path!r}")

        if reader.remaining:
            raise TrailingBytes(f"{reader.remaining} bytes after the last entry")
        return Layer(entries)

    # ── Helpers ──────────────────────────────────────────────────

    @staticmethod
    def _text(raw: bytes) -> str:
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise BlobFormatError(f"invalid UTF-8 in layer blob: {raw!r}") from exc

    @classmethod
    def _path(cls, raw: bytes) -> str:
        path = cls._text(raw)
        if not paths.is_canonical(path):
            raise BlobFormatError(f"non-canonical path in layer blob: {path!r}")
        return path


class _Reader:
    """Bounds-checked cursor over a byte string."""

    def __init__(self, data: bytes) -> None:
        self._data = memoryview(data)
        self._pos = 0

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def take(self, size: int) -> bytes:
        if size > self.remaining:
            raise TruncatedBlob(
                f"need {size} bytes at offset {self._pos}, only {self.remaining} left"
            )
        chunk = bytes(self._data[self._pos:self._pos + size])
        self._pos += size
        return chunk

    def unpack(self, fmt: struct.Struct) -> int:
        return fmt.unpack(self.take(fmt.size))[0]
