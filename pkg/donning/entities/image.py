"""
donning – Image Entities
===========================
Domain objects for stored images:

* ``Digest``      – "sha256" + 64 lowercase hex characters.
* ``ImageRef``    – ``repository:version`` tag name.
* ``ImageConfig`` – base-first layer digests plus runtime config.
* ``V1Image``     – a parent-linked image of the legacy id/parent model.

``ImageConfig`` knows how to serialise itself to canonical JSON bytes
(sorted keys, no insignificant whitespace, absent fields omitted) so
that equal configs always hash to the same digest.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional

from donning.entities.layerfs import Layer
from donning.exceptions import BadConfigBlob, InvalidDigest, InvalidImageRef
from donning.utils import paths

_HEX_RE = re.compile(r"^[0-9a-f]{64}$")
_REPOSITORY_RE = re.compile(r"^[a-z0-9]([a-z0-9._/-]*[a-z0-9])?$")
_VERSION_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.-]*$")

# Pinned so that equal inputs give bit-identical configs.
EPOCH_ZERO = "1970-01-01T00:00:00Z"


# ── Digest ───────────────────────────────────────────────────────

@dataclass(frozen=True, order=True)
class Digest:
    """A SHA-256 content address."""

    hex: str
    algorithm: str = "sha256"

    def __post_init__(self) -> None:
        if self.algorithm != "sha256":
            raise InvalidDigest(f"unsupported digest algorithm: {self.algorithm!r}")
        if not _HEX_RE.match(self.hex):
            raise InvalidDigest(f"digest must be 64 lowercase hex characters: {self.hex!r}")

    @classmethod
    def of(cls, data: bytes) -> "Digest":
        """Digest of *data*."""
        return cls(hashlib.sha256(data).hexdigest())

    @classmethod
    def parse(cls, text: str) -> "Digest":
        """Accept ``<hex>`` or ``sha256:<hex>``."""
        text = text.strip()
        if ":" in text:
            algorithm, _, hex_part = text.partition(":")
            return cls(hex_part, algorithm)
        return cls(text)

    @property
    def short(self) -> str:
        return self.hex[:12]

    def __str__(self) -> str:
        return f"{self.algorithm}:{self.hex}"


# ── Image references ─────────────────────────────────────────────

@dataclass(frozen=True, order=True)
class ImageRef:
    """Tag name ``repository:version``; version defaults to "latest"."""

    repository: str
    version: str = "latest"

    def __post_init__(self) -> None:
        if not _REPOSITORY_RE.match(self.repository) or "//" in self.repository:
            raise InvalidImageRef(f"invalid repository name: {self.repository!r}")
        if not _VERSION_RE.match(self.version):
            raise InvalidImageRef(f"invalid version: {self.version!r}")

    @classmethod
    def parse(cls, text: str) -> "ImageRef":
        """Parse ``repo`` or ``repo:version``."""
        text = text.strip()
        repository, sep, version = text.partition(":")
        if not sep:
            return cls(repository)
        if ":" in version:
            raise InvalidImageRef(f"more than one ':' in image reference: {text!r}")
        return cls(repository, version)

    def __str__(self) -> str:
        return f"{self.repository}:{self.version}"


# ── Image configuration ──────────────────────────────────────────

# Runtime fields a ``withConfig``-style override may set.
OVERRIDE_FIELDS: tuple[str, ...] = (
    "cmd", "entrypoint", "env", "workingdir", "user", "exposed_ports",
)


@dataclass(frozen=True)
class ImageConfig:
    """Layer sequence (base first, topmost last) plus runtime config.

    Parameters
    ----------
    layers : tuple[Digest, ...]
        Layer digests, base first.  The most recently donned layer is last.
    cmd, entrypoint : tuple[str, ...] or None
        Default command and entrypoint.
    env : tuple[str, ...]
        Ordered ``KEY=VALUE`` entries.
    workingdir : str or None
        Canonical path of the default working directory.
    user : str or None
    exposed_ports : tuple[int, ...]
        Sorted, unique.
    """

    layers: tuple[Digest, ...] = ()
    cmd: Optional[tuple[str, ...]] = None
    entrypoint: Optional[tuple[str, ...]] = None
    env: tuple[str, ...] = ()
    workingdir: Optional[str] = None
    user: Optional[str] = None
    exposed_ports: tuple[int, ...] = ()
    created: str = field(default=EPOCH_ZERO)

    def __post_init__(self) -> None:
        if self.created != EPOCH_ZERO:
            raise BadConfigBlob(f"created must be {EPOCH_ZERO}, got {self.created!r}")
        if list(self.exposed_ports) != sorted(set(self.exposed_ports)):
            object.__setattr__(self, "exposed_ports", tuple(sorted(set(self.exposed_ports))))
        if self.workingdir is not None:
            object.__setattr__(self, "workingdir", paths.normalize_mount_point(self.workingdir))
        for entry in self.env:
            if "=" not in entry:
                raise BadConfigBlob(f"env entry is not KEY=VALUE: {entry!r}")

    # ── Overrides ────────────────────────────────────────────────

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ImageConfig":
        """Return a copy with the given runtime fields replaced field-wise."""
        unknown = set(overrides) - set(OVERRIDE_FIELDS)
        if unknown:
            raise BadConfigBlob(f"unknown config fields: {', '.join(sorted(unknown))}")
        changes: dict[str, Any] = {}
        for key, value in overrides.items():
            changes[key] = _coerce_field(key, value)
        return replace(self, **changes)

    def with_layers(self, layers) -> "ImageConfig":
        return replace(self, layers=tuple(layers))

    # ── Serialisation ────────────────────────────────────────────

    def to_dict(self) -> dict:
        """Plain-dict form; absent fields are omitted entirely."""
        doc: dict = {
            "layers": [str(d) for d in self.layers],
            "env": list(self.env),
            "exposed_ports": list(self.exposed_ports),
            "created": self.created,
        }
        if self.cmd is not None:
            doc["cmd"] = list(self.cmd)
        if self.entrypoint is not None:
            doc["entrypoint"] = list(self.entrypoint)
        if self.workingdir is not None:
            doc["workingdir"] = self.workingdir
        if self.user is not None:
            doc["user"] = self.user
        return doc

    def to_bytes(self) -> bytes:
        """Canonical JSON: sorted keys, compact separators, UTF-8."""
        return json.dumps(
            self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False
        ).encode("utf-8")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ImageConfig":
        try:
            return cls(
                layers=tuple(Digest.parse(d) for d in data.get("layers", [])),
                cmd=_coerce_field("cmd", data.get("cmd")),
                entrypoint=_coerce_field("entrypoint", data.get("entrypoint")),
                env=_coerce_field("env", data.get("env", [])),
                workingdir=data.get("workingdir"),
                user=data.get("user"),
                exposed_ports=_coerce_field("exposed_ports", data.get("exposed_ports", [])),
                created=data.get("created", EPOCH_ZERO),
            )
        except (TypeError, AttributeError, ValueError) as exc:
            if isinstance(exc, BadConfigBlob):
                raise
            raise BadConfigBlob(f"malformed image config: {exc}") from exc

    @classmethod
    def from_bytes(cls, data: bytes) -> "ImageConfig":
        try:
            doc = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BadConfigBlob(f"config blob is not JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise BadConfigBlob("config blob is not a JSON object")
        return cls.from_dict(doc)

    # ── Dunder ───────────────────────────────────────────────────

    def __repr__(self) -> str:
        return f"<ImageConfig layers={len(self.layers)} cmd={self.cmd!r}>"


def _coerce_field(key: str, value: Any) -> Any:
    """Normalise a runtime-config value to its stored representation."""
    if key in ("cmd", "entrypoint"):
        if value is None:
            return None
        return tuple(str(v) for v in _as_list(value))
    if key == "env":
        return tuple(str(v) for v in _as_list(value or ()))
    if key == "exposed_ports":
        return tuple(sorted({int(v) for v in _as_list(value or ())}))
    if key == "workingdir":
        return None if value is None else paths.normalize_mount_point(str(value))
    if key == "user":
        return None if value is None else str(value)
    raise BadConfigBlob(f"unknown config field: {key!r}")


def _as_list(value: Any) -> Any:
    # A lone scalar is one entry, not a sequence of characters.
    if isinstance(value, (str, int)):
        return (value,)
    return value


# ── Legacy parent-linked images ──────────────────────────────────

@dataclass(frozen=True)
class V1Image:
    """An image of the id/parent model: one layer plus free-form meta data.

    ``meta`` keys that match ``OVERRIDE_FIELDS`` feed the combined config
    when a chain is linearised; other keys are carried but unused.
    """

    id: str
    layer: Layer
    parent: Optional[str] = None
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not _HEX_RE.match(self.id):
            raise InvalidDigest(f"v1 image id must be 64 lowercase hex characters: {self.id!r}")
        if self.parent is not None and not _HEX_RE.match(self.parent):
            raise InvalidDigest(f"v1 parent id must be 64 lowercase hex characters: {self.parent!r}")

    def __hash__(self) -> int:
        return hash(self.id)

    def __repr__(self) -> str:
        parent = self.parent[:12] if self.parent else None
        return f"<V1Image id={self.id[:12]} parent={parent}>"
