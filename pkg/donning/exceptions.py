"""
donning – Exceptions
======================
Every error the package raises derives from ``DonningError``.  Each
class carries the process ``exit_code`` the CLI reports for it:

    1  build / step / store error (default)
    2  usage or parse error
    3  store corruption (``DigestMismatch``)

Errors raised while a build step runs are decorated with the failing
task name, step index and step kind through ``with_step``.
"""

from __future__ import annotations

from typing import Optional


class DonningError(Exception):
    """Base class for all donning errors."""

    exit_code: int = 1

    def __init__(self, message: str = "") -> None:
        super().__init__(message)
        self.message: str = message
        self.task: Optional[str] = None
        self.step_index: Optional[int] = None
        self.step_kind: Optional[str] = None

    def with_step(self, task: str, step_index: int, step_kind: str) -> "DonningError":
        """Attach build-step context (first caller wins) and return ``self``."""
        if self.task is None:
            self.task = task
            self.step_index = step_index
            self.step_kind = step_kind
        return self

    def __str__(self) -> str:
        if self.task is None:
            return self.message
        return f"task {self.task!r} step {self.step_index} ({self.step_kind}): {self.message}"


# ── Paths, directories and layers ────────────────────────────────

class PathError(DonningError, ValueError):
    """A path string cannot be turned into a canonical PathName."""


class NotAbsolute(PathError):
    pass


class DotDotRejected(PathError):
    pass


class EmptyPath(PathError):
    pass


class PrefixCollision(DonningError, ValueError):
    """A directory would hold both ``/a`` and ``/a/...``."""


class InvalidFileNode(DonningError, ValueError):
    pass


# ── Layer blob format ────────────────────────────────────────────

class BlobFormatError(DonningError, ValueError):
    """Bytes are not a canonical LDL1 layer blob."""


class BadMagic(BlobFormatError):
    pass


class TruncatedBlob(BlobFormatError):
    pass


class UnsortedEntries(BlobFormatError):
    pass


class DuplicatePath(BlobFormatError):
    pass


class TrailingBytes(BlobFormatError):
    pass


class UnknownKind(BlobFormatError):
    pass


class BadConfigBlob(BlobFormatError):
    """Bytes do not decode to an image configuration."""


# ── Image store ──────────────────────────────────────────────────

class InvalidDigest(DonningError, ValueError):
    pass


class InvalidImageRef(DonningError, ValueError):
    pass


class UnknownDigest(DonningError, KeyError):
    pass


class UnknownTag(DonningError, KeyError):
    pass


class DigestMismatch(DonningError):
    """Stored or imported bytes do not hash to their name."""

    exit_code = 3


class DanglingLayers(DonningError):
    pass


class MissingBlob(DonningError):
    pass


class MissingParent(DonningError):
    pass


class CycleDetected(DonningError):
    pass


# ── Control files and the engine ─────────────────────────────────

class ControlFileError(DonningError, ValueError):
    """The control program is malformed."""

    exit_code = 2


class ControlSyntaxError(ControlFileError):
    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line: Optional[int] = line


class DuplicateTask(ControlFileError):
    pass


class UnknownStepKind(ControlFileError):
    pass


class UnknownVariable(ControlFileError):
    pass


class UnknownTask(DonningError, KeyError):
    pass


class TaskCycle(DonningError):
    def __init__(self, cycle: list[str]) -> None:
        super().__init__("task cycle: " + " -> ".join(cycle))
        self.cycle: list[str] = cycle


class StepFailed(DonningError):
    pass


class ExpectationFailed(DonningError):
    pass


# ── Executors ────────────────────────────────────────────────────

class ExecError(DonningError):
    pass


class CommandNotFound(ExecError):
    pass


class ExecTimeout(ExecError):
    pass


class SpawnFailure(ExecError):
    pass


class RuntimeUnavailable(ExecError):
    pass


class ImagePullFailed(ExecError):
    pass


# ── Autobuild ────────────────────────────────────────────────────

class PackageTableError(DonningError, ValueError):
    exit_code = 2


class FieldCountError(PackageTableError):
    def __init__(self, line: int, count: int) -> None:
        super().__init__(f"line {line}: expected 4 tab-separated fields, got {count}")
        self.line: int = line


class DuplicatePackageRevision(PackageTableError):
    pass


class AdapterError(PackageTableError):
    pass


class UnknownPackager(DonningError):
    pass


class TaskNameCollision(DonningError):
    pass


# ── CLI ──────────────────────────────────────────────────────────

class UsageError(DonningError):
    exit_code = 2
