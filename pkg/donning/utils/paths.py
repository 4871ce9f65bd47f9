"""
donning – Path helpers
=========================
Canonical absolute path names inside images.  A canonical path starts
with "/", has no empty, "." or ".." segments and never ends with "/".
Directory prefixes ("/tmp/") are formed on demand by appending "/".
"""

from __future__ import annotations

from donning.exceptions import DotDotRejected, EmptyPath, NotAbsolute

ROOT = "/"


def normalize_path(raw: str) -> str:
    """Return the canonical form of *raw*.

    Duplicate slashes and "." segments are dropped, a trailing slash is
    stripped.  ".." is never resolved.

    Raises
    ------
    NotAbsolute
        *raw* does not start with "/".
    DotDotRejected
        *raw* contains a ".." segment.
    EmptyPath
        Nothing but the root is left after normalisation.
    """
    if not raw.startswith("/"):
        raise NotAbsolute(f"path must be absolute: {raw!r}")
    segments = [s for s in raw.split("/") if s not in ("", ".")]
    if ".." in segments:
        raise DotDotRejected(f"'..' is not allowed in image paths: {raw!r}")
    if not segments:
        raise EmptyPath(f"path names no file: {raw!r}")
    return "/" + "/".join(segments)


def normalize_mount_point(raw: str) -> str:
    """Like ``normalize_path`` but the root itself is a valid result."""
    try:
        return normalize_path(raw)
    except EmptyPath:
        return ROOT


def is_canonical(path: str) -> bool:
    try:
        return normalize_path(path) == path
    except (NotAbsolute, DotDotRejected, EmptyPath):
        return False


def as_prefix(path: str) -> str:
    """Directory prefix for *path*: "/data" -> "/data/", "/" -> "/"."""
    return path if path.endswith("/") else path + "/"


def contained_in(path: str, prefix: str) -> bool:
    """True iff *path* lies inside the directory named by *prefix*.

    *prefix* must end with "/", which makes the test respect segment
    boundaries ("/tmpx/f" is not inside "/tmp/").
    """
    if not prefix.endswith("/"):
        raise ValueError(f"directory prefix must end with '/': {prefix!r}")
    return path.startswith(prefix)


def join_mount(mount_point: str, path: str) -> str:
    """The name of *path* once mounted at *mount_point*, i.e. (p)(f)."""
    if mount_point == ROOT:
        return path
    return mount_point + path


def ancestors(path: str) -> list[str]:
    """Proper ancestors of *path*, outermost first ("/a/b/c" -> ["/a", "/a/b"])."""
    segments = path.split("/")[1:-1]
    return ["/" + "/".join(segments[: i + 1]) for i in range(len(segments))]
