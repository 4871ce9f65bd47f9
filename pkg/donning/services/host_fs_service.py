"""
donning – Host Filesystem Service
====================================
Moves trees between the host filesystem and in-memory directories:

* ``read_directory``     – host directory -> ``Directory``
* ``materialize_rootfs`` – image config -> host directory

Only regular files (content + executable bit) and symlinks (target
stored verbatim, never followed) are modelled.  Empty directories have
no representation; other file types are skipped with a warning.
"""

from __future__ import annotations

import logging
import os
import stat
from pathlib import Path
from typing import Union

from donning.entities.image import ImageConfig
from donning.entities.layerfs import Directory, FileNode
from donning.services.image_store import ImageStore

logger = logging.getLogger(__name__)

_EXEC_BITS = stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH


class HostFsService:
    """Stateless bridge between host trees and ``Directory`` values."""

    @staticmethod
    def read_directory(root: Union[str, Path]) -> Directory:
        """Read the tree under *root* into a ``Directory``.

        Paths are named relative to *root* ("/bin/run" for
        ``<root>/bin/run``).  Symlinks are recorded, not followed.

        Raises
        ------
        NotADirectoryError
            *root* is not a directory.
        """
        root = Path(root)
        if not root.is_dir():
            raise NotADirectoryError(f"not a directory: {root}")

        entries: dict[str, FileNode] = {}
        for dirpath, dirnames, filenames in os.walk(root, followlinks=False):
            dirnames.sort()
            for name in sorted(filenames) + [d for d in dirnames if os.path.islink(os.path.join(dirpath, d))]:
                full = os.path.join(dirpath, name)
                rel = "/" + os.path.relpath(full, root).replace(os.sep, "/")
                info = os.lstat(full)
                if stat.S_ISLNK(info.st_mode):
                    entries[rel] = FileNode.symlink(os.readlink(full))
                elif stat.S_ISREG(info.st_mode):
                    with open(full, "rb") as handle:
                        content = handle.read()
                    entries[rel] = FileNode.regular(content, executable=bool(info.st_mode & stat.S_IXUSR))
                else:
                    logger.warning("[HostFsService] skipping unsupported file type: %s", full)
        return Directory(entries)

    @staticmethod
    def materialize_rootfs(store: ImageStore, config: ImageConfig, dest: Union[str, Path]) -> None:
        """Write the union view of *config* into the empty directory *dest*.

        Raises
        ------
        FileExistsError
            *dest* exists and is not empty.
        OSError
            Any write failure, with the offending path in the message.
        """
        dest = Path(dest)
        if dest.exists() and any(dest.iterdir()):
            raise FileExistsError(f"destination is not empty: {dest}")
        dest.mkdir(parents=True, exist_ok=True)

        for path, node in store.enumerate(config).sorted_items():
            target = dest.joinpath(*path.lstrip("/").split("/"))
            try:
                target.parent.mkdir(parents=True, exist_ok=True)
                if node.is_symlink:
                    os.symlink(node.target, target)
                else:
                    target.write_bytes(node.content)
                    mode = 0o644 | (_EXEC_BITS if node.executable else 0)
                    os.chmod(target, mode)
            except OSError as exc:
                raise OSError(exc.errno, f"cannot materialize {path} at {target}: {exc.strerror}") from exc
        logger.debug("[HostFsService] materialized %s into %s", config, dest)

    def __repr__(self) -> str:
        return "<HostFsService>"
