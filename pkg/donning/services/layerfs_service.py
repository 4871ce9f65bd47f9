"""
donning – Layer Filesystem Service
=====================================
The pure filesystem algebra: normalising paths, mounting one directory
into another, diffing two directories into a layer, applying a layer
and merging a stack of layers.  No I/O happens here.

Every method is a ``@staticmethod``; the class is never instantiated.

Usage
-----
>>> layer = LayerFsService.diff(before, after)
>>> LayerFsService.apply(before, layer) == after
True
"""

from __future__ import annotations

from collections.abc import Iterable

from donning.entities.layerfs import DELETE, Change, Directory, Layer
from donning.utils import paths


class LayerFsService:
    """Operations over ``Directory`` and ``Layer`` values."""

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Path names
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    normalize_path = staticmethod(paths.normalize_path)
    mount_point = staticmethod(paths.normalize_mount_point)
    contained_in = staticmethod(paths.contained_in)

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Directories
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    @staticmethod
    def mount(d: Directory, d_prime: Directory, mount_point: str) -> Directory:
        """Mount *d_prime* into *d* at *mount_point*.

        Every file of *d_prime* appears under the mount point; files of
        *d* outside the mount point are kept; files of *d* inside it are
        shadowed.  A mount point of "/" replaces *d* entirely.

        Raises
        ------
        PrefixCollision
            The result would hold a file and a path beneath it, e.g. *d*
            has a file named exactly *mount_point*.
        """
        point = paths.normalize_mount_point(mount_point)
        prefix = paths.as_prefix(point)
        entries = {f: n for f, n in d.items() if not paths.contained_in(f, prefix)}
        for f, n in d_prime.items():
            entries[paths.join_mount(point, f)] = n
        return Directory(entries)

    @staticmethod
    def diff(a: Directory, b: Directory) -> Layer:
        """The layer that turns *a* into *b*.

        Changed and new paths become ``Put(b(x))``, vanished paths become
        ``Delete``; unchanged paths are left out.
        """
        changes: dict[str, Change] = {}
        for x, node in b.items():
            if a.get(x) != node:
                changes[x] = Change.put(node)
        for x in a:
            if x not in b:
                changes[x] = DELETE
        return Layer(changes)

    @staticmethod
    def apply(d: Directory, layer: Layer) -> Directory:
        """Apply *layer* on top of *d*.

        Delete removes the exact path only and is a no-op when the path
        is absent.

        Raises
        ------
        PrefixCollision
            The result is not a valid directory.
        """
        entries = dict(d)
        for x, change in layer.items():
            if change.is_delete:
                entries.pop(x, None)
            else:
                entries[x] = change.node
        return Directory(entries)

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Layers
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    @staticmethod
    def merge_layers(layers: Iterable[Layer]) -> Layer:
        """Combine a base-first stack of layers into one.

        The highest layer mentioning a path decides its entry.  Deletes
        survive the merge, so a Put followed by a Delete stays a Delete.
        """
        merged: dict[str, Change] = {}
        for layer in layers:
            merged.update(layer.items())
        return Layer(merged)

    @staticmethod
    def payload_size(layer: Layer) -> int:
        """Bytes carried by the Puts of *layer*; deletions are free."""
        return sum(node.size for node in layer.puts().values())

    @staticmethod
    def directory_from_layer(layer: Layer) -> Directory:
        """The Put subset of *layer* as a directory (Deletes dropped)."""
        return Directory(layer.puts())

    def __repr__(self) -> str:
        return "<LayerFsService>"
